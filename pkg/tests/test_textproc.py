import re

import numpy as np
import pytest

from longalign import synth, textproc
from longalign.errors import NoSpeakerMarkersError


class TestSpeakerTurns:
    def test_two_markers_two_turns(self):
        res = textproc.extract_speaker_turns("张先生: 你好\n李女士: 再见")
        assert [(t.speaker_id, t.text) for t in res.turns] == [("张先生", "你好"), ("李女士", "再见")]
        assert [t.order for t in res.turns] == [0, 1]

    def test_text_before_first_marker_dropped_and_counted(self):
        res = textproc.extract_speaker_turns("boilerplate line\nanother\n甲: 内容")
        assert res.dropped_lines == 2
        assert len(res.turns) == 1

    def test_no_marker_raises(self):
        with pytest.raises(NoSpeakerMarkersError):
            textproc.extract_speaker_turns("no markers here\njust text")

    def test_multiline_turn_accumulates(self):
        res = textproc.extract_speaker_turns("甲: 第一行\n第二行\n乙: 另一个")
        assert res.turns[0].text == "第一行\n第二行"

    def test_synthetic_doc_matches_generator_turns(self):
        b = synth.gen_meeting(synth.NoiseParams(), synth.SynthSize(n_sentences=50), seed=11)
        res = textproc.extract_speaker_turns(b.transcript_text)
        # generator gold: speaker sequence per sentence; re-derive per turn
        doc = textproc.doc_from_text(b.transcript_text, "d")
        speakers = [doc.speaker_of(s) for s in doc.sentences]
        assert speakers == b.sentence_speaker
        assert {t.speaker_id for t in res.turns} <= set(b.speakers)

    def test_non_marker_char_count_preserved(self):
        raw = "甲: 你好。谢谢\n继续\n乙女士: 再见了"
        res = textproc.extract_speaker_turns(raw)
        kept = sum(len(t.text.replace("\n", "")) for t in res.turns)
        # oracle: strip markers manually, count remaining non-newline chars
        expect = 0
        for line in raw.splitlines():
            m = re.match(r"^(\S{1,12})[:：]", line)
            expect += len(line[m.end():].lstrip(" \t")) if m else len(line)
        assert kept == expect


class TestSplitSentences:
    def test_three_terminated(self):
        s = textproc.split_sentences("甲。乙！丙")
        assert [x.text for x in s] == ["甲。", "乙！", "丙"]

    def test_empty(self):
        assert textproc.split_sentences("") == []

    def test_trailing_closer_attaches(self):
        s = textproc.split_sentences("他说「好。」然后走了。")
        assert [x.text for x in s] == ["他说「好。」", "然后走了。"]

    def test_scan_oracle_random(self, rng):
        terms = "。！？"
        body = [chr(0x4E00 + i) for i in range(40)]
        for trial in range(50):
            r = np.random.default_rng(trial)
            chars = []
            for _ in range(r.integers(1, 80)):
                if r.random() < 0.15:
                    chars.append(terms[r.integers(0, len(terms))])
                else:
                    chars.append(body[r.integers(0, len(body))])
            text = "".join(chars)
            got = [x.text for x in textproc.split_sentences(text)]
            # linear-scan oracle
            expect, buf = [], ""
            for ch in text:
                buf += ch
                if ch in terms:
                    expect.append(buf)
                    buf = ""
            if buf:
                expect.append(buf)
            expect = [e for e in expect if e.strip()]
            assert got == expect

    def test_partition_property(self):
        text = "甲。乙！丙？丁"
        parts = [x.text for x in textproc.split_sentences(text)]
        assert "".join(parts) == text
        for p in parts[:-1]:
            assert p[-1] in textproc.DEFAULT_TERMINATORS or p[-1] in "」』”’\"')]}》〉】）"


class TestTokenize:
    def test_code_mixed_word(self):
        assert textproc.tokenize("我哋ok") == ["我", "哋", "ok"]

    def test_numbers_single_unit(self):
        assert textproc.tokenize("2021年") == ["2021", "年"]

    def test_whitespace_discarded_punct_kept(self):
        assert textproc.tokenize("你 好。hello-x") == ["你", "好", "。", "hello-x"]

    def test_regex_reference_oracle(self, rng):
        pool = "我哋你好abcXYZ0129'-。！ ，\tok年 "
        for trial in range(20):
            r = np.random.default_rng(1000 + trial)
            text = "".join(pool[i] for i in r.integers(0, len(pool), 1000))
            got = textproc.tokenize(text)
            expect = []
            for run, space, other in re.findall(r"([A-Za-z0-9'\-]+)|(\s+)|(.)", text):
                if run:
                    expect.append(run)
                elif other:
                    expect.append(other)
            assert got == expect

    def test_idempotent_on_single_tokens(self):
        for tok in ["我", "ok", "2021", "。", "don't"]:
            assert textproc.tokenize(tok) == [tok]


class TestRomanize:
    def test_direct_lookup(self):
        lex = textproc.PronLexicon({"你": ["nei5"], "好": ["hou2"]})
        out, unmapped = textproc.romanize(["你", "好"], lex)
        assert out == ["nei5", "hou2"] and unmapped == 0

    def test_unmapped_pass_through(self):
        lex = textproc.PronLexicon({"你": ["nei5"]})
        out, unmapped = textproc.romanize(["你", "々"], lex)
        assert out == ["nei5", "々"] and unmapped == 1

    def test_multi_syllable_expands(self):
        lex = textproc.PronLexicon({"廿": ["jaa6", "aa6"]})
        out, _ = textproc.romanize(["廿"], lex)
        assert out == ["jaa6", "aa6"]

    def test_output_never_shorter(self, rng):
        toks = [chr(0x4E00 + i) for i in rng.integers(0, 50, 200)]
        lex = textproc.PronLexicon({chr(0x4E00 + i): [f"s{i}", f"t{i}"][: 1 + i % 2] for i in range(30)})
        out, unmapped = textproc.romanize(toks, lex)
        assert len(out) >= len(toks)
        assert unmapped == sum(1 for t in toks if t not in lex)

    def test_table_lookup_oracle(self, rng):
        vocab = [chr(0x4E00 + i) for i in range(60)]
        lex = textproc.PronLexicon({t: [f"r{i}"] for i, t in enumerate(vocab) if i % 3 != 0})
        toks = [vocab[i] for i in rng.integers(0, 60, 500)]
        out, unmapped = textproc.romanize(toks, lex)
        expect = []
        miss = 0
        for t in toks:
            hit = lex.lookup(t)
            if hit is None:
                expect.append(t)
                miss += 1
            else:
                expect.extend(hit)
        assert out == expect and unmapped == miss

    def test_homograph_first_listed_wins(self, tmp_path):
        (tmp_path / "lex.tsv").write_text("行\thang4\n行\thong4\n", encoding="utf-8")
        lex = textproc.PronLexicon.from_file(tmp_path / "lex.tsv")
        assert lex.lookup("行") == ["hang4"]

    def test_lexicon_file_round_trip(self, tmp_path):
        lex = textproc.PronLexicon({"你": ["nei5"], "好": ["hou2", "hou3"]})
        lex.to_file(tmp_path / "l.tsv")
        back = textproc.PronLexicon.from_file(tmp_path / "l.tsv")
        assert back.lookup("好") == ["hou2", "hou3"]


class TestSentenceDoc:
    def test_round_trip_jsonl(self, tmp_path):
        b = synth.gen_meeting(synth.NoiseParams(), synth.SynthSize(n_sentences=10), seed=2)
        doc = textproc.doc_from_text(b.transcript_text, "docx")
        textproc.write_sentence_doc(doc, tmp_path / "s.jsonl")
        back = textproc.read_sentence_doc(tmp_path / "s.jsonl")
        assert [s.tokens for s in back.sentences] == [s.tokens for s in doc.sentences]
        assert [back.speaker_of(s) for s in back.sentences] == [doc.speaker_of(s) for s in doc.sentences]

    def test_token_offsets_tile(self):
        b = synth.gen_meeting(synth.NoiseParams(), synth.SynthSize(n_sentences=8), seed=5)
        doc = textproc.doc_from_text(b.transcript_text, "d")
        spans = doc.sentence_token_offsets()
        assert spans[0][0] == 0
        for (a, b_), (c, d_) in zip(spans, spans[1:]):
            assert b_ == c
        assert spans[-1][1] == len(doc.all_tokens())
