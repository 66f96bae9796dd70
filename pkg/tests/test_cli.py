import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from longalign import cli, core, synth
from longalign.errors import OrderError


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def make_bundle(tmp_path, docs=2, sentences=25, seed=7, **noise):
    params = synth.NoiseParams(**noise)
    size = synth.SynthSize(n_sentences=sentences, vocab_size=40)
    bundle_dir = tmp_path / "bundle"
    for d in range(docs):
        synth.write_bundle(synth.gen_meeting(params, size, seed, doc_index=d), bundle_dir)
    return bundle_dir


class TestTopicCuts:
    def test_two_topics(self):
        cuts = cli.topic_cuts([(0.0, "a"), (600.0, "b")], 1200.0)
        assert [(s, e) for _, s, e, _ in cuts.entries] == [(0.0, 600.0), (600.0, 1200.0)]
        assert [l for _, _, _, l in cuts.entries] == ["a", "b"]
        assert cuts.sample_rate == 16000

    def test_single_topic_full_span(self):
        cuts = cli.topic_cuts([(0.0, "only")], 900.0)
        assert cuts.entries == [("rec", 0.0, 900.0, "only")]

    def test_tiling_oracle(self, rng):
        for trial in range(40):
            r = np.random.default_rng(trial)
            dur = float(r.uniform(100, 5000))
            times = sorted(float(x) for x in r.uniform(0, dur * 0.99, size=int(r.integers(1, 20))))
            cuts = cli.topic_cuts([(t, f"t{i}") for i, t in enumerate(times)], dur)
            spans = [(s, e) for _, s, e, _ in cuts.entries]
            assert spans[0][0] == times[0]
            assert spans[-1][1] == dur
            for (a, b), (c, d) in zip(spans, spans[1:]):
                assert b == c and a < b

    def test_unsorted_rejected(self):
        with pytest.raises(OrderError):
            cli.topic_cuts([(10.0, "a"), (5.0, "b")], 100.0)


class TestBlankSegmenter:
    def test_cuts_on_long_blank_runs(self):
        b = synth.gen_meeting(synth.NoiseParams(), synth.SynthSize(n_sentences=30, vocab_size=25),
                              seed=3, seg_sentences=10, segment_gap=40)
        segs = cli.segment_by_blank_runs(b.posteriors, min_run=30)
        assert len(segs) == len(b.segments)
        assert segs[0][0] == 0 and segs[-1][1] == b.posteriors.frames
        for (a, b1), (c, d) in zip(segs, segs[1:]):
            assert b1 == c

    def test_no_long_runs_single_segment(self):
        b = synth.gen_meeting(synth.NoiseParams(), synth.SynthSize(n_sentences=10), seed=1)
        segs = cli.segment_by_blank_runs(b.posteriors, min_run=2000)
        assert segs == [(0, b.posteriors.frames)]


class TestPipeline:
    def test_end_to_end_zero_noise(self, tmp_path):
        bundle = make_bundle(tmp_path, docs=4, sentences=15)
        out = tmp_path / "out"
        assert run_cli("pipeline", "--bundle-dir", bundle, "--out-dir", out, "--seed", 17) == 0
        manifest = core.read_manifest(out / "manifest.jsonl")
        assert manifest
        report = json.loads((out / "pipeline_report.json").read_text())
        assert report["ok"] and len(report["stages"]) == 7
        # every aligned sentence became a triplet with clean quality
        for row in manifest:
            assert row.quality["cer"] == 0.0

    def test_rerun_byte_identical(self, tmp_path):
        bundle = make_bundle(tmp_path, docs=4, sentences=12)
        outs = []
        for name in ("out_a", "out_b"):
            out = tmp_path / name
            assert run_cli("pipeline", "--bundle-dir", bundle, "--out-dir", out, "--seed", 5) == 0
            digest = {}
            for p in sorted(out.rglob("*")):
                if p.is_file():
                    digest[str(p.relative_to(out))] = hashlib.sha256(p.read_bytes()).hexdigest()
            outs.append(digest)
        assert outs[0] == outs[1]

    def test_missing_embeddings_aborts_at_bitext(self, tmp_path):
        bundle = make_bundle(tmp_path, docs=1, sentences=10)
        (bundle / "doc_000" / "src.lemb").unlink()
        out = tmp_path / "out"
        assert run_cli("pipeline", "--bundle-dir", bundle, "--out-dir", out) == 3
        report = json.loads((out / "pipeline_report.json").read_text())
        assert report["failed_stage"] == "bitext-align"
        failing = [s for s in report["stages"] if not s["ok"]]
        assert "src.lemb" in failing[0]["error"]

    def test_lock_file_blocks_concurrent_runs(self, tmp_path):
        bundle = make_bundle(tmp_path, docs=1, sentences=8)
        out = tmp_path / "out"
        out.mkdir()
        (out / ".lock").write_text("12345")
        assert run_cli("pipeline", "--bundle-dir", bundle, "--out-dir", out) == 3

    def test_validate_cross_references(self, tmp_path):
        bundle = make_bundle(tmp_path, docs=4, sentences=12)
        out = tmp_path / "out"
        assert run_cli("pipeline", "--bundle-dir", bundle, "--out-dir", out) == 0
        assert run_cli("validate", "--pipeline-out", out) == 0
        # corrupt: claim a triplet for a sentence that was never aligned
        rows = (out / "manifest.jsonl").read_text().splitlines()
        row = json.loads(rows[0])
        row["utt_id"] = "doc_000_doc_000_s99999"
        (out / "manifest.jsonl").write_text("\n".join([json.dumps(row, ensure_ascii=False)] + rows[1:]) + "\n")
        assert run_cli("validate", "--pipeline-out", out) == 3

    def test_eval_reports_exact_spans(self, tmp_path, capsys):
        bundle = make_bundle(tmp_path, docs=4, sentences=12)
        out = tmp_path / "out"
        run_cli("pipeline", "--bundle-dir", bundle, "--out-dir", out)
        assert run_cli("eval", "--bundle-dir", bundle, "--out-dir", out,
                       "--out", tmp_path / "metrics.json") == 0
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert metrics["exact_span_fraction"] == 1.0
        assert metrics["spoken_skipped"] == 0

    def test_config_error_exit_code(self, tmp_path):
        assert run_cli("pipeline", "--bundle-dir", tmp_path / "nope", "--out-dir", tmp_path / "o") == 2
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        bundle = make_bundle(tmp_path, docs=1, sentences=5)
        assert run_cli("pipeline", "--bundle-dir", bundle, "--out-dir", tmp_path / "o2",
                       "--config", bad) == 2


class TestFileValidators:
    def test_posterior_validator(self, tmp_path):
        b = synth.gen_meeting(synth.NoiseParams(p_acoustic=0.1), synth.SynthSize(n_sentences=4), seed=1)
        core.write_posteriors(b.posteriors, tmp_path / "ok.lpost")
        assert run_cli("validate", "--post", tmp_path / "ok.lpost") == 0
        (tmp_path / "bad.lpost").write_bytes(b"JUNK")
        assert run_cli("validate", "--post", tmp_path / "bad.lpost") == 3

    def test_embedding_validator(self, tmp_path):
        rows = np.eye(4, dtype=np.float32)
        idx = [{"sent_id": f"s{i}", "merge_start": i, "merge_len": 1} for i in range(4)]
        core.write_embeddings(rows, idx, tmp_path / "ok.lemb")
        assert run_cli("validate", "--emb", tmp_path / "ok.lemb") == 0
        core.write_embeddings(rows * 2.0, idx, tmp_path / "bad.lemb")
        assert run_cli("validate", "--emb", tmp_path / "bad.lemb") == 3


class TestStandaloneCommands:
    def test_prep_text_and_flex_align(self, tmp_path):
        bundle = make_bundle(tmp_path, docs=1, sentences=10)
        doc = bundle / "doc_000"
        sents = tmp_path / "sent.jsonl"
        assert run_cli("prep-text", "--in", doc / "transcript.txt", "--out", sents, "--doc-id", "doc_000") == 0
        out = tmp_path / "align.jsonl"
        assert run_cli("flex-align", "--post", doc / "audio.lpost", "--sents", sents,
                       "--vocab", doc / "vocab.txt", "--out", out,
                       "--window-s", 20, "--overlap-s", 6) == 0
        rows = [json.loads(l) for l in out.read_text().splitlines()]
        assert all(r["status"] == "aligned" for r in rows)
        meta, gold = synth.read_gold(doc)
        for r, g in zip(rows, gold):
            assert r["start_ms"] == g.start_frame * meta["hop_ms"]
            assert r["end_ms"] == g.end_frame * meta["hop_ms"]

    def test_train_lm_and_first_pass_cli(self, tmp_path):
        bundle = make_bundle(tmp_path, docs=1, sentences=10)
        doc = bundle / "doc_000"
        sents = tmp_path / "sent.jsonl"
        run_cli("prep-text", "--in", doc / "transcript.txt", "--out", sents)
        text = tmp_path / "text.txt"
        text.write_text("".join(l.split(": ", 1)[1] + "\n" for l in (doc / "transcript.txt").read_text().splitlines() if ": " in l), encoding="utf-8")
        arpa = tmp_path / "m.arpa"
        assert run_cli("train-lm", "--in", text, "--vocab", doc / "vocab.txt", "--out", arpa) == 0
        assert arpa.read_text().startswith("\\data\\")
        posts = sorted(doc.glob("seg_*.lpost"))
        segs = cli.read_segments(doc / "segments.jsonl")
        regions = tmp_path / "regions.jsonl"
        assert run_cli("first-pass", "--posts", *posts, "--doc", sents,
                       "--vocab", doc / "vocab.txt", "--offsets", *[s for s, _ in segs],
                       "--out", regions) == 0
        assert regions.read_text().strip()

    def test_bitext_align_cli(self, tmp_path):
        bundle = make_bundle(tmp_path, docs=1, sentences=10)
        doc = bundle / "doc_000"
        out = tmp_path / "pairs.jsonl"
        assert run_cli("bitext-align", "--src-emb", doc / "src.lemb",
                       "--tgt-emb", doc / "tgt.lemb", "--out", out) == 0
        pairs = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(pairs) == 10
        assert all(p["cost"] <= 0.627 for p in pairs)

    def test_synth_subcommand(self, tmp_path):
        assert run_cli("synth", "--out-dir", tmp_path / "b", "--docs", 2, "--sentences", 6, "--seed", 3) == 0
        assert (tmp_path / "b" / "doc_001" / "audio.lpost").exists()

    def test_filter_labels_report(self, tmp_path, capsys):
        sheet = tmp_path / "sheet.jsonl"
        rows = [{"utt_id": f"u{k}", "cer_bin": 0, "cer": k / 10, "text": "x", "label": k < 3}
                for k in range(6)]
        sheet.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        assert run_cli("filter", "--labels", sheet, "--out", tmp_path / "rep.json") == 0
        rep = json.loads((tmp_path / "rep.json").read_text())
        assert rep[0]["precision"] == 1.0

    def test_topic_cuts_cli(self, tmp_path):
        meta = tmp_path / "meta.jsonl"
        meta.write_text('{"timestamp_s": 0, "label": "a"}\n{"timestamp_s": 60, "label": "b"}\n')
        out = tmp_path / "cuts.jsonl"
        assert run_cli("topic-cuts", "--meta", meta, "--duration-s", 120, "--out", out) == 0
        cuts = [json.loads(l) for l in out.read_text().splitlines()]
        assert cuts[1]["start_s"] == 60 and cuts[1]["end_s"] == 120
