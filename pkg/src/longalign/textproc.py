"""Transcript preprocessing: speaker turns, sentence splitting, tokenization.

The tokenizer implements the character-level policy used throughout the
toolkit: every CJK codepoint is its own token, while code-mixed Latin words
and numbers stay whole (maximal ``[A-Za-z0-9'-]`` runs). Speaker turns are
recovered from ``NAME:`` style marker lines; the bold-face cue available in
the original documents does not survive plain-text extraction, so a textual
pattern stands in for it.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import NoSpeakerMarkersError

DEFAULT_MARKER = re.compile(r"^(\S{1,12})[:：]")
DEFAULT_TERMINATORS = frozenset("。！？；.!?;")
#: Closing quotes/brackets that stay attached to the preceding sentence.
_TRAILING_CLOSERS = frozenset("」』”’\"')]}》〉】）")

_WORD_CHARS = frozenset(
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789'-"
)


@dataclass
class SpeakerTurn:
    speaker_id: str
    text: str
    order: int


@dataclass
class Sentence:
    sent_id: str
    turn_ref: int | None
    text: str
    tokens: list[str]


@dataclass
class SentenceDoc:
    """A transcript as speaker turns flattened into ordered sentences."""

    doc_id: str
    turns: list[SpeakerTurn]
    sentences: list[Sentence]

    def speaker_of(self, sentence: Sentence) -> str:
        if sentence.turn_ref is None:
            return "unknown"
        return self.turns[sentence.turn_ref].speaker_id

    def all_tokens(self) -> list[str]:
        out: list[str] = []
        for s in self.sentences:
            out.extend(s.tokens)
        return out

    def sentence_token_offsets(self) -> list[tuple[int, int]]:
        """Half-open token span of each sentence in the concatenated stream."""
        spans = []
        pos = 0
        for s in self.sentences:
            spans.append((pos, pos + len(s.tokens)))
            pos += len(s.tokens)
        return spans


@dataclass
class TurnExtraction:
    turns: list[SpeakerTurn]
    dropped_lines: int


def extract_speaker_turns(raw_text: str, marker_pattern=DEFAULT_MARKER) -> TurnExtraction:
    """Split a plain-text transcript into speaker turns.

    A line matching ``marker_pattern`` opens a new turn named after the
    matched speaker; following lines accumulate into the current turn. Lines
    before the first marker are dropped and counted. Raises
    :class:`NoSpeakerMarkersError` when no line matches.
    """
    if isinstance(marker_pattern, str):
        marker_pattern = re.compile(marker_pattern)
    turns: list[SpeakerTurn] = []
    dropped = 0
    cur_name = None
    cur_lines: list[str] = []

    def flush():
        if cur_name is not None:
            turns.append(SpeakerTurn(cur_name, "\n".join(cur_lines), len(turns)))

    for line in raw_text.splitlines():
        m = marker_pattern.match(line)
        if m:
            flush()
            cur_name = m.group(1)
            rest = line[m.end():]
            cur_lines = [rest.lstrip(" \t")] if rest.strip() else []
        elif cur_name is None:
            if line.strip():
                dropped += 1
        else:
            cur_lines.append(line)
    flush()
    if not turns:
        raise NoSpeakerMarkersError("no speaker marker matched any line")
    return TurnExtraction(turns, dropped)


def split_sentences(
    text: str,
    terminators: frozenset | set | str = DEFAULT_TERMINATORS,
    turn_ref: int | None = None,
    id_prefix: str = "s",
    start_index: int = 0,
) -> list[Sentence]:
    """Partition text into sentences at terminator punctuation.

    Trailing closing quotes/brackets after a terminator stay with the
    preceding sentence. Whitespace-only fragments are dropped. Each sentence
    is tokenized with :func:`tokenize`.
    """
    terminators = frozenset(terminators)
    pieces: list[str] = []
    buf: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        buf.append(ch)
        if ch in terminators:
            j = i + 1
            while j < n and text[j] in _TRAILING_CLOSERS:
                buf.append(text[j])
                j += 1
            pieces.append("".join(buf))
            buf = []
            i = j
        else:
            i += 1
    if buf:
        pieces.append("".join(buf))

    sentences = []
    k = start_index
    for piece in pieces:
        if not piece.strip():
            continue
        toks = tokenize(piece)
        if not toks:
            continue
        sentences.append(Sentence(f"{id_prefix}{k:05d}", turn_ref, piece, toks))
        k += 1
    return sentences


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return (
        0x4E00 <= cp <= 0x9FFF
        or 0x3400 <= cp <= 0x4DBF
        or 0xF900 <= cp <= 0xFAFF
        or 0x20000 <= cp <= 0x2A6DF
    )


def tokenize(text: str) -> list[str]:
    """Character tokenization with code-mixed words kept whole.

    CJK codepoints are single tokens; maximal runs of ``[A-Za-z0-9'-]`` form
    one token (English words, numbers); whitespace is discarded; any other
    character is a token by itself.
    """
    tokens: list[str] = []
    run: list[str] = []
    for ch in text:
        if ch in _WORD_CHARS:
            run.append(ch)
            continue
        if run:
            tokens.append("".join(run))
            run = []
        if ch.isspace():
            continue
        tokens.append(ch)
    if run:
        tokens.append("".join(run))
    return tokens


class PronLexicon:
    """Token to romanized-syllable mapping (e.g. jyutping).

    One pronunciation per token: the first listed wins. File format is TSV,
    ``token<TAB>syl1 syl2 ...``.
    """

    def __init__(self, entries: dict[str, list[str]] | None = None):
        self._map: dict[str, list[str]] = {}
        for tok, syls in (entries or {}).items():
            self.add(tok, syls)

    def add(self, token: str, syllables: Sequence[str]) -> None:
        if token not in self._map:
            self._map[token] = list(syllables)

    def lookup(self, token: str) -> list[str] | None:
        return self._map.get(token)

    def __len__(self) -> int:
        return len(self._map)

    def __contains__(self, token: str) -> bool:
        return token in self._map

    def unmapped(self, tokens: Iterable[str]) -> set[str]:
        return {t for t in tokens if t not in self._map}

    @classmethod
    def from_file(cls, path) -> "PronLexicon":
        lex = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.rstrip()
            if not line or line.startswith("#"):
                continue
            tok, _, syls = line.partition("\t")
            lex.add(tok, syls.split())
        return lex

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for tok in self._map:
                f.write(f"{tok}\t{' '.join(self._map[tok])}\n")


def romanize(tokens: Sequence[str], lexicon: PronLexicon) -> tuple[list[str], int]:
    """Replace mapped tokens by their syllables; pass unmapped through.

    Returns the romanized stream and the count of unmapped tokens. One input
    token may expand to several syllables, so the output is never shorter
    than the input.
    """
    out: list[str] = []
    unmapped = 0
    for tok in tokens:
        syls = lexicon.lookup(tok)
        if syls is None:
            out.append(tok)
            unmapped += 1
        else:
            out.extend(syls)
    return out, unmapped


def doc_from_text(
    raw_text: str,
    doc_id: str,
    marker_pattern=DEFAULT_MARKER,
    terminators=DEFAULT_TERMINATORS,
    with_markers: bool = True,
) -> SentenceDoc:
    """Parse a transcript into a SentenceDoc (turns, then sentences)."""
    if with_markers:
        extraction = extract_speaker_turns(raw_text, marker_pattern)
        turns = extraction.turns
    else:
        turns = [SpeakerTurn("unknown", raw_text, 0)]
    sentences: list[Sentence] = []
    for turn in turns:
        sentences.extend(
            split_sentences(
                turn.text,
                terminators,
                turn_ref=turn.order,
                id_prefix=f"{doc_id}_s",
                start_index=len(sentences),
            )
        )
    return SentenceDoc(doc_id, turns, sentences)


def write_sentence_doc(doc: SentenceDoc, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s in doc.sentences:
            row = {
                "sent_id": s.sent_id,
                "doc_id": doc.doc_id,
                "turn": s.turn_ref,
                "speaker_id": doc.speaker_of(s),
                "text": s.text,
                "tokens": s.tokens,
            }
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_sentence_doc(path, doc_id: str | None = None) -> SentenceDoc:
    sentences: list[Sentence] = []
    turn_names: dict[int, str] = {}
    doc = doc_id
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        doc = doc or d.get("doc_id", "doc")
        ref = d.get("turn")
        sentences.append(Sentence(d["sent_id"], ref, d["text"], list(d["tokens"])))
        if ref is not None:
            turn_names.setdefault(ref, d.get("speaker_id", "unknown"))
    n_turns = (max(turn_names) + 1) if turn_names else 0
    turns = [SpeakerTurn(turn_names.get(i, "unknown"), "", i) for i in range(n_turns)]
    return SentenceDoc(doc or "doc", turns, sentences)
