"""Shared domain types and bit-exact interchange formats.

Everything downstream consumes these types: the token vocabulary, frame-level
log-posterior matrices (the toolkit's stand-in for audio), weighted FSAs, and
the JSONL utterance manifest. Binary formats are little-endian float32 with a
fixed ASCII magic and header so round-trips are bit-identical across
implementations:

* posterior file: ``LPOST1\\n``, header ``V=<int> T=<int> HOP_MS=<int>\\n``,
  then T x V float32 row-major natural-log probabilities;
* embedding file: ``LEMB1\\n``, header ``N=<int> D=<int>\\n``, then N x D
  float32, with a sidecar JSONL index mapping each row to
  ``{sent_id, merge_start, merge_len}``;
* vocab file: UTF-8, one token per line, line number = token id;
* manifest: JSONL, one utterance row per line.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyCorpusError, FormatError, NormalizationError

BLANK = "<blk>"
UNK = "<unk>"
BLANK_ID = 0
UNK_ID = 1

#: FSA arc label meaning "consume no token".
EPSILON = -1

_POST_MAGIC = b"LPOST1\n"
_EMB_MAGIC = b"LEMB1\n"

ROW_NORM_TOL = 1e-3


def logsumexp(row: np.ndarray) -> float:
    m = float(np.max(row))
    if m == -np.inf:
        return -math.inf
    return m + math.log(float(np.sum(np.exp(row - m))))


class Vocab:
    """Ordered token inventory with reserved blank and unknown entries.

    Index 0 is always ``<blk>``, index 1 always ``<unk>``. Lookup is total:
    unseen strings map to ``<unk>``.
    """

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if len(tokens) < 2 or tokens[0] != BLANK or tokens[1] != UNK:
            raise FormatError(f"vocab must start with {BLANK}, {UNK}")
        if len(set(tokens)) != len(tokens):
            raise FormatError("vocab contains duplicate tokens")
        self.tokens = tokens
        self._index = {tok: i for i, tok in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.tokens == other.tokens

    def id(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def token(self, token_id: int) -> str:
        return self.tokens[token_id]

    def ids(self, tokens: Iterable[str]) -> list[int]:
        idx = self._index
        return [idx.get(t, UNK_ID) for t in tokens]

    def to_file(self, path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def from_file(cls, path) -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(lines)


def build_vocab(corpus_files: Sequence, tokenizer=None) -> Vocab:
    """Build a vocabulary from tokenized corpus files.

    Tokens are ordered by descending frequency, ties broken lexicographically,
    after the two reserved entries. ``corpus_files`` may be file paths or
    pre-tokenized lists; paths are read as UTF-8 text and run through
    ``tokenizer`` (default: the character/code-mix policy in
    :mod:`longalign.textproc`).
    """
    if tokenizer is None:
        from .textproc import tokenize as tokenizer
    counts: Counter[str] = Counter()
    for item in corpus_files:
        if isinstance(item, (str, Path)):
            counts.update(tokenizer(Path(item).read_text(encoding="utf-8")))
        else:
            counts.update(item)
    counts.pop(BLANK, None)
    counts.pop(UNK, None)
    if not counts:
        raise EmptyCorpusError("no tokens in corpus")
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocab([BLANK, UNK] + [tok for tok, _ in ordered])


class PosteriorMatrix:
    """Frame-synchronous natural-log probability matrix over a vocabulary.

    Rows are distributions: ``|logsumexp(row)| <= 1e-3``. Immutable after
    construction; the array is stored float32 so file round-trips are
    bit-exact.
    """

    __slots__ = ("hop_ms", "logp")

    def __init__(self, hop_ms: int, logp: np.ndarray, validate: bool = True):
        logp = np.asarray(logp, dtype=np.float32)
        if logp.ndim != 2 or logp.shape[0] < 1:
            raise FormatError("posterior matrix must be 2-D with T >= 1")
        self.hop_ms = int(hop_ms)
        self.logp = logp
        self.logp.setflags(write=False)
        if validate:
            self.validate_rows()

    @property
    def frames(self) -> int:
        return self.logp.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.logp.shape[1]

    def validate_rows(self) -> None:
        logp64 = self.logp.astype(np.float64)
        m = np.max(logp64, axis=1)
        finite = m > -np.inf
        sums = np.full(len(m), -np.inf)
        if np.any(finite):
            shifted = np.exp(logp64[finite] - m[finite, None])
            sums[finite] = m[finite] + np.log(np.sum(shifted, axis=1))
        bad = np.nonzero(~(np.abs(sums) <= ROW_NORM_TOL))[0]
        if len(bad):
            row = int(bad[0])
            raise NormalizationError(row, float(sums[row]))

    def slice_frames(self, start: int, stop: int) -> "PosteriorMatrix":
        return PosteriorMatrix(self.hop_ms, self.logp[start:stop], validate=False)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PosteriorMatrix)
            and self.hop_ms == other.hop_ms
            and self.logp.shape == other.logp.shape
            and bool(np.all(self.logp.view(np.uint32) == other.logp.view(np.uint32)))
        )


def write_posteriors(matrix: PosteriorMatrix, path) -> None:
    with open(path, "wb") as f:
        f.write(_POST_MAGIC)
        f.write(f"V={matrix.vocab_size} T={matrix.frames} HOP_MS={matrix.hop_ms}\n".encode("ascii"))
        f.write(np.ascontiguousarray(matrix.logp, dtype="<f4").tobytes())


def read_posteriors(path) -> PosteriorMatrix:
    with open(path, "rb") as f:
        magic = f.read(len(_POST_MAGIC))
        if magic != _POST_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        header = f.readline().decode("ascii", errors="replace").strip()
        fields = dict(kv.split("=", 1) for kv in header.split())
        try:
            v, t, hop = int(fields["V"]), int(fields["T"]), int(fields["HOP_MS"])
        except (KeyError, ValueError) as e:
            raise FormatError(f"{path}: bad header {header!r}") from e
        data = np.frombuffer(f.read(4 * v * t), dtype="<f4")
        if data.size != v * t:
            raise FormatError(f"{path}: truncated payload")
    return PosteriorMatrix(hop, data.reshape(t, v))


def write_embeddings(rows: np.ndarray, index: Sequence[dict], path) -> None:
    """Write an N x D float32 embedding file plus its sidecar index.

    ``index[i]`` describes row i as {sent_id, merge_start, merge_len}. The
    sidecar lives at ``<path>.idx.jsonl``.
    """
    rows = np.asarray(rows, dtype="<f4")
    if rows.ndim != 2:
        raise FormatError("embedding rows must be 2-D")
    if len(index) != rows.shape[0]:
        raise FormatError("index length does not match row count")
    with open(path, "wb") as f:
        f.write(_EMB_MAGIC)
        f.write(f"N={rows.shape[0]} D={rows.shape[1]}\n".encode("ascii"))
        f.write(np.ascontiguousarray(rows).tobytes())
    with open(str(path) + ".idx.jsonl", "w", encoding="utf-8") as f:
        for entry in index:
            f.write(json.dumps(entry, ensure_ascii=False) + "\n")


def read_embeddings(path) -> tuple[np.ndarray, list[dict]]:
    with open(path, "rb") as f:
        magic = f.read(len(_EMB_MAGIC))
        if magic != _EMB_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        header = f.readline().decode("ascii", errors="replace").strip()
        fields = dict(kv.split("=", 1) for kv in header.split())
        try:
            n, d = int(fields["N"]), int(fields["D"])
        except (KeyError, ValueError) as e:
            raise FormatError(f"{path}: bad header {header!r}") from e
        data = np.frombuffer(f.read(4 * n * d), dtype="<f4")
        if data.size != n * d:
            raise FormatError(f"{path}: truncated payload")
    sidecar = Path(str(path) + ".idx.jsonl")
    index = []
    if sidecar.exists():
        for line in sidecar.read_text(encoding="utf-8").splitlines():
            if line.strip():
                index.append(json.loads(line))
    return data.reshape(n, d), index


@dataclass(frozen=True)
class Arc:
    src: int
    dst: int
    label: int  # token id, or EPSILON
    weight: float


@dataclass
class Fsa:
    """Weighted finite-state acceptor.

    Weights are additive natural-log scores (higher is better; costs are
    typically <= 0). ``final_states`` maps state -> final weight.
    """

    num_states: int
    start_state: int
    arcs: list[Arc]
    final_states: dict[int, float]

    def validate(self, vocab_size: int | None = None) -> None:
        if not (0 <= self.start_state < self.num_states):
            raise FormatError("start state out of range")
        if not self.final_states:
            raise FormatError("FSA needs at least one final state")
        for s in self.final_states:
            if not (0 <= s < self.num_states):
                raise FormatError(f"final state {s} out of range")
        for a in self.arcs:
            if not (0 <= a.src < self.num_states and 0 <= a.dst < self.num_states):
                raise FormatError(f"arc {a} out of range")
            if a.label != EPSILON:
                if a.label < 0 or (vocab_size is not None and a.label >= vocab_size):
                    raise FormatError(f"arc label {a.label} out of range")

    def arcs_from(self, state: int) -> list[Arc]:
        return [a for a in self.arcs if a.src == state]


GENDERS = ("M", "F", "U")


@dataclass
class UtteranceManifestRow:
    """One aligned triplet: an audio span with source text and translation."""

    utt_id: str
    doc_id: str
    speaker_id: str
    gender: str
    duration_s: float
    start_s: float
    end_s: float
    text_src: str
    text_tgt: str
    quality: dict | None = None

    def validate(self) -> None:
        if not (self.utt_id and self.doc_id and self.speaker_id):
            raise FormatError(f"manifest row {self.utt_id!r}: empty id field")
        if self.gender not in GENDERS:
            raise FormatError(f"manifest row {self.utt_id}: bad gender {self.gender!r}")
        if not self.end_s > self.start_s:
            raise FormatError(f"manifest row {self.utt_id}: end_s <= start_s")
        if abs(self.duration_s - (self.end_s - self.start_s)) > 1e-3:
            raise FormatError(f"manifest row {self.utt_id}: duration mismatch")

    def to_json(self) -> str:
        d = {
            "utt_id": self.utt_id,
            "doc_id": self.doc_id,
            "speaker_id": self.speaker_id,
            "gender": self.gender,
            "duration_s": round(self.duration_s, 6),
            "start_s": round(self.start_s, 6),
            "end_s": round(self.end_s, 6),
            "text_src": self.text_src,
            "text_tgt": self.text_tgt,
        }
        if self.quality is not None:
            d["quality"] = self.quality
        return json.dumps(d, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "UtteranceManifestRow":
        d = json.loads(line)
        return cls(
            utt_id=d["utt_id"],
            doc_id=d["doc_id"],
            speaker_id=d["speaker_id"],
            gender=d["gender"],
            duration_s=float(d["duration_s"]),
            start_s=float(d["start_s"]),
            end_s=float(d["end_s"]),
            text_src=d.get("text_src", ""),
            text_tgt=d.get("text_tgt", ""),
            quality=d.get("quality"),
        )


def write_manifest(rows: Iterable[UtteranceManifestRow], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(row.to_json() + "\n")


def read_manifest(path, validate: bool = True) -> list[UtteranceManifestRow]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        row = UtteranceManifestRow.from_json(line)
        if validate:
            row.validate()
        rows.append(row)
    return rows


@dataclass
class AlignedSegment:
    """A sentence-level triplet candidate before manifest emission.

    Frame spans are half-open ``[start_frame, end_frame)`` at ``hop_ms``
    resolution. ``sent_ids`` lists the source sentences merged into this
    segment (one entry for 1-1 pairs).
    """

    utt_id: str
    doc_id: str
    speaker_id: str
    sent_ids: list[str]
    start_frame: int
    end_frame: int
    hop_ms: int
    text_src: str
    text_tgt: str
    tokens_src: list[str] = field(default_factory=list)
    hyp_tokens: list[str] = field(default_factory=list)

    @property
    def start_s(self) -> float:
        return self.start_frame * self.hop_ms / 1000.0

    @property
    def end_s(self) -> float:
        return self.end_frame * self.hop_ms / 1000.0
