"""Monotone sentence alignment of source and target embeddings.

The aligner segments two sentence sequences into 1-1, 1-many, many-1 (up to
``max_merge``), insertion and deletion pairs, minimizing a cosine-distance
cost normalized by a seeded random-pair baseline. Long documents are solved
coarse-to-fine: embeddings are 2x-downsampled until the problem fits
``base_size``, the coarsest level is solved exactly, and each finer level
refines inside a band of ``window`` cells around the upsampled path. With a
band covering the whole matrix the result equals exhaustive DP exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import read_embeddings
from .errors import DimError, EmptyInputError, FormatError, MissingEmbeddingError

INF = float("inf")

#: Alignment-score threshold above which pairs are discarded (kept if <=).
DEFAULT_SCORE_THRESHOLD = 0.627


class EmbeddingSet:
    """Sentence embeddings plus optional precomputed merged-span rows.

    ``index`` maps (start, merge_len) to a row; single sentences must all be
    present. Rows are L2-normalized (checked to 1e-4). Missing merged spans
    fall back to the normalized mean of their constituents when
    ``allow_mean_fallback`` is set.
    """

    def __init__(self, rows: np.ndarray, index: dict[tuple[int, int], int],
                 n_sentences: int, allow_mean_fallback: bool = True):
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise FormatError("embedding rows must be non-empty 2-D")
        norms = np.linalg.norm(rows, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-4):
            bad = int(np.argmax(np.abs(norms - 1.0)))
            raise FormatError(f"embedding row {bad} not L2-normalized (|v|={norms[bad]:.6f})")
        for i in range(n_sentences):
            if (i, 1) not in index:
                raise FormatError(f"missing single-sentence embedding for sentence {i}")
        self.rows = rows
        self.index = dict(index)
        self.n_sentences = n_sentences
        self.allow_mean_fallback = allow_mean_fallback
        self._singles = rows[[index[(i, 1)] for i in range(n_sentences)]]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @property
    def singles(self) -> np.ndarray:
        return self._singles

    @classmethod
    def from_vectors(cls, vectors: np.ndarray, allow_mean_fallback: bool = True) -> "EmbeddingSet":
        vectors = np.asarray(vectors, dtype=np.float64)
        vectors = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
        index = {(i, 1): i for i in range(vectors.shape[0])}
        return cls(vectors, index, vectors.shape[0], allow_mean_fallback)

    @classmethod
    def from_file(cls, path, allow_mean_fallback: bool = True) -> "EmbeddingSet":
        rows, sidecar = read_embeddings(path)
        if not sidecar:
            return cls.from_vectors(rows, allow_mean_fallback)
        index = {}
        n = 0
        for row, entry in enumerate(sidecar):
            start = int(entry["merge_start"])
            ln = int(entry["merge_len"])
            index[(start, ln)] = row
            if ln == 1:
                n = max(n, start + 1)
        return cls(rows, index, n, allow_mean_fallback)

    def span_vec(self, start: int, length: int) -> np.ndarray:
        row = self.index.get((start, length))
        if row is not None:
            return self.rows[row]
        if not self.allow_mean_fallback:
            raise MissingEmbeddingError(f"no embedding for span ({start}, {length})")
        v = self._singles[start:start + length].mean(axis=0)
        n = np.linalg.norm(v)
        return v / n if n > 0 else v


@dataclass
class AlignmentPair:
    """One alignment decision; an empty side (len 0) marks insertion/deletion."""

    src_start: int
    src_len: int
    tgt_start: int
    tgt_len: int
    cost: float

    def to_dict(self) -> dict:
        return {
            "src_start": self.src_start,
            "src_len": self.src_len,
            "tgt_start": self.tgt_start,
            "tgt_len": self.tgt_len,
            "cost": self.cost,
        }


@dataclass
class AlignParams:
    max_merge: int = 4
    window: int = 10
    base_size: int = 128
    penalty_ins: float = 0.8
    penalty_del: float = 0.8
    seed: int = 0


def _moves(max_merge: int) -> list[tuple[int, int]]:
    # order doubles as the deterministic tie-break: substitutions first,
    # then deletion (src-only), then insertion (tgt-only)
    moves = [(1, 1)]
    moves += [(1, b) for b in range(2, max_merge + 1)]
    moves += [(a, 1) for a in range(2, max_merge + 1)]
    moves += [(1, 0), (0, 1)]
    return moves


def _normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.divide(v, n, out=np.array(v, dtype=np.float64), where=n > 0)


def _span_arrays_from_vecs(vecs: np.ndarray, max_merge: int) -> list[np.ndarray | None]:
    """spans[a][s] = normalized mean of vecs[s:s+a]; spans[1] is vecs."""
    n = vecs.shape[0]
    csum = np.concatenate([np.zeros((1, vecs.shape[1])), np.cumsum(vecs, axis=0)])
    spans: list[np.ndarray | None] = [None]
    for a in range(1, max_merge + 1):
        if n - a + 1 <= 0:
            spans.append(None)
            continue
        means = (csum[a:] - csum[:-a]) / a
        spans.append(_normalize(means) if a > 1 else np.asarray(vecs, dtype=np.float64))
    return spans


def _span_arrays_from_set(eset: EmbeddingSet, max_merge: int) -> list[np.ndarray | None]:
    n = eset.n_sentences
    spans: list[np.ndarray | None] = [None]
    for a in range(1, max_merge + 1):
        if n - a + 1 <= 0:
            spans.append(None)
            continue
        arr = np.empty((n - a + 1, eset.dim))
        for s in range(n - a + 1):
            arr[s] = eset.span_vec(s, a)
        spans.append(arr)
    return spans


class _Level:
    """Vectorized span-cost evaluator for one resolution level."""

    def __init__(self, src_spans, tgt_spans, baseline, params: AlignParams):
        self.src_spans = src_spans
        self.tgt_spans = tgt_spans
        self.baseline = baseline
        self.p = params

    def cost_row(self, a: int, b: int, i: int, j_first: int, j_last: int) -> np.ndarray:
        """Costs of pairing src[i-a:i] with tgt[j-b:j] for j in [j_first, j_last]."""
        vs = self.src_spans[a][i - a]
        tgt = self.tgt_spans[b][j_first - b:j_last - b + 1]
        dist = (1.0 - tgt @ vs) / self.baseline
        return dist + (a - 1) * self.p.penalty_del + (b - 1) * self.p.penalty_ins


def _dp(level: _Level, n: int, m: int, moves, params: AlignParams, band=None):
    """Row-vectorized forward DP over (n+1) x (m+1) cells.

    ``band[i]`` is the inclusive j-interval allowed in row i (None = full).
    Insertions have an intra-row dependency and are folded in with a
    prefix-min scan. Returns total cost and the backtraced move path.
    """
    pins = params.penalty_ins
    pdel = params.penalty_del
    sub_moves = moves[:-1]  # all but the insertion move
    ins_code = len(moves) - 1
    D = np.full((n + 1, m + 1), INF)
    bt = np.full((n + 1, m + 1), -1, dtype=np.int8)

    for i in range(n + 1):
        jlo, jhi = (0, m) if band is None else band[i]
        width = jhi - jlo + 1
        cand = np.full((len(sub_moves), width), INF)
        for k, (a, b) in enumerate(sub_moves):
            if i - a < 0 or (a > 1 and level.src_spans[a] is None) or (
                b > 1 and level.tgt_spans[b] is None
            ):
                continue
            j_first = max(jlo, b)
            if j_first > jhi:
                continue
            off = j_first - jlo
            prev = D[i - a, j_first - b:jhi - b + 1]
            if b == 0:
                cand[k, off:] = prev + pdel
            else:
                cand[k, off:] = prev + level.cost_row(a, b, i, j_first, jhi)
        base = cand.min(axis=0)
        base_code = cand.argmin(axis=0)
        if i == 0 and jlo == 0:
            base[0] = 0.0
            base_code[0] = -1
        # fold insertion chains: D[i,j] = min(base[j], min_{k<j} base[k] + (j-k)*pins)
        g = base - pins * np.arange(width)
        run = np.minimum.accumulate(g)
        chain = np.concatenate(([INF], run[:-1])) + pins * np.arange(width)
        use_chain = chain < base
        D[i, jlo:jhi + 1] = np.where(use_chain, chain, base)
        codes = np.where(use_chain, ins_code, base_code).astype(np.int8)
        codes[np.isinf(D[i, jlo:jhi + 1])] = -1
        bt[i, jlo:jhi + 1] = codes

    if not np.isfinite(D[n, m]):
        raise EmptyInputError("alignment DP found no path")
    path = []
    i, j = n, m
    while i > 0 or j > 0:
        code = bt[i, j]
        a, b = moves[code]
        path.append((i - a, j - b, a, b, float(D[i, j] - D[i - a, j - b])))
        i, j = i - a, j - b
    path.reverse()
    return float(D[n, m]), path


def _downsample(vecs: np.ndarray) -> np.ndarray:
    n = vecs.shape[0]
    half = (n + 1) // 2
    out = np.empty((half, vecs.shape[1]))
    for i in range(half):
        out[i] = vecs[2 * i:2 * i + 2].mean(axis=0)
    return _normalize(out)


def _band_from_path(path, n, m, window):
    """Per-row inclusive j-intervals around the 2x-upsampled coarse path."""
    lo = np.full(n + 1, m, dtype=np.int64)
    hi = np.zeros(n + 1, dtype=np.int64)

    def mark(i, j):
        i = min(i, n)
        j = min(j, m)
        lo[i] = min(lo[i], j)
        hi[i] = max(hi[i], j)

    mark(0, 0)
    for (pi, pj, a, b, _c) in path:
        for di in range(2 * a + 1):
            for dj in range(2 * b + 1):
                mark(2 * pi + di, 2 * pj + dj)
    mark(n, m)
    cur_lo, cur_hi = 0, 0
    for i in range(n + 1):
        if lo[i] > hi[i]:  # row untouched by the upsampled path
            lo[i], hi[i] = cur_lo, cur_hi
        cur_lo, cur_hi = lo[i], hi[i]
    lo = np.maximum(lo - window, 0)
    hi = np.minimum(hi + window, m)
    hi = np.maximum.accumulate(hi)
    for i in range(n - 1, -1, -1):
        lo[i] = min(lo[i], lo[i + 1])
    return [(int(lo[i]), int(hi[i])) for i in range(n + 1)]


def align_sentences(src_emb: EmbeddingSet, tgt_emb: EmbeddingSet,
                    params: AlignParams | None = None) -> list[AlignmentPair]:
    """Monotone, exhaustive segmentation of two sentence sequences.

    Substitution pairs cost ``(1 - cos)/baseline`` plus per-extra-sentence
    merge penalties; pure insertions/deletions cost their configured
    penalty. The baseline is the mean cosine distance over ``min(500, n*m)``
    seeded random cross pairs, so costs are comparable across documents.
    """
    params = params or AlignParams()
    if src_emb.n_sentences == 0 or tgt_emb.n_sentences == 0:
        raise EmptyInputError("both documents need at least one sentence")
    if src_emb.dim != tgt_emb.dim:
        raise DimError(f"embedding dims differ: {src_emb.dim} vs {tgt_emb.dim}")
    if params.max_merge < 1:
        raise FormatError("max_merge must be >= 1")

    n, m = src_emb.n_sentences, tgt_emb.n_sentences
    rng = np.random.default_rng(params.seed)
    B = min(500, n * m)
    si = rng.integers(0, n, B)
    tj = rng.integers(0, m, B)
    baseline = float(np.mean(1.0 - np.einsum("ij,ij->i", src_emb.singles[si], tgt_emb.singles[tj])))
    baseline = max(baseline, 1e-6)

    moves = _moves(params.max_merge)

    src_levels = [src_emb.singles]
    tgt_levels = [tgt_emb.singles]
    while max(src_levels[-1].shape[0], tgt_levels[-1].shape[0]) > params.base_size:
        src_levels.append(_downsample(src_levels[-1]))
        tgt_levels.append(_downsample(tgt_levels[-1]))

    def level_for(li):
        if li == 0:
            return _Level(
                _span_arrays_from_set(src_emb, params.max_merge),
                _span_arrays_from_set(tgt_emb, params.max_merge),
                baseline, params,
            )
        return _Level(
            _span_arrays_from_vecs(src_levels[li], params.max_merge),
            _span_arrays_from_vecs(tgt_levels[li], params.max_merge),
            baseline, params,
        )

    top = len(src_levels) - 1
    _, path = _dp(level_for(top), src_levels[top].shape[0], tgt_levels[top].shape[0], moves, params)
    for li in range(top - 1, -1, -1):
        nl, ml = src_levels[li].shape[0], tgt_levels[li].shape[0]
        band = _band_from_path(path, nl, ml, params.window)
        _, path = _dp(level_for(li), nl, ml, moves, params, band)

    return [AlignmentPair(pi, a, pj, b, c) for (pi, pj, a, b, c) in path]


def filter_alignments(pairs: Sequence[AlignmentPair],
                      threshold: float = DEFAULT_SCORE_THRESHOLD):
    """Partition pairs into (kept, dropped) by cost; boundary cost is kept."""
    kept = [p for p in pairs if p.cost <= threshold]
    dropped = [p for p in pairs if not (p.cost <= threshold)]
    return kept, dropped
