"""First-pass paragraph alignment via edit-distance anchors.

Concatenated decode hypotheses are globally aligned against the full
transcript token stream; contiguous well-matched regions become anchors,
whose hypothesis tokens carry frame times, pinning transcript regions to
audio regions. Anchor boundaries are widened by a few tokens to absorb
decoding errors before the regions are handed to flexible alignment as
per-window sentence candidates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import PosteriorMatrix, Vocab
from .errors import MissingTimingError, NoPathError
from .lm import NgramLM, interpolate, lm_to_fsa, train_ngram
from .textproc import SentenceDoc

log = logging.getLogger(__name__)

MATCH, SUB, DEL, INS = "match", "sub", "del", "ins"


@dataclass
class EditOp:
    """One global-alignment step, read as edits from hypothesis to reference.

    ``del`` consumes a hypothesis token the reference lacks; ``ins`` consumes
    a reference token missing from the hypothesis. ``hyp_index`` advances on
    match/sub/del, ``ref_index`` on match/sub/ins; the index is None on the
    side an op does not consume.
    """

    kind: str
    hyp_index: int | None
    ref_index: int | None


@dataclass
class EditCosts:
    sub: float = 1.0
    ins: float = 1.0
    delete: float = 1.0


def align_text(hyp: Sequence, ref: Sequence, costs: EditCosts | None = None) -> list[EditOp]:
    """Minimal-cost global edit alignment of two token sequences.

    Backtrace tie-break prefers match > sub > del > ins. Memory is
    O(len(hyp) * len(ref)).
    """
    costs = costs or EditCosts()
    n, m = len(hyp), len(ref)
    ref_arr = np.asarray(list(ref)) if m else np.zeros(0)
    D = np.empty((n + 1, m + 1))
    D[0, :] = costs.ins * np.arange(m + 1)   # ref-only prefix: insertions
    D[:, 0] = costs.delete * np.arange(n + 1)  # hyp-only prefix: deletions
    ins_steps = costs.ins * np.arange(m + 1)
    for i in range(1, n + 1):
        eq = ref_arr == hyp[i - 1] if m else np.zeros(0, bool)
        diag = D[i - 1, :-1] + np.where(eq, 0.0, costs.sub)
        up = D[i - 1, 1:] + costs.delete
        base = np.minimum(diag, up)
        # fold left-moving insertions with a prefix-min scan
        g = np.concatenate(([D[i, 0]], base)) - ins_steps
        run = np.minimum.accumulate(g)
        D[i, 1:] = np.minimum(base, run[:-1] + ins_steps[1:])

    ops: list[EditOp] = []
    i, j = n, m
    tol = 1e-9
    while i > 0 or j > 0:
        here = D[i, j]
        if i > 0 and j > 0 and hyp[i - 1] == ref[j - 1] and abs(here - D[i - 1, j - 1]) <= tol:
            ops.append(EditOp(MATCH, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and abs(here - (D[i - 1, j - 1] + costs.sub)) <= tol:
            ops.append(EditOp(SUB, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and abs(here - (D[i - 1, j] + costs.delete)) <= tol:
            ops.append(EditOp(DEL, i - 1, None))
            i -= 1
        else:
            ops.append(EditOp(INS, None, j - 1))
            j -= 1
    ops.reverse()
    return ops


def edit_cost(ops: Sequence[EditOp], costs: EditCosts | None = None) -> float:
    costs = costs or EditCosts()
    per = {MATCH: 0.0, SUB: costs.sub, DEL: costs.delete, INS: costs.ins}
    return sum(per[op.kind] for op in ops)


@dataclass
class AnchorCriteria:
    max_cer: float = 0.2
    max_consec: int = 4
    max_abs: int = 8
    min_len: int = 6


@dataclass
class Anchor:
    """A contiguous op region that aligns hypothesis to reference reliably."""

    op_span: tuple[int, int]
    hyp_span: tuple[int, int]
    ref_span: tuple[int, int]
    stats: dict


def _op_prefixes(ops: Sequence[EditOp]):
    n = len(ops)
    err = np.zeros(n + 1, dtype=np.int64)
    refc = np.zeros(n + 1, dtype=np.int64)
    hypc = np.zeros(n + 1, dtype=np.int64)
    run = np.zeros(n, dtype=np.int64)  # error-run length ending at each op
    r = 0
    for k, op in enumerate(ops):
        is_err = op.kind != MATCH
        err[k + 1] = err[k] + is_err
        refc[k + 1] = refc[k] + (op.ref_index is not None)
        hypc[k + 1] = hypc[k] + (op.hyp_index is not None)
        r = r + 1 if is_err else 0
        run[k] = r
    return err, refc, hypc, run


def find_anchors(ops: Sequence[EditOp], criteria: AnchorCriteria | None = None) -> list[Anchor]:
    """Maximal valid op regions, selected left-to-right without overlap.

    A region [i, j) is valid when its length is >= min_len, it starts and
    ends on a match (so both boundaries pin hypothesis frames to reference
    tokens), and its error statistics (CER over the region's reference
    tokens, longest error run, absolute errors) stay within the criteria.
    Candidates are containment-maximal, so growing any anchor by one op
    breaks a criterion.
    """
    criteria = criteria or AnchorCriteria()
    n = len(ops)
    if n == 0:
        return []
    err, refc, hypc, run = _op_prefixes(ops)
    is_match = np.array([op.kind == MATCH for op in ops], dtype=bool)

    # hard bounds on how far a region starting at i may extend:
    # past max_abs total errors, or past a completed (max_consec+1)-error run
    err_positions = np.nonzero(err[1:] - err[:-1])[0]
    long_run_cross = np.nonzero(run >= criteria.max_consec + 1)[0]

    maximal: list[tuple[int, int]] = []
    best_end = -1
    for i in range(n):
        if not is_match[i]:
            continue
        j_abs = n
        over = err[i] + criteria.max_abs
        if over < err[n]:
            j_abs = int(err_positions[over])  # region must end before this error
        j_consec = n
        k = np.searchsorted(long_run_cross, i + criteria.max_consec)
        if k < len(long_run_cross):
            j_consec = int(long_run_cross[k])
        j_hard = min(j_abs, j_consec)
        j_from = max(i + criteria.min_len, best_end + 1)
        if j_from > j_hard:
            continue
        js = np.arange(j_from, j_hard + 1)
        e = err[js] - err[i]
        rc = refc[js] - refc[i]
        valid = (e <= criteria.max_cer * rc) & (rc > 0) & is_match[js - 1]
        hits = np.nonzero(valid)[0]
        if len(hits):
            j = int(js[hits[-1]])
            # ends strictly grow, so kept candidates are containment-maximal
            maximal.append((i, j))
            best_end = j

    anchors: list[Anchor] = []
    last_end = 0
    for i, j in maximal:
        if i < last_end:
            continue
        e = int(err[j] - err[i])
        rc = int(refc[j] - refc[i])
        anchors.append(
            Anchor(
                op_span=(i, j),
                hyp_span=(int(hypc[i]), int(hypc[j])),
                ref_span=(int(refc[i]), int(refc[j])),
                stats={
                    "cer": e / rc,
                    "max_consecutive_errors": int(np.max(np.minimum(run[i:j], np.arange(1, j - i + 1)))),
                    "abs_errors": e,
                    "length": j - i,
                },
            )
        )
        last_end = j
    return anchors


@dataclass
class RegionPair:
    """An audio frame span pinned to a transcript region."""

    audio_span: tuple[int, int]
    ref_token_span: tuple[int, int]
    ref_sentence_range: tuple[int, int]


def map_anchors_to_audio(
    anchors: Sequence[Anchor],
    hyp_frame_spans: Sequence[tuple[int, int] | None],
    expand_tokens: int = 2,
    ref_sentence_offsets: Sequence[tuple[int, int]] | None = None,
    n_ref_tokens: int | None = None,
) -> list[RegionPair]:
    """Map anchors to audio regions, widening reference boundaries.

    Each anchor's hypothesis tokens supply the frame span; its reference
    token span is widened by ``expand_tokens`` on each side (clamped to the
    document) and converted to the covering sentence range when sentence
    token offsets are provided.
    """
    regions: list[RegionPair] = []
    if n_ref_tokens is None:
        n_ref_tokens = ref_sentence_offsets[-1][1] if ref_sentence_offsets else None
    for anchor in anchors:
        h0, h1 = anchor.hyp_span
        for h in range(h0, h1):
            if h >= len(hyp_frame_spans) or hyp_frame_spans[h] is None:
                raise MissingTimingError(f"hyp token {h} has no frame span")
        audio = (hyp_frame_spans[h0][0], hyp_frame_spans[h1 - 1][1])
        r0, r1 = anchor.ref_span
        r0 = max(0, r0 - expand_tokens)
        r1 = r1 + expand_tokens
        if n_ref_tokens is not None:
            r1 = min(n_ref_tokens, r1)
        if ref_sentence_offsets is not None:
            s_lo, s_hi = None, None
            for s, (t0, t1) in enumerate(ref_sentence_offsets):
                if t0 < r1 and t1 > r0:
                    s_lo = s if s_lo is None else s_lo
                    s_hi = s + 1
            if s_lo is None:
                s_lo, s_hi = 0, 0
            sent_range = (s_lo, s_hi)
        else:
            sent_range = (r0, r1)
        regions.append(RegionPair(audio, (r0, r1), sent_range))
    return regions


@dataclass
class FirstPassConfig:
    order: int = 3
    bias_lambda: float = 0.7
    beam: float | None = 12.0
    criteria: AnchorCriteria = field(default_factory=AnchorCriteria)
    expand_tokens: int = 2
    background: NgramLM | None = None
    #: long anchors are subdivided into regions of at most this many
    #: sentences so downstream windows see tight candidate sets
    max_region_sentences: int = 25


def _subdivide_anchors(anchors, ops, sentence_offsets, max_sentences):
    """Split long anchors at sentence boundaries into bounded regions.

    Each chunk's hypothesis timing is taken from the match ops inside it, so
    audio spans stay exact; the chunk's reference token range keeps the full
    sentence group, preserving candidate coverage.
    """
    out = []
    for a in anchors:
        i, j = a.op_span
        r0, r1 = a.ref_span
        sents = [s for s, (t0, t1) in enumerate(sentence_offsets) if t0 < r1 and t1 > r0]
        if len(sents) <= max_sentences:
            out.append(a)
            continue
        refpos = {}
        for k in range(i, j):
            if ops[k].ref_index is not None:
                refpos[ops[k].ref_index] = k
        for g in range(0, len(sents), max_sentences):
            group = sents[g:g + max_sentences]
            t0 = max(sentence_offsets[group[0]][0], r0)
            t1 = min(sentence_offsets[group[-1]][1], r1)
            oa = refpos.get(t0, i)
            ob = refpos[t1 - 1] + 1 if (t1 - 1) in refpos else j
            while oa < ob and ops[oa].kind != MATCH:
                oa += 1
            while ob > oa and ops[ob - 1].kind != MATCH:
                ob -= 1
            if ob <= oa:
                continue
            errs = sum(1 for op in ops[oa:ob] if op.kind != MATCH)
            refc = sum(1 for op in ops[oa:ob] if op.ref_index is not None)
            out.append(Anchor(
                op_span=(oa, ob),
                hyp_span=(ops[oa].hyp_index, ops[ob - 1].hyp_index + 1),
                ref_span=(t0, t1),
                stats={"cer": errs / max(refc, 1), "abs_errors": errs,
                       "length": ob - oa, "subdivided": True},
            ))
    return out


def first_pass(
    post_segments: Sequence[PosteriorMatrix],
    transcript: SentenceDoc,
    vocab: Vocab,
    cfg: FirstPassConfig | None = None,
    segment_offsets: Sequence[int] | None = None,
    lm: NgramLM | None = None,
    return_hyp: bool = False,
):
    """Paragraph-level alignment of a segmented recording to its transcript.

    Trains a document-biased n-gram model (or uses ``lm`` when given),
    decodes every segment against its graph, aligns the concatenated
    hypothesis with the transcript tokens, and maps the resulting anchors to
    audio regions. Segments that fail to decode are skipped with a warning.
    ``segment_offsets`` give each segment's start frame in the source
    recording (default: contiguous). With ``return_hyp`` the decoded token
    stream and its frame spans are returned alongside the regions.
    """
    from .decode import CtcDecoder

    cfg = cfg or FirstPassConfig()
    if lm is None:
        sent_ids = [vocab.ids(s.tokens) for s in transcript.sentences]
        doc_lm = train_ngram(sent_ids, cfg.order, vocab)
        lm = doc_lm if cfg.background is None else interpolate(
            doc_lm, cfg.background, cfg.bias_lambda, contexts="doc")
    decoder = CtcDecoder(lm_to_fsa(lm))

    if segment_offsets is None:
        segment_offsets = list(np.cumsum([0] + [p.frames for p in post_segments[:-1]]))

    hyp_tokens: list[int] = []
    hyp_spans: list[tuple[int, int]] = []
    for seg_i, post in enumerate(post_segments):
        try:
            result = decoder.align(post, cfg.beam)
        except NoPathError:
            log.warning("segment %d: no decoding path; skipped", seg_i)
            continue
        off = int(segment_offsets[seg_i])
        hyp_tokens.extend(result.labels)
        hyp_spans.extend((s + off, e + off) for s, e in result.spans)

    ref_tokens = vocab.ids(transcript.all_tokens())
    ops = align_text(hyp_tokens, ref_tokens)
    anchors = find_anchors(ops, cfg.criteria)
    offsets = transcript.sentence_token_offsets()
    if cfg.max_region_sentences:
        anchors = _subdivide_anchors(ops=ops, anchors=anchors, sentence_offsets=offsets,
                                     max_sentences=cfg.max_region_sentences)
    regions = map_anchors_to_audio(
        anchors,
        hyp_spans,
        cfg.expand_tokens,
        ref_sentence_offsets=offsets,
        n_ref_tokens=len(ref_tokens),
    )
    if return_hyp:
        return regions, hyp_tokens, hyp_spans
    return regions
