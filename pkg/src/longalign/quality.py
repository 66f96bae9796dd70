"""Alignment-quality statistics, post-filtering, and CER-bin sampling.

Each aligned segment gets edit statistics from a minimal hypothesis/
reference alignment: CER (errors over reference length), the longest
consecutive-error run, and the error ratio (errors over hypothesis length,
so inserted babble and empty hypotheses are visible separately from CER).
Filtering is a hard AND over three thresholds; bin sampling emits a seeded
labeling sheet for manual threshold tuning.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .anchor import MATCH, align_text
from .errors import EmptyRefError


@dataclass
class QualityStats:
    cer: float
    max_consecutive_errors: int
    error_ratio: float
    ref_len: int
    hyp_len: int

    def to_dict(self) -> dict:
        return {
            "cer": self.cer,
            "max_consecutive_errors": self.max_consecutive_errors,
            "error_ratio": self.error_ratio,
            "ref_len": self.ref_len,
            "hyp_len": self.hyp_len,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QualityStats":
        return cls(
            cer=float(d["cer"]),
            max_consecutive_errors=int(d["max_consecutive_errors"]),
            error_ratio=float(d["error_ratio"]),
            ref_len=int(d["ref_len"]),
            hyp_len=int(d["hyp_len"]),
        )


def compute_stats(hyp: Sequence, ref: Sequence) -> QualityStats:
    """Edit statistics of one hypothesis against its reference."""
    if not len(ref):
        raise EmptyRefError("reference must be non-empty")
    ops = align_text(hyp, ref)
    errors = 0
    consec = 0
    best_consec = 0
    for op in ops:
        if op.kind == MATCH:
            consec = 0
        else:
            errors += 1
            consec += 1
            best_consec = max(best_consec, consec)
    hyp_len = len(hyp)
    return QualityStats(
        cer=errors / len(ref),
        max_consecutive_errors=best_consec,
        error_ratio=errors / hyp_len if hyp_len else float("inf"),
        ref_len=len(ref),
        hyp_len=hyp_len,
    )


@dataclass
class FilterThresholds:
    max_cer: float = 0.3
    max_consec: int = 6
    max_error_ratio: float = 0.5


def post_filter(segments: Sequence[tuple], thresholds: FilterThresholds | None = None):
    """Partition (segment, stats) pairs into (accepted, rejected).

    A segment is accepted iff cer <= max_cer AND max consecutive errors <=
    max_consec AND error ratio <= max_error_ratio.
    """
    thresholds = thresholds or FilterThresholds()
    accepted, rejected = [], []
    for seg, stats in segments:
        ok = (
            stats.cer <= thresholds.max_cer
            and stats.max_consecutive_errors <= thresholds.max_consec
            and stats.error_ratio <= thresholds.max_error_ratio
        )
        (accepted if ok else rejected).append((seg, stats))
    return accepted, rejected


def cer_bin(cer: float, bin_edges: Sequence[float]) -> int:
    """Index of the half-open CER bin; edges [a, b] make bins (-inf,a), [a,b), [b,inf)."""
    lo = 0
    for k, edge in enumerate(bin_edges):
        if cer >= edge:
            lo = k + 1
    return lo


def bin_sample(segments: Sequence[tuple], bin_edges: Sequence[float],
               per_bin: int, seed: int) -> list[tuple]:
    """Uniform per-bin sample of (segment, stats) pairs, without replacement.

    Bins with fewer than ``per_bin`` members are returned whole. The draw is
    deterministic for a fixed seed. Output order: by bin, then by draw.
    """
    edges = list(bin_edges)
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("bin_edges must be strictly increasing")
    buckets: list[list] = [[] for _ in range(len(edges) + 1)]
    for pair in segments:
        buckets[cer_bin(pair[1].cer, edges)].append(pair)
    rng = random.Random(seed)
    out = []
    for bucket in buckets:
        if not bucket:
            continue
        if len(bucket) <= per_bin:
            out.extend(bucket)
        else:
            out.extend(rng.sample(bucket, per_bin))
    return out


def write_labeling_sheet(samples: Sequence[tuple], bin_edges: Sequence[float], path) -> None:
    """Emit a JSONL sheet for manual annotation (label starts as null)."""
    with open(path, "w", encoding="utf-8") as f:
        for seg, stats in samples:
            row = {
                "utt_id": seg.utt_id,
                "cer_bin": cer_bin(stats.cer, bin_edges),
                "cer": stats.cer,
                "text": seg.text_src,
                "label": None,
            }
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_labeling_sheet(path) -> list[dict]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append(json.loads(line))
    return rows


def threshold_report(labeled_rows: Sequence[dict], thresholds: Sequence[float]) -> list[dict]:
    """Precision of `cer <= t` acceptance against manual labels.

    Rows need ``cer`` and a truthy ``label`` for good utterances; unlabeled
    rows are ignored.
    """
    rows = [r for r in labeled_rows if r.get("label") is not None]
    report = []
    for t in thresholds:
        accepted = [r for r in rows if r["cer"] <= t]
        good = sum(1 for r in accepted if r["label"])
        report.append(
            {
                "threshold": t,
                "n_accepted": len(accepted),
                "precision": good / len(accepted) if accepted else 1.0,
            }
        )
    return report
