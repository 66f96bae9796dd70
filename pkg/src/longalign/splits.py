"""Constraint-driven corpus partitioning.

Documents are split into named subsets under hard disjointness constraints
(speaker and/or document disjointness from the train split) while
approximately matching target sizes in hours and the global gender mix.
Speaker disjointness forces whole doc-speaker connected components to move
together; document-only disjointness needs only document granularity, which
assignment already guarantees. Packing is greedy over seeded randomized
restarts; the best restart by objective wins.
"""

from __future__ import annotations

import json
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

from .core import UtteranceManifestRow
from .errors import InfeasibleError

N_RESTARTS = 64
GENDER_WEIGHT = 1.0


@dataclass
class SplitSpec:
    name: str
    target_fraction: float
    require_speaker_disjoint_from_train: bool = False
    require_document_disjoint_from_train: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "SplitSpec":
        return cls(
            name=d["name"],
            target_fraction=float(d["target_fraction"]),
            require_speaker_disjoint_from_train=bool(d.get("require_speaker_disjoint_from_train", False)),
            require_document_disjoint_from_train=bool(d.get("require_document_disjoint_from_train", False)),
        )


def default_specs() -> list[SplitSpec]:
    return [
        SplitSpec("train", 0.80),
        SplitSpec("dev-asr", 0.07, require_speaker_disjoint_from_train=True),
        SplitSpec("dev-mt", 0.08, require_document_disjoint_from_train=True),
        SplitSpec(
            "test", 0.05,
            require_speaker_disjoint_from_train=True,
            require_document_disjoint_from_train=True,
        ),
    ]


@dataclass
class SplitAssignment:
    assignment: dict[str, str]  # doc_id -> split name
    report: dict

    def to_json(self) -> str:
        return json.dumps({"assignment": self.assignment, "report": self.report},
                          ensure_ascii=False, indent=2, sort_keys=True)


class _DocStats:
    def __init__(self):
        self.hours = 0.0
        self.speakers: set[str] = set()
        self.gender_hours = defaultdict(float)


def _collect(manifest: Sequence[UtteranceManifestRow]):
    docs: dict[str, _DocStats] = {}
    for row in manifest:
        d = docs.setdefault(row.doc_id, _DocStats())
        d.hours += row.duration_s / 3600.0
        d.speakers.add(row.speaker_id)
        if row.gender in ("M", "F"):
            d.gender_hours[row.gender] += row.duration_s / 3600.0
    return docs


def _components(docs: dict[str, _DocStats]) -> list[list[str]]:
    """Connected components of the doc-speaker bipartite graph."""
    parent: dict[str, str] = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for doc_id, st in docs.items():
        parent.setdefault("d:" + doc_id, "d:" + doc_id)
        for spk in st.speakers:
            parent.setdefault("s:" + spk, "s:" + spk)
            union("d:" + doc_id, "s:" + spk)
    groups: dict[str, list[str]] = defaultdict(list)
    for doc_id in docs:
        groups[find("d:" + doc_id)].append(doc_id)
    return [sorted(g) for g in sorted(groups.values(), key=lambda g: g[0])]


def doc_stats_subset(docs, doc_ids):
    return {d: (docs[d].hours, dict(docs[d].gender_hours)) for d in doc_ids}


def _objective(split_hours, split_gender, targets, total_hours, global_gender):
    obj = 0.0
    for name, target in targets.items():
        obj += abs(split_hours[name] - target) / total_hours
        gh = split_gender[name]
        tot = gh["M"] + gh["F"]
        if tot > 0:
            for g in ("M", "F"):
                obj += GENDER_WEIGHT * abs(gh[g] / tot - global_gender[g])
        else:
            obj += GENDER_WEIGHT  # empty split: maximal gender deviation
    return obj


def _greedy_pack(units, unit_stats, buckets, targets, total_hours, global_gender, rng):
    """Greedy size-descending assignment plus a local-improvement polish.

    Units land in the bucket minimizing the objective; afterwards single-unit
    moves are applied while they improve the objective, which smooths out the
    quantization a pure greedy pass leaves behind. Deterministic given rng.
    """
    jitter = {u: rng.uniform(0.7, 1.3) for u in units}
    order = sorted(units, key=lambda u: (-unit_stats[u][0] * jitter[u], u))
    split_hours = {b: 0.0 for b in buckets}
    split_gender = {b: {"M": 0.0, "F": 0.0} for b in buckets}
    assign: dict[str, str] = {}

    def add(b, u, sign=1.0):
        hours, gender_hours = unit_stats[u]
        split_hours[b] += sign * hours
        for g in ("M", "F"):
            split_gender[b][g] += sign * gender_hours.get(g, 0.0)

    def objective():
        return _objective(split_hours, split_gender, targets, total_hours, global_gender)

    for u in order:
        best_b, best_obj = None, None
        for b in buckets:
            add(b, u)
            obj = objective()
            add(b, u, -1.0)
            if best_obj is None or obj < best_obj:
                best_b, best_obj = b, obj
        assign[u] = best_b
        add(best_b, u)

    def try_moves():
        improved = False
        for u in order:
            cur_b = assign[u]
            best_b, best_obj = cur_b, objective()
            add(cur_b, u, -1.0)
            for b in buckets:
                if b == cur_b:
                    continue
                add(b, u)
                obj = objective()
                add(b, u, -1.0)
                if obj < best_obj - 1e-12:
                    best_b, best_obj = b, obj
            add(best_b, u)
            if best_b != cur_b:
                assign[u] = best_b
                improved = True
        return improved

    def try_swaps():
        improved = False
        for ia, u in enumerate(order):
            for w in order[ia + 1:]:
                bu, bw = assign[u], assign[w]
                if bu == bw:
                    continue
                before = objective()
                add(bu, u, -1.0); add(bw, w, -1.0)
                add(bw, u); add(bu, w)
                if objective() < before - 1e-12:
                    assign[u], assign[w] = bw, bu
                    improved = True
                else:
                    add(bw, u, -1.0); add(bu, w, -1.0)
                    add(bu, u); add(bw, w)
        return improved

    for _sweep in range(4):
        improved = try_moves()
        if len(order) <= 80:  # pair swaps only where the O(n^2) pass is cheap
            improved = try_swaps() or improved
        if not improved:
            break
    return assign, split_hours, split_gender


def make_splits(manifest: Sequence[UtteranceManifestRow], specs: Sequence[SplitSpec] | None = None,
                seed: int = 0) -> SplitAssignment:
    """Partition documents into splits under hard disjointness constraints.

    Phase one packs doc-speaker components into the speaker-disjoint splits
    versus a shared train-side pool; phase two packs the pool's documents
    into train and the document-only-disjoint splits. Each phase is greedy
    over 64 seeded restarts; the restart with the lowest combined hours and
    gender-deviation objective wins. Raises :class:`InfeasibleError` when a
    positive-target speaker-disjoint split ends up empty.
    """
    if not manifest:
        raise InfeasibleError("empty manifest")
    specs = list(specs) if specs is not None else default_specs()
    frac_sum = sum(s.target_fraction for s in specs)
    if abs(frac_sum - 1.0) > 1e-6:
        raise InfeasibleError(f"target fractions sum to {frac_sum}, expected 1")
    names = [s.name for s in specs]
    if "train" not in names:
        raise InfeasibleError("specs must include a 'train' split")

    docs = _collect(manifest)
    total_hours = sum(d.hours for d in docs.values())
    gh = defaultdict(float)
    for d in docs.values():
        for g, h in d.gender_hours.items():
            gh[g] += h
    g_tot = gh["M"] + gh["F"]
    global_gender = {g: (gh[g] / g_tot if g_tot > 0 else 0.5) for g in ("M", "F")}

    spk_splits = [s for s in specs if s.require_speaker_disjoint_from_train]
    pool_splits = [s for s in specs if not s.require_speaker_disjoint_from_train]
    components = _components(docs)
    comp_stats = {}
    for ci, comp in enumerate(components):
        hours = sum(docs[d].hours for d in comp)
        gender = defaultdict(float)
        for d in comp:
            for g, h in docs[d].gender_hours.items():
                gender[g] += h
        comp_stats[f"c{ci}"] = (hours, dict(gender))
    comp_docs = {f"c{ci}": comp for ci, comp in enumerate(components)}

    best = None
    for restart in range(N_RESTARTS):
        rng = random.Random(seed * 1_000_003 + restart)

        # phase one: components -> speaker-disjoint splits or the train pool
        pool_target = sum(s.target_fraction for s in pool_splits) * total_hours
        targets1 = {s.name: s.target_fraction * total_hours for s in spk_splits}
        targets1["__pool__"] = pool_target
        buckets1 = list(targets1.keys())
        assign1, _, _ = _greedy_pack(list(comp_stats), comp_stats, buckets1,
                                     targets1, total_hours, global_gender, rng)

        # phase two: pool documents -> train and doc-disjoint-only splits;
        # targets rescale to the hours phase one actually left in the pool
        pool_docs = [d for c, comp in comp_docs.items() if assign1[c] == "__pool__" for d in comp]
        pool_hours = sum(docs[d].hours for d in pool_docs)
        scale = pool_hours / pool_target if pool_target > 0 else 1.0
        targets2 = {s.name: s.target_fraction * total_hours * scale for s in pool_splits}
        assign2, _, _ = _greedy_pack(pool_docs, doc_stats_subset(docs, pool_docs), list(targets2),
                                     targets2, total_hours, global_gender, rng)

        doc_assign: dict[str, str] = {}
        for c, comp in comp_docs.items():
            if assign1[c] != "__pool__":
                for d in comp:
                    doc_assign[d] = assign1[c]
        doc_assign.update(assign2)

        split_hours = {s.name: 0.0 for s in specs}
        split_gender = {s.name: {"M": 0.0, "F": 0.0} for s in specs}
        for d, b in doc_assign.items():
            split_hours[b] += docs[d].hours
            for g in ("M", "F"):
                split_gender[b][g] += docs[d].gender_hours.get(g, 0.0)
        targets = {s.name: s.target_fraction * total_hours for s in specs}
        obj = _objective(split_hours, split_gender, targets, total_hours, global_gender)
        if best is None or obj < best[0]:
            best = (obj, doc_assign)

    obj, doc_assign = best
    for s in spk_splits:
        if s.target_fraction > 0 and not any(v == s.name for v in doc_assign.values()):
            blocking = max(components, key=lambda c: sum(docs[d].hours for d in c))
            raise InfeasibleError(
                f"speaker-disjoint split '{s.name}' received no documents; "
                f"blocking component holds {len(blocking)} docs "
                f"({sum(docs[d].hours for d in blocking):.2f} h)",
                component=blocking,
            )

    report = evaluate_assignment(manifest, specs, doc_assign)
    for s in specs:
        checks = report["splits"][s.name]["constraints"]
        for key, ok in checks.items():
            if not ok:
                raise InfeasibleError(f"constraint {key} violated for split '{s.name}'")
    return SplitAssignment(doc_assign, report)


def evaluate_assignment(manifest: Sequence[UtteranceManifestRow], specs: Sequence[SplitSpec],
                        assignment: dict[str, str]) -> dict:
    """Recompute the constraint/report block from an assignment alone."""
    docs = _collect(manifest)
    total_hours = sum(d.hours for d in docs.values())
    gh = defaultdict(float)
    for d in docs.values():
        for g, h in d.gender_hours.items():
            gh[g] += h
    g_tot = gh["M"] + gh["F"]
    global_gender = {g: (gh[g] / g_tot if g_tot > 0 else 0.5) for g in ("M", "F")}

    split_docs: dict[str, set[str]] = {s.name: set() for s in specs}
    for d, b in assignment.items():
        split_docs[b].add(d)
    speakers = {
        name: set().union(*(docs[d].speakers for d in ds)) if ds else set()
        for name, ds in split_docs.items()
    }

    report = {"total_hours": total_hours, "global_gender": global_gender, "splits": {}}
    for s in specs:
        ds = split_docs[s.name]
        hours = sum(docs[d].hours for d in ds)
        gender = {"M": 0.0, "F": 0.0}
        for d in ds:
            for g in ("M", "F"):
                gender[g] += docs[d].gender_hours.get(g, 0.0)
        tot = gender["M"] + gender["F"]
        props = {g: (gender[g] / tot if tot > 0 else 0.0) for g in ("M", "F")}
        deviation = sum(abs(props[g] - global_gender[g]) for g in ("M", "F"))
        target_hours = s.target_fraction * total_hours
        constraints = {}
        if s.name != "train":
            if s.require_speaker_disjoint_from_train:
                constraints["speaker_disjoint_from_train"] = not (speakers[s.name] & speakers["train"])
            if s.require_document_disjoint_from_train:
                constraints["document_disjoint_from_train"] = not (ds & split_docs["train"])
        report["splits"][s.name] = {
            "n_docs": len(ds),
            "hours": hours,
            "target_hours": target_hours,
            "hours_deviation": abs(hours - target_hours) / total_hours,
            "gender_proportions": props,
            "gender_l1_deviation": deviation,
            "constraints": constraints,
        }
    report["every_doc_assigned_once"] = sorted(assignment) == sorted(docs)
    return report
