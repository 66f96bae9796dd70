"""Shared helpers: independent oracles and random instance generators.

Oracles here deliberately re-derive results with the dumbest correct
algorithm available (enumeration, naive recursion, full DP) so production
code is checked against something it shares no structure with.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
import pytest

from longalign.core import BLANK_ID, EPSILON, Arc, Fsa


def random_dag_fsa(rng: np.random.Generator, max_states: int = 6, vocab_size: int = 4,
                   eps_prob: float = 0.2) -> Fsa:
    """Random acyclic acceptor over token ids [1, vocab_size)."""
    n = int(rng.integers(2, max_states + 1))
    arcs = []
    for src in range(n - 1):
        for _ in range(int(rng.integers(1, 4))):
            dst = int(rng.integers(src + 1, n))
            if rng.random() < eps_prob:
                label = EPSILON
            else:
                label = int(rng.integers(1, vocab_size))
            arcs.append(Arc(src, dst, label, float(-rng.uniform(0, 2))))
    finals = {n - 1: float(-rng.uniform(0, 1))}
    for s in range(1, n - 1):
        if rng.random() < 0.3:
            finals[s] = float(-rng.uniform(0, 1))
    return Fsa(n, 0, arcs, finals)


def collapse_ctc(labeling: tuple[int, ...]) -> tuple[int, ...]:
    """Remove repeats, then blanks: the CTC many-to-one output map."""
    out = []
    prev = None
    for lab in labeling:
        if lab != prev:
            out.append(lab)
        prev = lab
    return tuple(lab for lab in out if lab != BLANK_ID)


def accept_score_dfs(fsa: Fsa, labels: tuple[int, ...]) -> float:
    """Max accepting-path weight by explicit path enumeration (tiny graphs)."""
    best = [-np.inf]

    def walk(state: int, pos: int, acc: float, eps_seen: frozenset):
        if pos == len(labels):
            fw = fsa.final_states.get(state)
            if fw is not None:
                best[0] = max(best[0], acc + fw)
        for ai, arc in enumerate(fsa.arcs):
            if arc.src != state:
                continue
            if arc.label == EPSILON:
                if ai in eps_seen:
                    continue
                walk(arc.dst, pos, acc + arc.weight, eps_seen | {ai})
            elif pos < len(labels) and arc.label == labels[pos]:
                walk(arc.dst, pos + 1, acc + arc.weight, frozenset())
        return

    walk(fsa.start_state, 0, 0.0, frozenset())
    return best[0]


def brute_force_ctc_best(fsa: Fsa, logp: np.ndarray) -> float:
    """Enumerate every frame labeling; score emission + best graph path."""
    T, V = logp.shape
    memo: dict[tuple[int, ...], float] = {}
    best = -np.inf
    labelings = np.array(list(itertools.product(range(V), repeat=T)), dtype=np.int64)
    emis = logp[np.arange(T)[None, :], labelings].sum(axis=1)
    for k in range(len(labelings)):
        e = float(emis[k])
        if e == -np.inf:
            continue
        seq = collapse_ctc(tuple(labelings[k]))
        if seq not in memo:
            memo[seq] = accept_score_dfs(fsa, seq)
        g = memo[seq]
        if g > -np.inf:
            best = max(best, e + g)
    return best


def edit_distance_recursive(a, b, sub=1.0, ins=1.0, delete=1.0) -> float:
    """Naive recursive edit distance (memoized for speed, same recursion)."""
    a = tuple(a)
    b = tuple(b)

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == 0:
            return j * ins
        if j == 0:
            return i * delete
        best = go(i - 1, j - 1) + (0.0 if a[i - 1] == b[j - 1] else sub)
        best = min(best, go(i - 1, j) + delete)
        best = min(best, go(i, j - 1) + ins)
        return best

    return go(len(a), len(b))


def random_normalized_logp(rng: np.random.Generator, T: int, V: int) -> np.ndarray:
    p = rng.random((T, V)) + 1e-3
    p /= p.sum(axis=1, keepdims=True)
    return np.log(p)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
