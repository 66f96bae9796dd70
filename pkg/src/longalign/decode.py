"""Graph construction and frame-level Viterbi alignment.

Decoding composes CTC emission topology (blank self-loops, repeat collapse)
with a weighted acceptor: the G graph may be an n-gram model FSA, a linear
flexible-alignment chain with per-sentence skip arcs, or a factor
transducer. The search is exact by default; an optional beam prunes
per-frame hypotheses for long inputs against large graphs.

Sliding-window alignment decodes overlapping windows independently and
merges per-sentence spans, preferring the window where a span sits farthest
from the cut boundaries. Windows whose boundary cuts the audio get wildcard
self-loops at the graph edges so frames belonging to partially visible
sentences can be absorbed instead of making the window undecodable.
"""

from __future__ import annotations

import bisect
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import BLANK_ID, EPSILON, Arc, Fsa, PosteriorMatrix
from .errors import EmptyInputError, EpsilonCycleError, NoPathError

log = logging.getLogger(__name__)

NEG_INF = float("-inf")

#: Internal arc labels whose emission score is the per-frame maximum over the
#: whole vocabulary; used to absorb frames at cut window boundaries. Two
#: distinct values so a leading and a trailing absorber never collapse.
WILDCARD_HEAD = -2
WILDCARD_TAIL = -3


def build_flexible_graph(sentences: Sequence[Sequence[int]], skip_weight: float) -> Fsa:
    """Linear sentence chain with one epsilon skip arc per sentence.

    Sentence i of length L contributes L token arcs through shared boundary
    states plus a skip arc from its start state to its end state, weighted
    ``skip_weight``. Totals: ``1 + sum(L_i)`` states, ``sum(L_i) + N`` arcs.
    """
    fsa, _, _ = _flexible_graph_with_map(sentences, skip_weight)
    return fsa


def _flexible_graph_with_map(sentences, skip_weight):
    if not sentences:
        raise EmptyInputError("no sentences")
    arcs: list[Arc] = []
    arc_sentence: list[int] = []
    skip_arc_of: list[int] = []
    state = 0
    for i, sent in enumerate(sentences):
        if not len(sent):
            raise EmptyInputError(f"sentence {i} is empty")
        start = state
        for tok in sent:
            arcs.append(Arc(state, state + 1, int(tok), 0.0))
            arc_sentence.append(i)
            state += 1
        skip_arc_of.append(len(arcs))
        arcs.append(Arc(start, state, EPSILON, skip_weight))
        arc_sentence.append(i)
    fsa = Fsa(state + 1, 0, arcs, {state: 0.0})
    return fsa, arc_sentence, skip_arc_of


def build_factor_transducer(sentences: Sequence[Sequence[int]], skip_weight: float = 0.0) -> Fsa:
    """Linear token FSA accepting any factor (substring).

    Epsilon arcs run from the start state to every other state and every
    state is final, so decoding may enter and leave the token chain at any
    position.
    """
    if not sentences:
        raise EmptyInputError("no sentences")
    tokens: list[int] = []
    for i, sent in enumerate(sentences):
        if not len(sent):
            raise EmptyInputError(f"sentence {i} is empty")
        tokens.extend(int(t) for t in sent)
    arcs = [Arc(i, i + 1, tok, 0.0) for i, tok in enumerate(tokens)]
    n = len(tokens) + 1
    arcs.extend(Arc(0, s, EPSILON, skip_weight) for s in range(1, n))
    return Fsa(n, 0, arcs, {s: 0.0 for s in range(n)})


@dataclass
class DecodeResult:
    """Best path of a CTC-topology alignment.

    ``spans`` are half-open frame intervals, one per emitted label, in frame
    order. ``arc_occurrences`` keeps the underlying graph arc index for each
    emitted label (wildcard absorber arcs included there but excluded from
    ``labels``/``spans``); ``eps_arcs`` lists epsilon arcs on the path in
    order. ``frame_scores[t]`` is the score increment contributed by frame t.
    """

    labels: list[int]
    spans: list[tuple[int, int]]
    total_logprob: float
    arc_occurrences: list[tuple[int, int, int]] = field(default_factory=list)
    eps_arcs: list[int] = field(default_factory=list)
    frame_scores: np.ndarray | None = None


class _CtcMachine:
    """CTC topology composed with an acceptor, flattened for Viterbi.

    Nodes: one blank node per graph state (emits the blank id) and one node
    per token arc (emits the arc label). Epsilon arcs are folded into
    advance edges via best-weight closure; the epsilon sub-graph must be
    acyclic.
    """

    def __init__(self, graph: Fsa):
        self.graph = graph
        self.token_arcs = [i for i, a in enumerate(graph.arcs) if a.label != EPSILON]
        self.n_states = graph.num_states
        self.n_nodes = self.n_states + len(self.token_arcs)

        closure = _eps_closure(graph)

        emit = np.zeros(self.n_nodes, dtype=np.int64)
        emit[: self.n_states] = BLANK_ID
        labels = [0] * self.n_nodes
        for j, ai in enumerate(self.token_arcs):
            emit[self.n_states + j] = graph.arcs[ai].label
            labels[self.n_states + j] = graph.arcs[ai].label
        self.emit = emit
        self.node_label = labels  # plain list: fast scalar access in the beam engine
        self._wild = bool(np.any(emit < 0))
        self._emit_clipped = np.clip(emit, 0, None)
        self._wild_mask = emit < 0

        # advance lists per graph state: (node, weight incl. arc weight, eps path)
        arcs_by_src: dict[int, list[tuple[int, int]]] = {}
        for j, ai in enumerate(self.token_arcs):
            arcs_by_src.setdefault(graph.arcs[ai].src, []).append((j, ai))
        adv: list[list[tuple[int, float, tuple[int, ...]]]] = [[] for _ in range(self.n_states)]
        for g in range(self.n_states):
            for g2, (we, path) in closure[g].items():
                for j, ai in arcs_by_src.get(g2, []):
                    adv[g].append((self.n_states + j, we + graph.arcs[ai].weight, path))
        self.adv = adv
        # arc node -> graph destination state (blank entry after the label)
        self.arc_dst = [graph.arcs[ai].dst for ai in self.token_arcs]

        # initial entries (consume frame 0): (node, weight, eps path)
        self.init_entries: list[tuple[int, float, tuple[int, ...]]] = [(graph.start_state, 0.0, ())]
        self.init_entries += adv[graph.start_state]

        # final weights with epsilon folding
        final_w = np.full(self.n_nodes, NEG_INF)
        self.final_eps: list[tuple[int, ...]] = [()] * self.n_nodes
        state_final = np.full(self.n_states, NEG_INF)
        state_eps: list[tuple[int, ...]] = [()] * self.n_states
        for g in range(self.n_states):
            for g2, (we, path) in closure[g].items():
                fw = graph.final_states.get(g2)
                if fw is not None and we + fw > state_final[g]:
                    state_final[g] = we + fw
                    state_eps[g] = path
        for g in range(self.n_states):
            final_w[g] = state_final[g]
            self.final_eps[g] = state_eps[g]
        for j, d in enumerate(self.arc_dst):
            final_w[self.n_states + j] = state_final[d]
            self.final_eps[self.n_states + j] = state_eps[d]
        self.final_w = final_w
        self._dense = None

    def dense(self):
        """Materialized edge arrays for the exact vectorized engine."""
        if self._dense is not None:
            return self._dense
        e_from: list[int] = []
        e_to: list[int] = []
        e_w: list[float] = []
        e_entered: list[int] = []  # arc-node entered as a new occurrence, -1 otherwise
        e_eps: list[tuple[int, ...]] = []

        for g in range(self.n_states):
            e_from.append(g); e_to.append(g); e_w.append(0.0)
            e_entered.append(-1); e_eps.append(())  # blank self-loop
            for node, w, path in self.adv[g]:
                e_from.append(g); e_to.append(node); e_w.append(w)
                e_entered.append(node); e_eps.append(path)
        for j, d in enumerate(self.arc_dst):
            node = self.n_states + j
            lab = self.node_label[node]
            e_from.append(node); e_to.append(node); e_w.append(0.0)
            e_entered.append(-1); e_eps.append(())  # label repeat
            e_from.append(node); e_to.append(d); e_w.append(0.0)
            e_entered.append(-1); e_eps.append(())  # into blank at destination
            for node2, w, path in self.adv[d]:
                if self.node_label[node2] != lab:
                    e_from.append(node); e_to.append(node2); e_w.append(w)
                    e_entered.append(node2); e_eps.append(path)

        e_from = np.asarray(e_from, dtype=np.int64)
        e_to = np.asarray(e_to, dtype=np.int64)
        e_w = np.asarray(e_w, dtype=np.float64)
        order = np.argsort(e_to, kind="stable")
        g_nodes, g_starts = np.unique(e_to[order], return_index=True)
        self._dense = {
            "e_from": e_from, "e_to": e_to, "e_w": e_w,
            "e_entered": e_entered, "e_eps": e_eps,
            "order": order, "g_nodes": g_nodes, "g_starts": g_starts,
        }
        return self._dense

    def emissions(self, row: np.ndarray) -> np.ndarray:
        out = row[self._emit_clipped]
        if self._wild:
            out = np.where(self._wild_mask, float(np.max(row)), out)
        return out


def _eps_closure(graph: Fsa):
    eps_adj: dict[int, list[tuple[int, float, int]]] = {}
    for i, a in enumerate(graph.arcs):
        if a.label == EPSILON:
            eps_adj.setdefault(a.src, []).append((a.dst, a.weight, i))

    WHITE, GRAY, BLACK = 0, 1, 2
    color = [WHITE] * graph.num_states
    memo: dict[int, dict[int, tuple[float, tuple[int, ...]]]] = {}

    def visit(s: int):
        if color[s] == GRAY:
            raise EpsilonCycleError(f"epsilon cycle through state {s}")
        if color[s] == BLACK:
            return memo[s]
        color[s] = GRAY
        reach: dict[int, tuple[float, tuple[int, ...]]] = {s: (0.0, ())}
        for dst, w, ai in eps_adj.get(s, []):
            for s2, (w2, path2) in visit(dst).items():
                cand = w + w2
                cur = reach.get(s2)
                if cur is None or cand > cur[0]:
                    reach[s2] = (cand, (ai,) + path2)
        color[s] = BLACK
        memo[s] = reach
        return reach

    for s in range(graph.num_states):
        visit(s)
    return memo


def fsa_sequence_score(graph: Fsa, labels: Sequence[int]) -> float:
    """Best accepting-path weight for an exact label sequence.

    Epsilon arcs are free to traverse (their weights accrue); returns -inf
    when the graph does not accept the sequence.
    """
    closure = _eps_closure(graph)
    arcs_by_src: dict[int, list[Arc]] = {}
    for a in graph.arcs:
        if a.label != EPSILON:
            arcs_by_src.setdefault(a.src, []).append(a)

    cur: dict[int, float] = {}
    for s2, (w, _) in closure[graph.start_state].items():
        cur[s2] = max(cur.get(s2, NEG_INF), w)
    for lab in labels:
        nxt: dict[int, float] = {}
        for s, sc in cur.items():
            for arc in arcs_by_src.get(s, []):
                if arc.label != lab:
                    continue
                base = sc + arc.weight
                for s2, (w, _) in closure[arc.dst].items():
                    cand = base + w
                    if cand > nxt.get(s2, NEG_INF):
                        nxt[s2] = cand
        if not nxt:
            return NEG_INF
        cur = nxt
    best = NEG_INF
    for s, sc in cur.items():
        fw = graph.final_states.get(s)
        if fw is not None:
            best = max(best, sc + fw)
    return best


class CtcDecoder:
    """Reusable CTC-topology decoder for one graph.

    Building the search machine is the expensive part for large graphs;
    construct once and align many posterior streams against it.
    """

    def __init__(self, graph: Fsa):
        self._machine = _CtcMachine(graph)

    def align(self, post: PosteriorMatrix, beam: float | None = None) -> DecodeResult:
        if beam is None:
            return _viterbi_dense(self._machine, post)
        return _viterbi_beam(self._machine, post, beam)


def viterbi_align(post: PosteriorMatrix, graph: Fsa, beam: float | None = None) -> DecodeResult:
    """Best CTC-topology path of ``post`` through ``graph``.

    Exact when ``beam`` is None; otherwise per-frame hypotheses more than
    ``beam`` below the frame best are pruned. Raises :class:`NoPathError`
    when no accepting path exists.
    """
    return CtcDecoder(graph).align(post, beam)


def _viterbi_dense(machine: _CtcMachine, post: PosteriorMatrix) -> DecodeResult:
    T = post.frames
    logp = post.logp.astype(np.float64)
    n = machine.n_nodes
    dense = machine.dense()
    e_from, e_w = dense["e_from"], dense["e_w"]
    order, g_nodes, g_starts = dense["order"], dense["g_nodes"], dense["g_starts"]
    E = len(e_from)
    bp = np.full((T, n), -1, dtype=np.int64)

    scores = np.full(n, NEG_INF)
    emis0 = machine.emissions(logp[0])
    for k, (node, w, _path) in enumerate(machine.init_entries):
        cand = w + emis0[node]
        if cand > scores[node]:
            scores[node] = cand
            bp[0, node] = E + k

    e_from_o = e_from[order]
    e_w_o = e_w[order]
    counts = np.diff(np.append(g_starts, E))

    for t in range(1, T):
        vals = scores[e_from_o] + e_w_o
        grp_max = np.maximum.reduceat(vals, g_starts)
        reach = grp_max > NEG_INF
        new_scores = np.full(n, NEG_INF)
        new_bp = np.full(n, -1, dtype=np.int64)
        if np.any(reach):
            expanded = np.repeat(grp_max, counts)
            cand_ids = np.where(vals == expanded, order, E)
            winners = np.minimum.reduceat(cand_ids, g_starts)
            nodes_r = g_nodes[reach]
            new_scores[nodes_r] = grp_max[reach]
            new_bp[nodes_r] = winners[reach]
        new_scores += machine.emissions(logp[t])
        new_bp[new_scores == NEG_INF] = -1
        scores = new_scores
        bp[t] = new_bp

    totals = scores + machine.final_w
    best_node = int(np.argmax(totals))
    total = float(totals[best_node])
    if total == NEG_INF:
        raise NoPathError("no accepting path")

    steps = [None] * T
    node = best_node
    for t in range(T - 1, -1, -1):
        e = int(bp[t, node])
        if e >= E:  # init entry
            _n0, w, path = machine.init_entries[e - E]
            steps[t] = (node, node if node >= machine.n_states else -1, path, w)
        else:
            steps[t] = (node, dense["e_entered"][e], dense["e_eps"][e], float(e_w[e]))
            node = int(e_from[e])
    return _reconstruct(machine, post, steps, total, best_node)


def _viterbi_beam(machine: _CtcMachine, post: PosteriorMatrix, beam: float) -> DecodeResult:
    T = post.frames
    logp = post.logp.astype(np.float64)
    labels = machine.node_label
    n_states = machine.n_states
    adv = machine.adv
    arc_dst = machine.arc_dst
    wild = machine._wild

    def emis_fn(row, row_max):
        if wild:
            return lambda node: row_max if labels[node] < 0 else row[labels[node]]
        return lambda node: row[labels[node]]  # blank nodes carry label 0

    row = logp[0]
    emis = emis_fn(row, float(np.max(row)) if wild else 0.0)
    active: dict[int, float] = {}
    # per-frame backpointers: node -> (prev_node, entered, eps path, trans weight)
    bp: list[dict[int, tuple]] = [dict() for _ in range(T)]
    for node, w, path in machine.init_entries:
        cand = w + emis(node)
        if cand > NEG_INF and cand > active.get(node, NEG_INF):
            active[node] = cand
            bp[0][node] = (-1, node if node >= n_states else -1, path, w)

    for t in range(1, T):
        row = logp[t]
        emis = emis_fn(row, float(np.max(row)) if wild else 0.0)
        new: dict[int, float] = {}
        bp_t = bp[t]
        for node, sc in active.items():
            if node < n_states:  # blank node
                cand = sc + emis(node)
                if cand > new.get(node, NEG_INF):
                    new[node] = cand
                    bp_t[node] = (node, -1, (), 0.0)
                for node2, w, path in adv[node]:
                    cand = sc + w + emis(node2)
                    if cand > new.get(node2, NEG_INF):
                        new[node2] = cand
                        bp_t[node2] = (node, node2, path, w)
            else:  # arc node
                cand = sc + emis(node)  # label repeat
                if cand > new.get(node, NEG_INF):
                    new[node] = cand
                    bp_t[node] = (node, -1, (), 0.0)
                d = arc_dst[node - n_states]
                cand = sc + emis(d)  # into blank at destination
                if cand > new.get(d, NEG_INF):
                    new[d] = cand
                    bp_t[d] = (node, -1, (), 0.0)
                lab = labels[node]
                for node2, w, path in adv[d]:
                    if labels[node2] == lab:
                        continue
                    cand = sc + w + emis(node2)
                    if cand > new.get(node2, NEG_INF):
                        new[node2] = cand
                        bp_t[node2] = (node, node2, path, w)
        if not new:
            raise NoPathError(f"no surviving hypotheses at frame {t}")
        best = max(new.values())
        cut = best - beam
        active = {}
        for node, sc in new.items():
            if sc >= cut and sc > NEG_INF:
                active[node] = sc
            else:
                bp_t.pop(node, None)
        if not active:
            raise NoPathError(f"no surviving hypotheses at frame {t}")

    best_node, total = -1, NEG_INF
    for node, sc in active.items():
        cand = sc + machine.final_w[node]
        if cand > total:
            total = cand
            best_node = node
    if total == NEG_INF:
        raise NoPathError("no accepting path")

    steps = [None] * T
    node = best_node
    for t in range(T - 1, -1, -1):
        prev, entered, path, w = bp[t][node]
        steps[t] = (node, entered, path, w)
        node = prev if t > 0 else node
    return _reconstruct(machine, post, steps, total, best_node)


def _reconstruct(machine: _CtcMachine, post: PosteriorMatrix, steps, total, best_node) -> DecodeResult:
    """Turn per-frame steps (node, entered, eps path, weight) into a result."""
    T = len(steps)
    graph = machine.graph
    occurrences: list[tuple[int, int, int]] = []  # (graph arc id, start, end)
    eps_arcs: list[int] = []
    open_arc = -1
    open_start = 0

    def close(end):
        nonlocal open_arc
        if open_arc >= 0:
            occurrences.append((machine.token_arcs[open_arc - machine.n_states], open_start, end))
            open_arc = -1

    for t, (node, entered, path, _w) in enumerate(steps):
        eps_arcs.extend(path)
        if entered >= 0:
            close(t)
            open_arc = entered
            open_start = t
        elif node < machine.n_states:
            close(t)
    close(T)
    eps_arcs.extend(machine.final_eps[best_node])

    labels, spans = [], []
    for arc_id, s, e in occurrences:
        lab = graph.arcs[arc_id].label
        if lab >= 0:
            labels.append(lab)
            spans.append((s, e))

    # per-frame score increments (emission + edge weights folded at entry)
    logp = post.logp.astype(np.float64)
    frame_scores = np.empty(T)
    for t, (node, _entered, _path, w) in enumerate(steps):
        lab = machine.emit[node]
        emis = float(np.max(logp[t])) if lab < 0 else float(logp[t][lab])
        frame_scores[t] = w + emis
    return DecodeResult(labels, spans, total, occurrences, eps_arcs, frame_scores)


@dataclass
class SentenceAlignment:
    status: str  # "aligned" | "skipped"
    start_frame: int = 0
    end_frame: int = 0
    confidence: float = 0.0


@dataclass
class FlexAlignment:
    """Per-sentence outcome of flexible alignment.

    ``entries[i]`` covers input sentence i; aligned spans are monotone and
    non-overlapping in sentence order.
    """

    entries: list[SentenceAlignment]

    @property
    def aligned_indices(self) -> list[int]:
        return [i for i, e in enumerate(self.entries) if e.status == "aligned"]

    @property
    def skipped_indices(self) -> list[int]:
        return [i for i, e in enumerate(self.entries) if e.status == "skipped"]


@dataclass
class WindowSpec:
    len_frames: int
    overlap_frames: int

    def __post_init__(self):
        if not (self.len_frames > self.overlap_frames >= 0):
            raise EmptyInputError("window length must exceed overlap >= 0")


def _windows(total_frames: int, spec: WindowSpec) -> list[tuple[int, int]]:
    step = spec.len_frames - spec.overlap_frames
    out = []
    s = 0
    while True:
        e = min(s + spec.len_frames, total_frames)
        out.append((s, e))
        if e >= total_frames:
            return out
        s += step


def _window_candidates(ws, we, n_sentences, candidate_range):
    if candidate_range is None:
        return 0, n_sentences
    lo, hi = None, None
    for (f0, f1), (s0, s1) in candidate_range:
        if f0 < we and f1 > ws:
            lo = s0 if lo is None else min(lo, s0)
            hi = s1 if hi is None else max(hi, s1)
    if lo is None:
        return 0, 0
    return max(0, lo), min(n_sentences, hi)


def align_sentences_flexible(post: PosteriorMatrix, sentences, skip_weight: float,
                             beam: float | None = None) -> FlexAlignment:
    """Whole-utterance flexible alignment (no windowing)."""
    fsa, arc_sentence, _ = _flexible_graph_with_map(sentences, skip_weight)
    result = viterbi_align(post, fsa, beam)
    entries = [SentenceAlignment("skipped") for _ in sentences]
    for local, (s, e, conf) in _collect_spans(result, arc_sentence, 0).items():
        entries[local] = SentenceAlignment("aligned", s, e, conf)
    return FlexAlignment(entries)


def _collect_spans(result: DecodeResult, arc_sentence, frame_offset):
    """Per-sentence (start, end, confidence) from a window decode."""
    spans: dict[int, list] = {}
    for arc_id, s, e in result.arc_occurrences:
        sent_local = arc_sentence[arc_id]
        if sent_local < 0:  # wildcard absorber
            continue
        rec = spans.setdefault(sent_local, [s, e])
        rec[0] = min(rec[0], s)
        rec[1] = max(rec[1], e)
    fs = result.frame_scores
    out = {}
    for local, (s, e) in spans.items():
        conf = float(np.mean(fs[s:e])) if fs is not None and e > s else 0.0
        out[local] = (s + frame_offset, e + frame_offset, conf)
    return out


def flex_align_window(
    post: PosteriorMatrix,
    sentences: Sequence[Sequence[int]],
    skip_weight: float,
    window: WindowSpec,
    candidate_range=None,
    wildcard_penalty: float = -2.0,
    beam: float | None = None,
    jobs: int = 1,
) -> FlexAlignment:
    """Sliding-window flexible alignment with deterministic merge.

    Windows decode independently (``jobs`` in parallel); a sentence's final
    span comes from the window where its midpoint is farthest from the
    window edges (tie: earlier window). Sentences aligned in no window are
    skipped. Windows that fail to decode contribute nothing.
    """
    if not sentences:
        raise EmptyInputError("no sentences")
    T = post.frames
    wins = _windows(T, window)

    def run_window(widx_bounds):
        widx, (ws, we) = widx_bounds
        c0, c1 = _window_candidates(ws, we, len(sentences), candidate_range)
        if c1 <= c0:
            return []
        sub = [sentences[i] for i in range(c0, c1)]
        fsa, arc_sentence, _ = _flexible_graph_with_map(sub, skip_weight)
        whole = ws == 0 and we == T
        if not whole:
            arcs = list(fsa.arcs)
            if ws > 0:
                arcs.append(Arc(fsa.start_state, fsa.start_state, WILDCARD_HEAD, wildcard_penalty))
                arc_sentence.append(-1)
            if we < T:
                final_state = next(iter(fsa.final_states))
                arcs.append(Arc(final_state, final_state, WILDCARD_TAIL, wildcard_penalty))
                arc_sentence.append(-1)
            fsa = Fsa(fsa.num_states, fsa.start_state, arcs, fsa.final_states)
        try:
            result = viterbi_align(post.slice_frames(ws, we), fsa, beam)
        except NoPathError:
            log.warning("window %d [%d,%d) has no path; skipped", widx, ws, we)
            return []
        found = []
        for local, (s, e, conf) in _collect_spans(result, arc_sentence, ws).items():
            gi = c0 + local
            mid = (s + e) / 2.0
            dist = min(mid - ws, we - mid)
            found.append((gi, s, e, conf, widx, dist))
        return found

    tasks = list(enumerate(wins))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_window = list(pool.map(run_window, tasks))
    else:
        per_window = [run_window(t) for t in tasks]

    # pick the best window per sentence: farthest midpoint, then earlier window
    best: dict[int, tuple] = {}
    for frames in per_window:
        for gi, s, e, conf, widx, dist in frames:
            cur = best.get(gi)
            if cur is None or dist > cur[5] or (dist == cur[5] and widx < cur[4]):
                best[gi] = (gi, s, e, conf, widx, dist)

    # monotonic repair: admit spans by decreasing confidence, drop conflicts
    entries = [SentenceAlignment("skipped") for _ in sentences]
    kept_idx: list[int] = []
    kept_span: dict[int, tuple[int, int]] = {}
    for gi, s, e, conf, widx, dist in sorted(best.values(), key=lambda r: (-r[3], r[0])):
        pos = bisect.bisect_left(kept_idx, gi)
        ok = True
        if pos > 0:
            ps, pe = kept_span[kept_idx[pos - 1]]
            if s < pe:
                ok = False
        if ok and pos < len(kept_idx):
            ns, ne = kept_span[kept_idx[pos]]
            if e > ns:
                ok = False
        if ok:
            kept_idx.insert(pos, gi)
            kept_span[gi] = (s, e)
            entries[gi] = SentenceAlignment("aligned", s, e, conf)
    return FlexAlignment(entries)
