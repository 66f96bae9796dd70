"""Backoff n-gram language models for document-biased decoding.

Models are Witten-Bell smoothed and terminate in a uniform base distribution
over the non-blank vocabulary, so every in-vocab token has positive
probability in every context and conditional distributions sum to one
exactly. A model converts to a weighted FSA whose best accepting path for a
token sequence reproduces the model score; "biasing" interpolates a document
model with a background model pointwise and refolds the result into a single
backoff table.

Serialization is an ARPA-style text format using natural logs, contexts
sorted lexicographically, floats written with repr() for bit-exact
round-trips.
"""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

from .core import BLANK_ID, EPSILON, Arc, Fsa, Vocab
from .errors import EmptyCorpusError, FormatError

PROB_FLOOR = 1e-7


class NgramLM:
    """Backoff n-gram model over vocabulary token ids.

    ``probs[h]`` maps a context tuple (length 0..order-1) to
    ``{token_id: probability}``; ``bows[h]`` holds backoff weights for
    contexts of length >= 1. The empty-context table is complete over the
    model vocabulary (every id except blank).
    """

    def __init__(self, order: int, vocab: Vocab,
                 probs: dict[tuple, dict[int, float]],
                 bows: dict[tuple, float]):
        if order < 1:
            raise FormatError("order must be >= 1")
        self.order = order
        self.vocab = vocab
        self.probs = probs
        self.bows = bows
        self.lm_ids = sorted(probs.get((), {}).keys())

    # -- scoring ---------------------------------------------------------

    def prob(self, token_id: int, context: Sequence[int] = ()) -> float:
        """Conditional probability with standard backoff evaluation."""
        h = tuple(context[-(self.order - 1):]) if self.order > 1 else ()
        acc = 1.0
        while True:
            table = self.probs.get(h)
            if table is not None and token_id in table:
                return acc * table[token_id]
            if not h:
                return 0.0
            if table is not None:
                acc *= self.bows.get(h, 1.0)
            h = h[1:]

    def logprob(self, token_id: int, context: Sequence[int] = ()) -> float:
        return math.log(max(self.prob(token_id, context), PROB_FLOOR))

    def score(self, token_ids: Sequence[int]) -> float:
        total = 0.0
        for i, tok in enumerate(token_ids):
            total += self.logprob(tok, token_ids[max(0, i - self.order + 1):i])
        return total

    def conditional_sum(self, context: Sequence[int]) -> float:
        return sum(self.prob(w, context) for w in self.lm_ids)

    @classmethod
    def uniform(cls, vocab: Vocab) -> "NgramLM":
        ids = [i for i in range(len(vocab)) if i != BLANK_ID]
        p = 1.0 / len(ids)
        return cls(1, vocab, {(): {w: p for w in ids}}, {})


def _count_ngrams(token_sequences: Iterable[Sequence[int]], order: int):
    counts = [defaultdict(lambda: defaultdict(int)) for _ in range(order)]
    n_tokens = 0
    for seq in token_sequences:
        seq = list(seq)
        n_tokens += len(seq)
        for i, tok in enumerate(seq):
            for k in range(min(order - 1, i) + 1):
                counts[k][tuple(seq[i - k:i])][tok] += 1
    if n_tokens == 0:
        raise EmptyCorpusError("no tokens in training corpus")
    return counts


def train_ngram(token_sequences: Sequence[Sequence[int]], order: int, vocab: Vocab) -> NgramLM:
    """Train a Witten-Bell smoothed backoff model.

    ``token_sequences`` are id sequences (documents or sentences); no
    boundary symbols are added, so sequence starts back off to shorter
    histories. The unigram level interpolates with a uniform distribution
    over the non-blank vocabulary.
    """
    counts = _count_ngrams(token_sequences, order)
    lm_ids = [i for i in range(len(vocab)) if i != BLANK_ID]
    p_unif = 1.0 / len(lm_ids)

    probs: dict[tuple, dict[int, float]] = {}
    bows: dict[tuple, float] = {}

    # unigram level: complete table
    uni = counts[0].get((), {})
    c_total = sum(uni.values())
    t_types = len(uni)
    denom = c_total + t_types
    probs[()] = {w: (uni.get(w, 0) + t_types * p_unif) / denom for w in lm_ids}

    for k in range(1, order):
        for h, table in counts[k].items():
            c_h = sum(table.values())
            t_h = len(table)
            denom = c_h + t_h
            lower = h[1:]
            entry = {}
            for w, c in table.items():
                entry[w] = (c + t_h * _prob_partial(probs, bows, w, lower)) / denom
            probs[h] = entry
            bows[h] = t_h / denom
    return NgramLM(order, vocab, probs, bows)


def _prob_partial(probs, bows, token_id, context):
    h = tuple(context)
    acc = 1.0
    while True:
        table = probs.get(h)
        if table is not None and token_id in table:
            return acc * table[token_id]
        if not h:
            return 0.0
        if table is not None:
            acc *= bows.get(h, 1.0)
        h = h[1:]


def interpolate(doc_lm: NgramLM, bg_lm: NgramLM, lam: float = 0.7,
                contexts: str = "union") -> NgramLM:
    """Document-biased model: pointwise lam*p_doc + (1-lam)*p_bg.

    The interpolated distribution is refolded into a single backoff table:
    explicit probabilities on stored n-grams, backoff weights from the
    remaining mass. Conditionals still sum to one exactly. With
    ``contexts="doc"`` only the document model's contexts get explicit
    entries (the unigram level is always fully blended), keeping the biased
    model document-sized when the background corpus is large; elsewhere the
    backoff chain applies.
    """
    if doc_lm.vocab is not bg_lm.vocab and doc_lm.vocab != bg_lm.vocab:
        raise FormatError("interpolation requires a shared vocabulary")
    order = max(doc_lm.order, bg_lm.order)
    ctx_by_len: list[set[tuple]] = [set() for _ in range(order)]
    sources = (doc_lm,) if contexts == "doc" else (doc_lm, bg_lm)
    for src in sources:
        for h in src.probs:
            ctx_by_len[len(h)].add(h)
    ctx_by_len[0].add(())

    probs: dict[tuple, dict[int, float]] = {}
    bows: dict[tuple, float] = {}
    for k in range(order):
        for h in sorted(ctx_by_len[k]):
            stored = set(doc_lm.probs.get(h, {})) | set(bg_lm.probs.get(h, {}))
            entry = {
                w: lam * doc_lm.prob(w, h) + (1.0 - lam) * bg_lm.prob(w, h)
                for w in stored
            }
            probs[h] = entry
            if k >= 1:
                num = 1.0 - sum(entry.values())
                den = 1.0 - sum(_prob_partial(probs, bows, w, h[1:]) for w in entry)
                if den <= 1e-12 or num <= 0.0:
                    bows[h] = max(num, 0.0) / max(den, 1e-12) if den > 1e-12 else 1.0
                else:
                    bows[h] = num / den
    return NgramLM(order, doc_lm.vocab, probs, bows)


def perplexity(lm: NgramLM, token_ids: Sequence[int]) -> float:
    """exp of the mean negative log probability under the model."""
    if not len(token_ids):
        raise EmptyCorpusError("perplexity of empty text")
    return math.exp(-lm.score(token_ids) / len(token_ids))


def lm_to_fsa(lm: NgramLM) -> Fsa:
    """Standard n-gram acceptor: one state per context, epsilon backoff arcs.

    Token arcs carry log conditional probabilities; the destination of an
    arc is the longest stored suffix of (context + token). All states are
    final with weight zero, and the start state is the empty context.
    """
    contexts = sorted(lm.probs.keys(), key=lambda h: (len(h), h))
    state_of = {h: i for i, h in enumerate(contexts)}
    arcs: list[Arc] = []
    max_ctx = lm.order - 1
    for h in contexts:
        src = state_of[h]
        for w, p in sorted(lm.probs[h].items()):
            nxt = (h + (w,))[-max_ctx:] if max_ctx > 0 else ()
            while nxt not in state_of:
                nxt = nxt[1:]
            arcs.append(Arc(src, state_of[nxt], w, math.log(max(p, PROB_FLOOR))))
        if h:
            arcs.append(Arc(src, state_of[h[1:]], EPSILON, math.log(max(lm.bows.get(h, 1.0), PROB_FLOOR))))
    finals = {i: 0.0 for i in range(len(contexts))}
    return Fsa(len(contexts), state_of[()], arcs, finals)


# -- ARPA-style serialization ---------------------------------------------


def write_arpa(lm: NgramLM, path) -> None:
    vocab = lm.vocab
    by_order: list[list[tuple[tuple, int]]] = [[] for _ in range(lm.order)]
    for h, table in lm.probs.items():
        for w in table:
            by_order[len(h)].append((h, w))
    for k in range(lm.order):
        by_order[k].sort(key=lambda hw: tuple(vocab.token(t) for t in hw[0] + (hw[1],)))

    with open(path, "w", encoding="utf-8") as f:
        f.write("\\data\\\n")
        for k in range(lm.order):
            f.write(f"ngram {k + 1}={len(by_order[k])}\n")
        f.write("\n")
        for k in range(lm.order):
            f.write(f"\\{k + 1}-grams:\n")
            for h, w in by_order[k]:
                gram = h + (w,)
                line = repr(math.log(lm.probs[h][w])) + "\t" + " ".join(vocab.token(t) for t in gram)
                if len(gram) < lm.order and gram in lm.bows:
                    line += "\t" + repr(math.log(lm.bows[gram]))
                f.write(line + "\n")
            f.write("\n")
        f.write("\\end\\\n")


def read_arpa(path, vocab: Vocab) -> NgramLM:
    probs: dict[tuple, dict[int, float]] = {}
    bows: dict[tuple, float] = {}
    order = 0
    cur_k = None
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line == "\\data\\" or line == "\\end\\":
            cur_k = None if line else cur_k
            continue
        if line.startswith("ngram "):
            order = max(order, int(line.split("=")[0].split()[1]))
            continue
        if line.endswith("-grams:"):
            cur_k = int(line[1:].split("-")[0])
            continue
        if cur_k is None:
            continue
        parts = raw.split("\t")
        logp = float(parts[0])
        gram = tuple(vocab.id(t) for t in parts[1].split(" "))
        if len(gram) != cur_k:
            raise FormatError(f"bad {cur_k}-gram line: {raw!r}")
        h, w = gram[:-1], gram[-1]
        probs.setdefault(h, {})[w] = math.exp(logp)
        if len(parts) > 2:
            bows[gram] = math.exp(float(parts[2]))
    if order == 0:
        raise FormatError("no ngram counts in header")
    return NgramLM(order, vocab, probs, bows)
