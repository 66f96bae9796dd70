"""Witten-Bell n-gram models, document biasing, and the decoding graph.

A document model interpolated with a background model favors in-document
word sequences during decoding; converting the model to an FSA preserves
scores exactly (best accepting path = model score).
"""

import numpy as np

from longalign import core, decode, lm, textproc

vocab = core.build_vocab([list("會議員主席預算案今日通過反對")])
ids = lambda text: vocab.ids(textproc.tokenize(text))

doc_text = ["預算案今日通過", "主席宣布通過", "議員支持預算案"]
bg_text = ["反對通過", "今日會議", "主席發言", "議員反對"] * 3

doc_lm = lm.train_ngram([ids(t) for t in doc_text], 3, vocab)
bg_lm = lm.train_ngram([ids(t) for t in bg_text], 3, vocab)
biased = lm.interpolate(doc_lm, bg_lm, lam=0.7)

probe = "預算案通過"
print(f"perplexity of {probe!r}:")
print("  background model:", round(lm.perplexity(bg_lm, ids(probe)), 2))
print("  doc-biased model:", round(lm.perplexity(biased, ids(probe)), 2))

uniform = lm.NgramLM.uniform(vocab)
print("\nuniform model perplexity equals vocab size:",
      round(lm.perplexity(uniform, ids("主席")), 6), "=", len(vocab) - 1)

fsa = lm.lm_to_fsa(biased)
print(f"\ndecoding graph: {fsa.num_states} states, {len(fsa.arcs)} arcs")
seq = ids("主席通過")
print("model score:", round(biased.score(seq), 6),
      "| best FSA path:", round(decode.fsa_sequence_score(fsa, seq), 6))
