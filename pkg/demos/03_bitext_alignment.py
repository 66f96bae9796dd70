"""Monotone bitext alignment over sentence embeddings.

The aligner pairs source and target sentences 1-1, merges up to max_merge
neighbors, and marks unmatched sentences as insertions/deletions; costs are
cosine distances normalized by a random-pair baseline, and pairs scoring
above 0.627 are discarded.
"""

import numpy as np

from longalign import bitext

rng = np.random.default_rng(7)
dim = 24

# ten "sentences"; the target drops one and merges two others
src_vecs = rng.normal(size=(10, dim))
tgt_list = [src_vecs[i] for i in range(10) if i != 3]          # sentence 3 untranslated
tgt_list[5] = tgt_list[5] + tgt_list[6]                        # 6+7 merged downstream
del tgt_list[6]
tgt_vecs = np.stack(tgt_list)

src = bitext.EmbeddingSet.from_vectors(src_vecs)
tgt = bitext.EmbeddingSet.from_vectors(tgt_vecs)
pairs = bitext.align_sentences(src, tgt)

for p in pairs:
    kind = "1-1"
    if p.src_len == 0:
        kind = "insertion"
    elif p.tgt_len == 0:
        kind = "deletion"
    elif p.src_len != p.tgt_len:
        kind = f"{p.src_len}-{p.tgt_len} merge"
    print(f"src[{p.src_start}:{p.src_start + p.src_len}] ~ "
          f"tgt[{p.tgt_start}:{p.tgt_start + p.tgt_len}]  cost={p.cost:.3f}  ({kind})")

kept, dropped = bitext.filter_alignments(pairs)
print(f"\nfilter at {bitext.DEFAULT_SCORE_THRESHOLD}: kept {len(kept)}, dropped {len(dropped)}")
