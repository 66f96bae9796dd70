"""Round-tripping the binary interchange formats.

Posterior matrices (the toolkit's stand-in for audio) and sentence
embeddings are little-endian float32 files with ASCII headers, so every
write/read cycle is bit-identical.
"""

import tempfile
from pathlib import Path

import numpy as np

from longalign import core

work = Path(tempfile.mkdtemp())

# a tiny 4-frame posterior matrix over a 5-token vocabulary
probs = np.random.default_rng(0).random((4, 5)) + 1e-3
probs /= probs.sum(axis=1, keepdims=True)
post = core.PosteriorMatrix(hop_ms=40, logp=np.log(probs))
core.write_posteriors(post, work / "demo.lpost")
back = core.read_posteriors(work / "demo.lpost")
print("posterior round trip bit-identical:", back == post)
print("frames:", back.frames, "vocab:", back.vocab_size, "hop_ms:", back.hop_ms)

# embeddings travel with a sidecar index describing merged spans
rows = np.eye(3, dtype=np.float32)
index = [{"sent_id": f"s{i}", "merge_start": i, "merge_len": 1} for i in range(3)]
core.write_embeddings(rows, index, work / "demo.lemb")
rows_back, index_back = core.read_embeddings(work / "demo.lemb")
print("embedding rows equal:", np.array_equal(rows, rows_back))
print("sidecar:", index_back[0])

# vocabularies are frequency-ordered with reserved blank/unknown entries
vocab = core.build_vocab([list("甲乙乙丙丙丙")])
print("vocab order:", vocab.tokens)
print("unknown strings map to <unk>:", vocab.id("never-seen") == core.UNK_ID)
