"""Sentence-level alignment toolkit for long audio with non-verbatim transcripts.

The library turns long recordings (represented as frame posterior matrices),
loose transcripts, and translations into sentence-aligned triplets:
transcript preprocessing, embedding-based bitext alignment, document-biased
n-gram decoding, anchor-based first-pass alignment, sliding-window flexible
alignment with skip arcs, quality filtering, and constraint-driven corpus
splits. A synthetic meeting generator with gold labels exercises the whole
pipeline end to end.
"""

from . import anchor, bitext, cli, core, decode, lm, quality, splits, synth, textproc
from .core import (
    BLANK,
    BLANK_ID,
    EPSILON,
    UNK,
    UNK_ID,
    Arc,
    Fsa,
    PosteriorMatrix,
    UtteranceManifestRow,
    Vocab,
    build_vocab,
    read_embeddings,
    read_manifest,
    read_posteriors,
    write_embeddings,
    write_manifest,
    write_posteriors,
)

__version__ = "0.1.0"
