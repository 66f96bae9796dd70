"""First-pass paragraph alignment with anchors.

Segments decode against a document-biased model; the concatenated
hypothesis aligns against the full transcript; well-matched regions become
anchors that pin transcript regions to audio regions, bounding what the
sentence-level pass has to search.
"""

from longalign import anchor, synth, textproc

bundle = synth.gen_meeting(synth.NoiseParams(p_sub=0.05, p_unspoken=0.1),
                           synth.SynthSize(n_sentences=40, vocab_size=35), seed=11)
doc = textproc.doc_from_text(bundle.transcript_text, "demo")
segments = [bundle.posteriors.slice_frames(s, e) for s, e in bundle.segments]
print(f"{len(doc.sentences)} transcript sentences, {len(segments)} audio segments")

regions, hyp_tokens, hyp_spans = anchor.first_pass(
    segments, doc, bundle.vocab,
    anchor.FirstPassConfig(beam=12.0),
    segment_offsets=[s for s, _ in bundle.segments],
    return_hyp=True)

ref_tokens = bundle.vocab.ids(doc.all_tokens())
ops = anchor.align_text(hyp_tokens, ref_tokens)
errors = sum(1 for op in ops if op.kind != "match")
print(f"decoded {len(hyp_tokens)} tokens vs {len(ref_tokens)} transcript tokens "
      f"({errors} edit errors from noise + unspoken text)")

print(f"\n{len(regions)} audio-to-transcript regions:")
for r in regions[:8]:
    print(f"  frames {r.audio_span[0]:5d}..{r.audio_span[1]:5d} -> "
          f"sentences {r.ref_sentence_range[0]:3d}..{r.ref_sentence_range[1]:3d}")

unspoken = [i for i, g in enumerate(bundle.gold) if not g.spoken]
print("\nunspoken transcript sentences:", unspoken)
print("(their tokens sit between anchors, so windows treat them as skippable)")
