"""Flexible alignment: skip arcs, factor transducers, sliding windows.

The flexible graph is a linear sentence chain where every sentence can be
bypassed by a weighted skip arc, so transcript-only sentences drop out of
the alignment instead of corrupting it. Long audio decodes in overlapping
windows whose merged output matches the whole-utterance decode.
"""

from longalign import decode, synth

# a meeting where ~20% of transcript sentences were never spoken
bundle = synth.gen_meeting(synth.NoiseParams(p_unspoken=0.2),
                           synth.SynthSize(n_sentences=12, vocab_size=25), seed=5)
sentences = [bundle.vocab.ids(s) for s in bundle.transcript_sentences]

graph = decode.build_flexible_graph(sentences, skip_weight=-8.0)
print(f"flexible graph: {graph.num_states} states, {len(graph.arcs)} arcs "
      f"({len(sentences)} skip arcs among them)")

factor = decode.build_factor_transducer(sentences[:2])
print(f"factor transducer over 2 sentences: {factor.num_states} states, "
      f"all final, accepts any substring")

whole = decode.align_sentences_flexible(bundle.posteriors, sentences, skip_weight=-8.0)
print("\nwhole-utterance decode:")
for i, (entry, gold) in enumerate(zip(whole.entries, bundle.gold)):
    truth = "spoken" if gold.spoken else "UNSPOKEN"
    if entry.status == "aligned":
        mark = "exact" if (entry.start_frame, entry.end_frame) == (gold.start_frame, gold.end_frame) else "off"
        print(f"  s{i:02d} [{truth:8s}] aligned {entry.start_frame:4d}..{entry.end_frame:4d} ({mark})")
    else:
        print(f"  s{i:02d} [{truth:8s}] skipped")

windows = decode.WindowSpec(len_frames=200, overlap_frames=60)
windowed = decode.flex_align_window(bundle.posteriors, sentences, -8.0, windows)
same = all(
    a.status == b.status and (a.status != "aligned" or
                              (a.start_frame, a.end_frame) == (b.start_frame, b.end_frame))
    for a, b in zip(whole.entries, windowed.entries))
print(f"\nsliding windows ({len(decode._windows(bundle.posteriors.frames, windows))} windows)"
      f" reproduce the whole-utterance result: {same}")
