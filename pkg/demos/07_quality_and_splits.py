"""Quality filtering, CER-bin sampling, and constrained corpus splits."""

from longalign import quality, splits, synth
from longalign.core import AlignedSegment

# --- quality statistics and hard-threshold filtering
hyp = list("今日會議通過預算")
ref = list("今日會議通過財政預算")
stats = quality.compute_stats(hyp, ref)
print(f"CER {stats.cer:.3f}, longest error run {stats.max_consecutive_errors}, "
      f"error ratio {stats.error_ratio:.3f}")

seg = AlignedSegment(utt_id="u0", doc_id="d0", speaker_id="s0", sent_ids=["s0"],
                     start_frame=0, end_frame=50, hop_ms=40,
                     text_src="".join(ref), text_tgt="the budget passed")
accepted, rejected = quality.post_filter([(seg, stats)], quality.FilterThresholds())
print("accepted by default thresholds:", len(accepted) == 1)

# --- CER bins drive the manual labeling sheet
import numpy as np
rng = np.random.default_rng(0)
pool = []
for k in range(300):
    st = quality.QualityStats(float(rng.random() * 0.8), 0, 0.0, 10, 10)
    s = AlignedSegment(utt_id=f"u{k}", doc_id="d", speaker_id="s", sent_ids=[],
                       start_frame=0, end_frame=10, hop_ms=40, text_src="x", text_tgt="y")
    pool.append((s, st))
sample = quality.bin_sample(pool, bin_edges=[0.1, 0.3, 0.5], per_bin=20, seed=1)
print(f"\nsampled {len(sample)} utterances across CER bins for manual labeling")

# --- constrained splits over a synthetic manifest
manifest = synth.gen_manifest(n_docs=120, n_speakers=40, seed=2)
assignment = splits.make_splits(manifest, seed=9)
for name, rep in assignment.report["splits"].items():
    print(f"{name:8s} {rep['hours']:6.2f}h (target {rep['target_hours']:6.2f}h) "
          f"gender L1 {rep['gender_l1_deviation']:.4f} constraints {rep['constraints']}")
