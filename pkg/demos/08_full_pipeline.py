"""The whole corpus-creation pipeline on a synthetic meeting corpus.

Equivalent CLI:
    longalign synth --out-dir bundle --docs 4 --sentences 30 --seed 7
    longalign pipeline --bundle-dir bundle --out-dir out --seed 17
    longalign validate --pipeline-out out
    longalign eval --bundle-dir bundle --out-dir out
"""

import json
import tempfile
from pathlib import Path

from longalign import cli, core, synth

work = Path(tempfile.mkdtemp())
bundle = work / "bundle"
for d in range(4):
    meeting = synth.gen_meeting(
        synth.NoiseParams(p_unspoken=0.1),
        synth.SynthSize(n_sentences=30, vocab_size=40),
        seed=7, doc_index=d)
    synth.write_bundle(meeting, bundle)
print("bundle at", bundle)

config = cli.load_config(None)
config["seed"] = 17
report = cli.run_pipeline(config, bundle, work / "out")
print("\nstages:", " -> ".join(s["stage"] for s in report["stages"]), "| ok:", report["ok"])

manifest = core.read_manifest(work / "out" / "manifest.jsonl")
print(f"\n{len(manifest)} aligned triplets; first one:")
row = manifest[0]
print(f"  [{row.start_s:.2f}s..{row.end_s:.2f}s] {row.speaker_id} ({row.gender})")
print(f"  src: {row.text_src}")
print(f"  tgt: {row.text_tgt}")
print(f"  quality: {row.quality}")

problems = cli.validate_pipeline_output(work / "out")
print("\nvalidator problems:", problems or "none")

assignment = json.loads((work / "out" / "assignment.json").read_text())
sizes = {name: rep["n_docs"] for name, rep in assignment["report"]["splits"].items()}
print("split sizes (docs):", sizes)
print("split perplexities:", {k: round(v, 1) if v else v
                              for k, v in assignment["report"]["split_perplexity"].items()})
