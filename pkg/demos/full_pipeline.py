"""Every pipeline stage at toy scale, driven through the command-line entry point.

The same sequence with ``configs/default.ini`` is the desk-scale run.  Each
stage appends a line to ``runs.jsonl`` with hashes of what it read and
wrote, so a rerun under the same seed can be checked file by file.

    python3 demos/full_pipeline.py [config]
"""

import json
import sys
from pathlib import Path

from latent_affordance import pipeline
from latent_affordance.cli import run

config = sys.argv[1] if len(sys.argv) > 1 else str(Path(__file__).parent.parent / "configs" / "smoke.ini")
cfg = pipeline.load_config(config)
root = cfg.output_root

for step in (["gen-data"], ["train", "vaed"], ["train", "trajvae"], ["train", "policy"], ["evaluate"]):
    code = run([*step, "--config", config])
    if code:
        sys.exit(code)

for entry in pipeline.read_runs(root):
    print(f"{entry['stage']:9s} {entry['wall_time_s']:7.1f} s  config {entry['config_hash'][:10]}")

for name in ("vaed", "trajvae", "policy"):
    print(name, json.dumps(json.loads((root / "reports" / f"{name}.json").read_text()), indent=None)[:160])
print("figures:", *sorted(p.name for p in (root / "eval").glob("*.png")))
