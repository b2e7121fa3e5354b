"""Run the command-line pipeline for a few seeds and aggregate the results.

Equivalent shell session, per seed::

    python -m voxfader gen-data --config run/seed1.json
    python -m voxfader pretrain --config run/seed1.json
    python -m voxfader train    --config run/seed1.json
    python -m voxfader train    --config run/seed1.json --no-adversarial
    python -m voxfader eval     --config run/seed1.json --ckpt run/seed1
    python -m voxfader report   --in run --out run/summary.md

Each seed takes roughly a minute and a half on one core.
"""

import argparse
import json
from pathlib import Path

from voxfader.cli import main

parser = argparse.ArgumentParser()
parser.add_argument("--out", default="demo-run")
parser.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
args = parser.parse_args()

root = Path(args.out).resolve()
root.mkdir(parents=True, exist_ok=True)
for seed in args.seeds:
    cfg = root / f"seed{seed}.json"
    cfg.write_text(json.dumps({"seed": seed, "output_dir": f"seed{seed}"}, indent=2))
    for argv in (["gen-data"], ["pretrain"], ["train"], ["train", "--no-adversarial"]):
        if main(argv + ["--config", str(cfg)]) != 0:
            raise SystemExit(f"{argv[0]} failed for seed {seed}")
    main(["eval", "--config", str(cfg), "--ckpt", str(root / f"seed{seed}")])
    print(f"seed {seed} done")

main(["report", "--in", str(root), "--out", str(root / "summary.md")])
print((root / "summary.md").read_text())
