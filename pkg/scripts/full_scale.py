"""Opt-in full-size run: n=599, 2e6 sweeps, a save every 100 sweeps, analysis of the last 50 saves.

Expect hours of single-core time. Usage: python scripts/full_scale.py --preset square --out full_run
"""

import argparse
import sys

from loopcast.cli import main

ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
ap.add_argument("--preset", default="square")
ap.add_argument("--out", default="full_run")
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

common = ["--preset", args.preset, "--out-dir", args.out, "--n", "599"]
code = main(["sample", *common, "--seed", str(args.seed), "--iterations", "2000000", "--thin", "100",
             "--out", f"{args.out}/trace.jsonl"])
if code == 0:
    code = main(["analyze", *common, "--trace", f"{args.out}/trace.jsonl", "--last", "50", "--grid", "200"])
sys.exit(code)
