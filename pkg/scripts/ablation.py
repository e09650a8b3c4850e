"""Ranging ablation over the six pipeline arms on one synthetic scenario.

    python scripts/ablation.py --config configs/ablation.yaml --frames 2000 --out results/ablation
"""

import argparse
import logging
from pathlib import Path

from fusetrack.cli import write_comparison
from fusetrack.config import load_config
from fusetrack.evaluation import depth_table, ranging_table
from fusetrack.experiments import run_ablation


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default="configs/ablation.yaml")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    parser.add_argument("--frames", type=int, default=2000, help="frames in the test scenario")
    parser.add_argument("--test-seed", type=int, default=1)
    parser.add_argument("--train-frames", type=int, default=500)
    parser.add_argument("--train-seed", type=int, default=100)
    parser.add_argument("--out", help="directory for comparison tables and reports")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = load_config(args.config, args.set)
    result = run_ablation(cfg, args.test_seed, args.frames, args.train_seed, args.train_frames)
    print(ranging_table(result.reports))
    print(depth_table(result.reports))
    print(f"{result.seconds:.1f} s")
    if args.out:
        out = Path(args.out)
        write_comparison(result.reports, out)
        for rep in result.reports:
            (out / f"{rep.name}.json").write_text(rep.to_json(), encoding="utf-8")


if __name__ == "__main__":
    main()
