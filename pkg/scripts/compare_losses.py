"""Held-out ranking accuracy of mask- versus affinity-loss DAN training.

    python scripts/compare_losses.py --matrices 500 --epochs 20
"""

import argparse

from fusetrack.config import load_config
from fusetrack.experiments import compare_dan_losses


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default="configs/ablation.yaml")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    parser.add_argument("--matrices", type=int, default=500)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--inter-frame", action="store_true", help="add frame-to-frame same-sensor matrices")
    args = parser.parse_args()

    overrides = list(args.set)
    if args.epochs is not None:
        overrides.append(f"run.dan_epochs={args.epochs}")
    cfg = load_config(args.config, overrides)
    acc = compare_dan_losses(cfg, n_matrices=args.matrices, inter_frame=args.inter_frame)
    for loss, value in acc.items():
        print(f"{loss:>8s} loss: held-out ranking accuracy {value:.4f}")


if __name__ == "__main__":
    main()
