"""Grid search over the hand-crafted similarity weights on synthetic association matrices.

    python scripts/grid_search.py --frames 500 --step 0.1
"""

import argparse

from fusetrack.affinity import grid_search_weights
from fusetrack.config import load_config
from fusetrack.experiments import with_scenario
from fusetrack.scenario import dan_dataset_features, generate_scenario


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default="configs/ablation.yaml")
    parser.add_argument("--frames", type=int, default=500)
    parser.add_argument("--seed", type=int, default=100)
    parser.add_argument("--step", type=float, default=0.1)
    args = parser.parse_args()

    cfg = with_scenario(load_config(args.config), args.seed, args.frames)
    scen = generate_scenario(cfg)
    feats = dan_dataset_features(scen.frames, scen.gt, cfg.camera.model())
    best, acc = grid_search_weights(feats, cfg.run.weights, args.step)
    print(f"searched {len(feats)} matrices with step {args.step}")
    print(f"best weights: range {best.w_range:.2f}, azimuth {best.w_azimuth:.2f}, velocity {best.w_velocity:.2f}")
    print(f"ranking accuracy {acc:.4f}")


if __name__ == "__main__":
    main()
