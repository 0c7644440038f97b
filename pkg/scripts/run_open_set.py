#!/usr/bin/env python3
"""Open-set recognition trials: random known/unknown class splits, a
pseudo-unknown calibration holdout, and evaluation on everything.

Writes open_set_trials.csv under --out-dir.
"""

import argparse

from scenekit.config import load_config
from scenekit.experiments import run_open_set_trials


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=None, help="optional YAML config")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--out-dir", default="out/open_set")
    parser.add_argument(
        "--oracle", action="store_true", help="use the noise-free oracle detector"
    )
    args = parser.parse_args()
    cfg = load_config(args.config, seed=args.seed, out_dir=args.out_dir, trials=args.trials)
    if args.oracle:
        cfg["detector"] = {"mode": "oracle", "noise_sigma": 0.0, "flip_rate": 0.0, "seed": 0}
    result = run_open_set_trials(cfg, out_dir=cfg["out_dir"])
    agg = result["aggregate"]
    for row in result["rows"]:
        print(
            f"trial {row['trial']}: known_acc={row['known_accuracy']:.3f} "
            f"unk_recall={row['unknown_recall']:.3f} "
            f"unk_precision={row['unknown_precision'] if row['unknown_precision'] is None else round(row['unknown_precision'], 3)} "
            f"auprc={row['unknown_auprc']:.3f} "
            f"(delta_o={row['delta_o']}, delta_r={row['delta_r']})"
        )
    print(
        f"\naggregate: known_acc={agg['known_accuracy_mean']:.3f}±{agg['known_accuracy_std']:.3f} "
        f"unk_recall={agg['unknown_recall_mean']:.3f}±{agg['unknown_recall_std']:.3f}"
    )
    print(f"wrote {result['csv']}")


if __name__ == "__main__":
    main()
