#!/usr/bin/env python3
"""Active view-selection sweeps over the exploration exponent.

Trains one linear-Q policy per psi and reports mean actions per episode,
known-class accuracy, and unknown recall/precision under greedy evaluation.
Writes active_trials.csv under --out-dir.
"""

import argparse

from scenekit.config import load_config
from scenekit.experiments import run_active_trials


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=None, help="optional YAML config")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--episodes", type=int, default=3000)
    parser.add_argument("--psi", type=float, nargs="+", default=[0.0, 1.5])
    parser.add_argument("--out-dir", default="out/active")
    args = parser.parse_args()
    cfg = load_config(args.config, seed=args.seed, out_dir=args.out_dir, trials=args.trials)
    if args.config is None:
        # single views must stay ambiguous or exploring is never worthwhile
        cfg["corpus"]["template_rate"] = 0.5
    cfg["agent"]["episodes"] = args.episodes
    cfg["reward"]["psi_list"] = args.psi
    result = run_active_trials(cfg, out_dir=cfg["out_dir"])
    print("psi   actions  known_acc  unk_recall  unk_precision")
    for psi in args.psi:
        agg = result["per_psi"][psi]
        print(
            f"{psi:<5} {agg['mean_actions_mean']:.2f}     "
            f"{agg['known_accuracy_mean']:.3f}      "
            f"{agg['unknown_recall_mean']:.3f}       "
            f"{agg['unknown_precision_mean']:.3f}"
        )
    print(f"\nwrote {result['csv']}")


if __name__ == "__main__":
    main()
