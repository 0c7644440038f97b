#!/usr/bin/env python3
"""Closed-set baseline rows on the default synthetic corpus.

Compares object-presence and scenario features, oracle and noisy detectors,
and the logistic vs open-set classifiers on single-view and all-view
accuracy.  Writes closed_set.csv under --out-dir.
"""

import argparse

from scenekit.config import load_config
from scenekit.experiments import run_closed_set


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=None, help="optional YAML config")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out-dir", default="out/closed_set")
    args = parser.parse_args()
    cfg = load_config(args.config, seed=args.seed, out_dir=args.out_dir)
    result = run_closed_set(cfg, out_dir=cfg["out_dir"])
    width = max(len(r["method"]) for r in result["rows"])
    print(f"{'method':<{width}}  single-view  all-view")
    for row in result["rows"]:
        print(
            f"{row['method']:<{width}}  {row['single_view_accuracy']:.3f}        "
            f"{row['all_view_accuracy']:.3f}"
        )
    print(f"\nwrote {result['csv']}")


if __name__ == "__main__":
    main()
