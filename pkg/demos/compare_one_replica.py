"""Score both models on one simulated replica of each setting.

Setting 1 draws grouped curves with per-curve shape deviations; setting 2
draws shifted and scaled copies of a single shape. The common-shape model is
fitted to each group separately and its errors averaged. Takes a few minutes.

    python demos/compare_one_replica.py [--sweeps 4500]
"""

import argparse

from funcalign.harness import RunConfig, compare_models


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sweeps", type=int, default=4500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cfg = RunConfig.simulation(n_iter=args.sweeps, burn_in=args.sweeps // 3)
    rows = compare_models(1, [1, 2], cfg, seed0=args.seed)
    print("setting  model      error")
    for _, model, setting, err in rows:
        print(f"{setting:7d}  {model:9s}  {err:.4f}")


if __name__ == "__main__":
    main()
