"""Regret of every method on the noisy sinusoid fixture, averaged over seeds.

    python3 scripts/method_comparison.py --seeds 10 --noise 0.5
"""

import argparse
from dataclasses import replace

import numpy as np

from rtsalloc.experiments import fixture_config, run_dataset

METHODS = ["predict-only", "rts-pto", "rts-pno", "topk-forecast:1", "topk-forecast:5", "topk-risk:1", "topk-risk:5"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--noise", type=float, default=0.5)
    ap.add_argument("--epochs", type=int, default=20)
    args = ap.parse_args()

    rows = {m: [] for m in METHODS + ["oracle"]}
    for seed in range(args.seeds):
        cfg = fixture_config(seed, METHODS, epochs=args.epochs)
        dataset = replace(cfg.datasets[0], synth=replace(cfg.datasets[0].synth, noise_std=args.noise))
        cfg = replace(cfg, datasets=[dataset], include_oracle=True)
        for m, cell in run_dataset(cfg).items():
            rows[m].append((cell.report.regret, cell.report.relative_regret, cell.report.mse))
    print(f"{'method':<18}{'regret':>10}{'R.R.':>10}{'mse':>10}")
    for m, vals in rows.items():
        reg, rr, mse = np.mean(vals, axis=0)
        print(f"{m:<18}{reg:>10.4f}{rr:>10.5f}{mse:>10.4f}")


if __name__ == "__main__":
    main()
