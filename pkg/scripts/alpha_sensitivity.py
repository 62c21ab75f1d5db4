"""Test regret of RTS-PnO across risk-quantile levels alpha."""

import argparse
from collections import defaultdict

import numpy as np

from rtsalloc.experiments import alpha_sensitivity


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", default="0.1,0.25,0.5,0.75,1.0")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--method", default="rts-pno", choices=["rts-pto", "rts-pno"])
    args = ap.parse_args()

    alphas = [float(a) for a in args.alphas.split(",")]
    by_alpha = defaultdict(list)
    for row in alpha_sensitivity(alphas, range(args.seeds), args.method):
        by_alpha[row["alpha"]].append(row["regret"])
    print("alpha,mean_regret,std_regret")
    for a in alphas:
        print(f"{a},{np.mean(by_alpha[a]):.6f},{np.std(by_alpha[a]):.6f}")


if __name__ == "__main__":
    main()
