"""Adaptive per-epoch uncertainty vs uncertainty frozen after the first epoch."""

import argparse

from rtsalloc.experiments import fixture_config, run_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()

    print("seed,adaptive,fixed")
    totals = [0.0, 0.0]
    for seed in range(args.seeds):
        cells = run_dataset(fixture_config(seed, ["rts-pno", "rts-pno-fixed"]))
        a, f = cells["rts-pno"].report.regret, cells["rts-pno-fixed"].report.regret
        totals[0] += a
        totals[1] += f
        print(f"{seed},{a:.6f},{f:.6f}")
    print(f"mean,{totals[0] / args.seeds:.6f},{totals[1] / args.seeds:.6f}")


if __name__ == "__main__":
    main()
