"""Per-epoch mean positional uncertainty during RTS-PnO training, as CSV.

    python3 scripts/uncertainty_trace.py --seeds 5 > mean_r.csv
"""

import argparse

from rtsalloc.experiments import fixture_config, run_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=20)
    args = ap.parse_args()

    print("seed,epoch,mean_r")
    for seed in range(args.seeds):
        cell = run_dataset(fixture_config(seed, ["rts-pno"], epochs=args.epochs))["rts-pno"]
        print(f"{seed},0,{cell.policy.initial_r.mean()!r}")
        for epoch, v in enumerate(cell.mean_r, start=1):
            print(f"{seed},{epoch},{v!r}")


if __name__ == "__main__":
    main()
