"""Command line: ``rtsalloc {synth,train,eval,bench}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from .allocate import FeasibleSpace
from .config import ExperimentConfig, load_config
from .data import SynthSpec, fit_normalizer, generate_synthetic, load_csv, series_to_csv
from .errors import ConfigError, RtsAllocError
from .evaluation import Oracle, evaluate_method, rank_table
from .experiments import build_baseline, make_splits, run_dataset
from .files import atomic_write_text, dumps_json
from .pipeline import load_policy, save_policy, train

SCHEMA_ID = "rtsalloc-report/1"
log = logging.getLogger("rtsalloc")


def report_schema() -> dict:
    return json.loads(resources.files("rtsalloc").joinpath("report_schema.json").read_text(encoding="utf-8"))


def _report_doc(command: str, config: dict, reports, ranks=None) -> dict:
    return {
        "schema": SCHEMA_ID,
        "command": command,
        "config": config,
        "reports": [r.to_dict() for r in reports],
        "rank_table": ranks,
    }


def _per_slot_csv(rows) -> str:
    lines = ["dataset,method,slot,regret"]
    for rep in rows:
        for i, v in enumerate(rep.per_sample_regret):
            lines.append(f"{rep.dataset},{rep.method},{i},{float(v)!r}")
    return "\n".join(lines) + "\n"


def _out_dir(args, cfg: ExperimentConfig | None = None) -> Path:
    out = args.out or (cfg.output_dir if cfg else None)
    if not out:
        raise ConfigError("output_dir: pass --out or set output_dir in the config")
    return Path(out)


def _load_cfg(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_synth(args) -> int:
    spec = SynthSpec(
        kind=args.kind, length=args.length, amplitude=args.amplitude, period=args.period,
        trend_slope=args.trend_slope, noise_std=args.noise_std, ar_coefficient=args.ar_coefficient,
        base=args.base, seed=args.seed if args.seed is not None else 0, name=args.name,
    )
    series = generate_synthetic(spec)
    out = Path(args.out or ".")
    path = out / f"{spec.name}.csv"
    atomic_write_text(path, series_to_csv(series))
    print(path)
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    index, dcfg = cfg.dataset(args.dataset)
    tcfg = replace(cfg.train, seed=cfg.cell_seed(index))
    if tcfg.method not in ("predict-only", "rts-pto", "rts-pno"):
        raise ConfigError(f"train.method: {tcfg.method!r} is not trainable")
    splits = make_splits(dcfg.load(), tcfg.M, tcfg.H, cfg.splits)
    policy = train(tcfg, splits, fit_normalizer(splits.train, allow_degenerate=True))
    targets = [out / n for n in ("model.json", "policy.json", "history.csv")]
    try:
        save_policy(policy, out)
    except BaseException:
        for p in targets:
            p.unlink(missing_ok=True)
        raise
    last = policy.history[-1]
    print(f"{out}: method={policy.method} best_epoch={policy.best_epoch} final_loss={last.train_loss:.6g}")
    return 0


def cmd_eval(args) -> int:
    policy = load_policy(args.checkpoint)
    if args.config:
        cfg = _load_cfg(args)
        index, dcfg = cfg.dataset(args.dataset)
        series, name, fractions = dcfg.load(), dcfg.name, cfg.splits
        oracle_unconstrained = cfg.oracle_unconstrained
        config_echo = cfg.echo()
    elif args.csv:
        series = load_csv(args.csv, args.column)
        name, fractions, oracle_unconstrained = series.name, (0.7, 0.1, 0.2), False
        config_echo = {"csv": str(args.csv), "column": args.column}
    else:
        raise ConfigError("dataset: pass --config or --csv")
    out = _out_dir(args)
    gamma = policy.risk_profile.gamma if policy.risk_profile else args.gamma
    splits = make_splits(series, policy.model.M, policy.model.H, fractions)
    seed = args.seed if args.seed is not None else 0
    reports = []
    for method in [m for m in args.methods.split(",") if m]:
        obj = policy if method == "policy" else build_baseline(method, policy, splits, gamma)
        rep = evaluate_method(obj, splits.test, dataset=name, seed=seed, oracle_unconstrained=oracle_unconstrained)
        rep.method = policy.method if method == "policy" else method
        reports.append(rep)
    if args.include_oracle:
        oracle = Oracle(FeasibleSpace(policy.model.H, policy.space.caps), policy.normalizer)
        reports.append(evaluate_method(oracle, splits.test, dataset=name, seed=seed))
    config_echo["checkpoint_method"] = policy.method
    atomic_write_text(out / "report.json", dumps_json(_report_doc("eval", config_echo, reports)))
    atomic_write_text(out / "per_slot_regret.csv", _per_slot_csv(reports))
    print(out / "report.json")
    return 0


def cmd_bench(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    n_methods = len(cfg.methods) + (1 if cfg.include_oracle else 0)
    if n_methods < 2:
        raise ConfigError("methods: bench needs at least two methods")
    grid, reports, mean_r_rows = {}, [], ["dataset,method,epoch,mean_r"]
    for i, dcfg in enumerate(cfg.datasets):
        try:
            cells = run_dataset(cfg, i)
        except RtsAllocError as exc:
            raise RtsAllocError(f"cell {dcfg.name}: {exc}") from exc
        grid[dcfg.name] = {m: c.report for m, c in cells.items()}
        for m, c in cells.items():
            reports.append(c.report)
            for e, v in enumerate(c.mean_r, start=1):
                mean_r_rows.append(f"{dcfg.name},{m},{e},{v!r}")
            log.info("%s / %s: regret %.6g", dcfg.name, m, c.report.regret)
    ranks = rank_table(grid)
    grid_lines = ["dataset,method,regret,relative_regret,mse,mae,n_samples"]
    grid_lines += [
        f"{r.dataset},{r.method},{r.regret!r},{r.relative_regret!r},{r.mse!r},{r.mae!r},{r.n_samples}" for r in reports
    ]
    atomic_write_text(out / "report.json", dumps_json(_report_doc("bench", cfg.echo(), reports, ranks)))
    atomic_write_text(out / "grid.csv", "\n".join(grid_lines) + "\n")
    atomic_write_text(out / "mean_r.csv", "\n".join(mean_r_rows) + "\n")
    atomic_write_text(out / "per_slot_regret.csv", _per_slot_csv(reports))
    rank_lines = ["method,avg_rank_regret,avg_rank_relative_regret"]
    rank_lines += [f"{m},{ranks['regret'][m]!r},{ranks['relative_regret'][m]!r}" for m in ranks["regret"]]
    atomic_write_text(out / "rank_table.csv", "\n".join(rank_lines) + "\n")
    print(out / "report.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rtsalloc", description="Risk-aware fund allocation over a forecast horizon.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic price series as CSV")
    s.add_argument("--kind", default="sinusoid-trend-noise", choices=["constant", "sinusoid-trend-noise", "ar1-noise"])
    s.add_argument("--length", type=int, default=1000)
    s.add_argument("--amplitude", type=float, default=1.0)
    s.add_argument("--period", type=float, default=24.0)
    s.add_argument("--trend-slope", type=float, default=0.0)
    s.add_argument("--noise-std", type=float, default=0.0)
    s.add_argument("--ar-coefficient", type=float, default=0.5)
    s.add_argument("--base", type=float, default=100.0)
    s.add_argument("--name", default="synthetic")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train the configured method")
    t.add_argument("--config", required=True)
    t.add_argument("--out")
    t.add_argument("--seed", type=int)
    t.add_argument("--dataset")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint and baselines on a dataset")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--config")
    e.add_argument("--csv")
    e.add_argument("--column", default="price")
    e.add_argument("--dataset")
    e.add_argument("--methods", default="policy", help="comma list: policy, topk-forecast:k, topk-risk:k, ...")
    e.add_argument("--gamma", type=float, default=0.9, help="coverage for risk baselines without a risk profile")
    e.add_argument("--include-oracle", action="store_true")
    e.add_argument("--out")
    e.add_argument("--seed", type=int)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="train and evaluate every (dataset, method) cell")
    b.add_argument("--config", required=True)
    b.add_argument("--out")
    b.add_argument("--seed", type=int)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (RtsAllocError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
