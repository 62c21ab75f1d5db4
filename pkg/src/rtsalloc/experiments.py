"""Run methods on datasets and collect reports; shared by the CLI and scripts/."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .allocate import FeasibleSpace
from .config import DatasetConfig, ExperimentConfig, parse_method
from .data import DatasetSplits, PriceSeries, SynthSpec, fit_normalizer, make_windows, normalize, split_chronological
from .evaluation import Baseline, EvalReport, Oracle, evaluate_method
from .pipeline import TrainConfig, TrainedPolicy, train
from .uncertainty import collect_residuals, positional_uncertainty

# Synthetic desk-scale fixture: daily-like cycle of period 24 over a 24-step horizon,
# noisy enough that argmin of a forecast is often wrong.
FIXTURE_SYNTH = SynthSpec(
    kind="sinusoid-trend-noise",
    length=1200,
    amplitude=1.0,
    period=24.0,
    trend_slope=0.001,
    noise_std=0.5,
    base=100.0,
)
FIXTURE_TRAIN = TrainConfig(M=48, H=24, epochs=20, learning_rate=1e-3, batch_size=32)


def fixture_config(seed: int, methods: list[str], **train_overrides) -> ExperimentConfig:
    synth = replace(FIXTURE_SYNTH, seed=seed, name=f"sine-{seed}")
    return ExperimentConfig(
        datasets=[DatasetConfig(synth.name, synth=synth)],
        train=replace(FIXTURE_TRAIN, **train_overrides),
        methods=methods,
        seed=seed,
    )


def make_splits(series: PriceSeries, M: int, H: int, fractions) -> DatasetSplits:
    return split_chronological(make_windows(series, M, H), tuple(fractions))


@dataclass
class CellResult:
    report: EvalReport
    policy: TrainedPolicy | None = None
    mean_r: list[float] = field(default_factory=list)


def baseline_risk(policy: TrainedPolicy, splits: DatasetSplits, gamma: float) -> np.ndarray:
    calib = [normalize(s, policy.normalizer) for s in splits.calibration]
    return positional_uncertainty(collect_residuals(policy.model, calib), gamma)


def build_baseline(method: str, policy: TrainedPolicy, splits: DatasetSplits, gamma: float, r=None) -> Baseline:
    rule, arg = parse_method(method)
    if rule in ("topk-risk", "uncertainty-penalty") and r is None:
        r = baseline_risk(policy, splits, gamma)
    if rule == "uncertainty-penalty":
        return Baseline(rule, policy.model, policy.normalizer, weight=float(arg), r=r)
    return Baseline(rule, policy.model, policy.normalizer, k=int(arg), r=r)


def run_dataset(cfg: ExperimentConfig, index: int = 0) -> dict[str, CellResult]:
    """Train and evaluate every configured method on one dataset."""
    dcfg = cfg.datasets[index]
    seed = cfg.cell_seed(index)
    tcfg = replace(cfg.train, seed=seed)
    splits = make_splits(dcfg.load(), tcfg.M, tcfg.H, cfg.splits)
    stats = fit_normalizer(splits.train, allow_degenerate=True)
    echo = {f.name: getattr(tcfg, f.name) for f in fields(TrainConfig)}
    cache: dict[str, TrainedPolicy] = {}

    def trained(method: str, **overrides) -> TrainedPolicy:
        key = method + repr(sorted(overrides.items()))
        if key not in cache:
            cache[key] = train(replace(tcfg, method=method, **overrides), splits, stats)
        return cache[key]

    out: dict[str, CellResult] = {}
    for method in cfg.methods:
        rule, _ = parse_method(method)
        if rule in ("predict-only", "rts-pto", "rts-pno"):
            obj = policy = trained(rule)
        elif rule == "rts-pno-fixed":
            obj = policy = trained("rts-pno", adaptive=False)
        else:
            policy = trained("predict-only")
            obj = build_baseline(method, policy, splits, tcfg.gamma)
        rep = evaluate_method(
            obj, splits.test, dataset=dcfg.name, seed=seed, config=echo,
            oracle_unconstrained=cfg.oracle_unconstrained,
        )
        rep.method = method
        mean_r = [h.mean_r for h in policy.history if h.mean_r is not None] if obj is policy else []
        out[method] = CellResult(rep, obj if obj is policy else None, mean_r)
    if cfg.include_oracle:
        rep = evaluate_method(
            Oracle(FeasibleSpace(tcfg.H, tcfg.caps), stats), splits.test, dataset=dcfg.name, seed=seed, config=echo
        )
        out["oracle"] = CellResult(rep)
    return out


def alpha_sensitivity(alphas, seeds, method: str = "rts-pno", **train_overrides) -> list[dict]:
    """Test regret of one method across risk-quantile levels and seeds."""
    rows = []
    for alpha in alphas:
        for seed in seeds:
            cfg = fixture_config(seed, [method], alpha=alpha, **train_overrides)
            rep = run_dataset(cfg)[method].report
            rows.append({"alpha": alpha, "seed": seed, "regret": rep.regret, "relative_regret": rep.relative_regret})
    return rows
