"""Decision and forecasting metrics, heuristic baselines, report aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .allocate import Allocation, FeasibleSpace, solve_allocation, solve_batch
from .data import NormalizerStats, WindowSample, denormalize, normalize, stack
from .errors import IncompleteGrid, InvalidSpec, NonPositiveOptimalCost
from .forecast import ForecastModel, forward


def regret(a_hat, y, space: FeasibleSpace) -> float:
    """|a*(y).y - a_hat.y| with the hindsight optimum taken over ``space``."""
    y = np.asarray(y, dtype=float)
    w = a_hat.weights if isinstance(a_hat, Allocation) else np.asarray(a_hat, dtype=float)
    return abs(solve_allocation(y, space).cost(y) - float(w @ y))


def relative_regret(regret_value: float, optimal_cost: float) -> float:
    if not optimal_cost > 0:
        raise NonPositiveOptimalCost(f"optimal cost {optimal_cost} is not positive")
    return regret_value / optimal_cost


def _lowest_k(scores: np.ndarray, k: int) -> np.ndarray:
    H = scores.shape[-1]
    if not 1 <= k <= H:
        raise InvalidSpec(f"k must be in [1, {H}], got {k}")
    idx = np.argsort(scores, axis=-1, kind="stable")[..., :k]
    out = np.zeros(scores.shape)
    np.put_along_axis(out, idx, 1.0 / k, axis=-1)
    return out


def baseline_topk_forecast(yhat, k: int = 1) -> Allocation:
    return Allocation(_lowest_k(np.asarray(yhat, dtype=float), k))


def baseline_topk_risk_avoid(yhat, r, k: int = 1) -> Allocation:
    yhat, r = np.asarray(yhat, dtype=float), np.asarray(r, dtype=float)
    if yhat.shape != r.shape:
        raise InvalidSpec("forecast and risk vectors differ in length")
    return Allocation(_lowest_k(yhat + r, k))


def baseline_uncertainty_penalty(yhat, r, penalty_weight: float) -> Allocation:
    if penalty_weight < 0:
        raise InvalidSpec("penalty_weight must be >= 0")
    return Allocation(_lowest_k(np.asarray(yhat, dtype=float) + penalty_weight * np.asarray(r, dtype=float), 1))


@dataclass
class Baseline:
    """Heuristic allocation on top of a trained forecaster.

    ``r`` is in normalized units, so scores are formed from normalized forecasts.
    """

    rule: str
    model: ForecastModel
    normalizer: NormalizerStats
    k: int = 1
    weight: float = 0.0
    r: np.ndarray | None = None

    def __post_init__(self):
        if self.rule not in ("topk-forecast", "topk-risk", "uncertainty-penalty"):
            raise InvalidSpec(f"unknown baseline {self.rule!r}")
        if self.rule != "topk-forecast" and self.r is None:
            raise InvalidSpec(f"{self.rule} needs a risk vector")

    @property
    def name(self) -> str:
        return f"{self.rule}:{self.weight:g}" if self.rule == "uncertainty-penalty" else f"{self.rule}:{self.k}"

    @property
    def space(self) -> FeasibleSpace:
        return FeasibleSpace(self.model.H)

    def decide_batch(self, X_raw, C=None):
        Yn = forward(self.model, normalize(X_raw, self.normalizer), C)
        if self.rule == "topk-forecast":
            A = _lowest_k(Yn, self.k)
        elif self.rule == "topk-risk":
            A = _lowest_k(Yn + self.r, self.k)
        else:
            A = _lowest_k(Yn + self.weight * self.r, 1)
        return denormalize(Yn, self.normalizer), A


@dataclass
class Oracle:
    """Hindsight allocation; a zero-regret sanity row."""

    space: FeasibleSpace
    normalizer: NormalizerStats
    name: str = "oracle"
    uses_truth: bool = True


@dataclass
class EvalReport:
    method: str
    dataset: str
    regret: float
    relative_regret: float
    mse: float
    mae: float
    n_samples: int
    seed: int
    config: dict = field(default_factory=dict)
    per_sample_regret: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "dataset": self.dataset,
            "regret": self.regret,
            "relative_regret": self.relative_regret,
            "mse": self.mse,
            "mae": self.mae,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "config": self.config,
        }


def evaluate_method(
    method,
    test: Sequence[WindowSample],
    space: FeasibleSpace | None = None,
    normalizer: NormalizerStats | None = None,
    *,
    dataset: str = "dataset",
    seed: int = 0,
    config: dict | None = None,
    oracle_unconstrained: bool = False,
) -> EvalReport:
    """Regret and R.R. in raw prices; mse and mae on normalized values."""
    if not test:
        raise InvalidSpec("test split is empty")
    space = space or method.space
    normalizer = normalizer or method.normalizer
    X, Y, C = stack(test)
    if getattr(method, "uses_truth", False):
        Yhat, A_hat = Y.copy(), solve_batch(Y, space)
    else:
        Yhat, A_hat = method.decide_batch(X, C)
    for a in A_hat:
        if not space.contains(a):
            raise InvalidSpec(f"{method.name} produced an allocation outside its feasible space")
    oracle_space = FeasibleSpace(space.H, space.caps) if oracle_unconstrained else space
    A_star = solve_batch(Y, oracle_space)
    optimal = np.einsum("nh,nh->n", A_star, Y)
    chosen = np.einsum("nh,nh->n", A_hat, Y)
    reg = np.abs(optimal - chosen)
    if np.any(optimal <= 0):
        raise NonPositiveOptimalCost("relative regret needs positive optimal costs")
    err = normalize(Yhat, normalizer) - normalize(Y, normalizer)
    return EvalReport(
        method=method.name,
        dataset=dataset,
        regret=float(reg.mean()),
        relative_regret=float((reg / optimal).mean()),
        mse=float(np.mean(err * err)),
        mae=float(np.mean(np.abs(err))),
        n_samples=len(test),
        seed=seed,
        config=dict(config or {}),
        per_sample_regret=reg,
    )


def rank_table(grid: Mapping[str, Mapping[str, EvalReport]]) -> dict[str, dict[str, float]]:
    """Average per-dataset rank (1 = lowest; ties share the mean rank)."""
    if not grid:
        raise IncompleteGrid("no datasets")
    datasets = sorted(grid)
    methods = sorted(grid[datasets[0]])
    for d in datasets:
        if sorted(grid[d]) != methods:
            raise IncompleteGrid(f"dataset {d!r} has methods {sorted(grid[d])}, expected {methods}")
    out = {}
    for metric in ("regret", "relative_regret"):
        ranks = np.array([rankdata([getattr(grid[d][m], metric) for m in methods]) for d in datasets])
        out[metric] = {m: float(v) for m, v in zip(methods, ranks.mean(axis=0))}
    return out
