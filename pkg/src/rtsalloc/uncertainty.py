"""Split-conformal positional uncertainty and the risk-aware feasible space."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .allocate import FeasibleSpace
from .data import WindowSample, stack
from .errors import EmptyCalibration, InvalidSpec
from .forecast import ForecastModel, forward


@dataclass(frozen=True)
class ResidualMatrix:
    """Absolute residuals, one row per calibration sample and one column per position."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise InvalidSpec("residual matrix must be 2-d (samples x horizon)")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise InvalidSpec("residuals must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def H(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class RiskProfile:
    r: np.ndarray
    gamma: float
    alpha: float
    r0: float

    def to_dict(self) -> dict:
        return {"r": [float(v) for v in self.r], "gamma": self.gamma, "alpha": self.alpha, "r0": self.r0}

    @classmethod
    def from_dict(cls, d: dict) -> "RiskProfile":
        return cls(np.array(d["r"], dtype=float), float(d["gamma"]), float(d["alpha"]), float(d["r0"]))


def order_statistic(values, level: float) -> np.ndarray | float:
    """k-th smallest along axis 0 with k = ceil(level * n), level clamped to 1."""
    v = np.sort(np.asarray(values, dtype=float), axis=0)
    n = v.shape[0]
    if n == 0:
        raise EmptyCalibration("quantile of an empty set")
    level = min(1.0, level)
    # the 1e-9 guards against level*n landing a hair above an integer
    k = min(n, max(1, math.ceil(level * n - 1e-9)))
    return v[k - 1]


def collect_residuals(model: ForecastModel, calibration: Sequence[WindowSample]) -> ResidualMatrix:
    if len(calibration) == 0:
        raise EmptyCalibration("calibration split is empty")
    X, Y, C = stack(calibration)
    return ResidualMatrix(np.abs(forward(model, X, C) - Y))


def positional_uncertainty(residuals: ResidualMatrix, gamma: float) -> np.ndarray:
    if not 0 < gamma < 1:
        raise InvalidSpec(f"gamma: coverage rate must be in (0, 1), got {gamma}")
    n = residuals.n
    if n == 0:
        raise EmptyCalibration("no residuals")
    return order_statistic(residuals.values, (n + 1) / n * gamma)


def risk_threshold(r, alpha: float) -> float:
    if not 0 < alpha <= 1:
        raise InvalidSpec(f"alpha: quantile level must be in (0, 1], got {alpha}")
    return float(order_statistic(np.asarray(r, dtype=float), alpha))


def build_feasible_space(r, alpha: float, caps=None) -> FeasibleSpace:
    r = np.asarray(r, dtype=float)
    return FeasibleSpace(len(r), caps, r, risk_threshold(r, alpha))


def risk_profile(model: ForecastModel, calibration: Sequence[WindowSample], gamma: float, alpha: float) -> RiskProfile:
    r = positional_uncertainty(collect_residuals(model, calibration), gamma)
    return RiskProfile(r, gamma, alpha, risk_threshold(r, alpha))
