"""Linear forecasting backbones with hand-written gradients and an Adam optimizer.

Parameter layouts (row-major, concatenated in this order):

* ``linear``: W of shape (H, M + C), then bias (H,)
* ``decomp-linear``: W_trend (H, M), W_seasonal (H, M), bias (H,), then W_cov (H, C)

``C`` is the covariate dimension (0 by default). With ``C = 0`` the layouts are
exactly ``H*M + H`` and ``2*H*M + H`` long.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InvalidSpec, NonFiniteGradient, NonFiniteParameters, ShapeMismatch

MODEL_KINDS = ("linear", "decomp-linear")


def moving_average_matrix(M: int, kernel: int) -> np.ndarray:
    """(M, M) matrix of a centered moving average with edge replication padding."""
    if kernel < 1:
        raise InvalidSpec(f"kernel size must be >= 1, got {kernel}")
    left = (kernel - 1) // 2
    A = np.zeros((M, M))
    for i in range(M):
        for j in range(i - left, i - left + kernel):
            A[i, min(max(j, 0), M - 1)] += 1.0 / kernel
    return A


@dataclass
class ForecastModel:
    kind: str
    M: int
    H: int
    params: np.ndarray
    kernel: int = 3
    n_cov: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InvalidSpec(f"model_kind: unknown model kind {self.kind!r}")
        self.params = np.asarray(self.params, dtype=float)
        expected = param_count(self.kind, self.M, self.H, self.n_cov)
        if self.params.shape != (expected,):
            raise ShapeMismatch(
                f"{self.kind} model with M={self.M}, H={self.H} needs {expected} parameters, "
                f"got {self.params.shape}"
            )
        check_finite(self.params)

    @cached_property
    def _trend_op(self) -> np.ndarray:
        return moving_average_matrix(self.M, self.kernel)

    def unpack(self, params: np.ndarray | None = None) -> dict[str, np.ndarray]:
        p = self.params if params is None else params
        H, M, C = self.H, self.M, self.n_cov
        if self.kind == "linear":
            W = p[: H * (M + C)].reshape(H, M + C)
            return {"W": W, "b": p[H * (M + C) :]}
        k = H * M
        return {
            "W_trend": p[:k].reshape(H, M),
            "W_seasonal": p[k : 2 * k].reshape(H, M),
            "b": p[2 * k : 2 * k + H],
            "W_cov": p[2 * k + H :].reshape(H, C),
        }

    def copy(self) -> "ForecastModel":
        return ForecastModel(self.kind, self.M, self.H, self.params.copy(), self.kernel, self.n_cov)


def param_count(kind: str, M: int, H: int, n_cov: int = 0) -> int:
    if kind == "linear":
        return H * (M + n_cov) + H
    return 2 * H * M + H + H * n_cov


def check_finite(params: np.ndarray) -> None:
    if not np.all(np.isfinite(params)):
        raise NonFiniteParameters("model parameters contain NaN or Inf")


def init_model(kind: str, M: int, H: int, seed: int = 0, kernel: int = 3, n_cov: int = 0) -> ForecastModel:
    """Weights ~ U(-1/sqrt(M), 1/sqrt(M)), biases zero."""
    rng = np.random.default_rng(seed)
    scale = 1.0 / math.sqrt(M)
    model = ForecastModel(kind, M, H, np.zeros(param_count(kind, M, H, n_cov)), kernel, n_cov)
    parts = model.unpack()
    for name, arr in parts.items():
        if name != "b":
            arr[...] = rng.uniform(-scale, scale, size=arr.shape)
    return model


def _as_batch(model: ForecastModel, x, c):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.M:
        raise ShapeMismatch(f"lookback length {X.shape[1]} != M={model.M}")
    if c is None or np.size(c) == 0:
        if model.n_cov:
            raise ShapeMismatch(f"model expects {model.n_cov} covariates, got none")
        Cv = np.zeros((X.shape[0], 0))
    else:
        Cv = np.atleast_2d(np.asarray(c, dtype=float))
        if Cv.shape != (X.shape[0], model.n_cov):
            raise ShapeMismatch(f"covariates shape {Cv.shape} != ({X.shape[0]}, {model.n_cov})")
    return X, Cv, single


def forward(model: ForecastModel, x, c=None):
    """Predict the horizon. Accepts one lookback vector (M,) or a batch (N, M)."""
    X, Cv, single = _as_batch(model, x, c)
    p = model.unpack()
    if model.kind == "linear":
        Yhat = np.hstack([X, Cv]) @ p["W"].T + p["b"]
    else:
        trend = X @ model._trend_op.T
        seasonal = X - trend
        Yhat = trend @ p["W_trend"].T + seasonal @ p["W_seasonal"].T + Cv @ p["W_cov"].T + p["b"]
    return Yhat[0] if single else Yhat


def backward(model: ForecastModel, x, c, grad_out) -> np.ndarray:
    """Parameter gradient for upstream dL/dyhat.

    For a batch the per-sample gradients are summed; callers fold any 1/N into
    ``grad_out``.
    """
    X, Cv, _ = _as_batch(model, x, c)
    G = np.atleast_2d(np.asarray(grad_out, dtype=float))
    if G.shape != (X.shape[0], model.H):
        raise ShapeMismatch(f"upstream gradient shape {G.shape} != ({X.shape[0]}, {model.H})")
    grad = np.zeros_like(model.params)
    g = model.unpack(grad)
    if model.kind == "linear":
        g["W"][...] = G.T @ np.hstack([X, Cv])
    else:
        trend = X @ model._trend_op.T
        g["W_trend"][...] = G.T @ trend
        g["W_seasonal"][...] = G.T @ (X - trend)
        g["W_cov"][...] = G.T @ Cv
    g["b"][...] = G.sum(axis=0)
    return grad


def _check_pair(yhat, y):
    yhat = np.asarray(yhat, dtype=float)
    y = np.asarray(y, dtype=float)
    if yhat.shape != y.shape:
        raise ShapeMismatch(f"prediction shape {yhat.shape} != target shape {y.shape}")
    return yhat, y


def prediction_loss(yhat, y, metric: str = "mse") -> float:
    """Mean over the horizon (and over the batch for 2-d input)."""
    yhat, y = _check_pair(yhat, y)
    d = yhat - y
    if metric == "mse":
        return float(np.mean(d * d))
    if metric == "mae":
        return float(np.mean(np.abs(d)))
    raise ValueError(f"unknown metric {metric!r}")


def prediction_loss_grad(yhat, y) -> np.ndarray:
    """d(mse)/d(yhat) per sample: 2 (yhat - y) / H."""
    yhat, y = _check_pair(yhat, y)
    return 2.0 * (yhat - y) / yhat.shape[-1]


@dataclass
class OptimizerState:
    """Adam with bias correction."""

    n_params: int
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros(self.n_params)
        if self.v is None:
            self.v = np.zeros(self.n_params)


def optimizer_step(state: OptimizerState, params: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    """Apply one Adam update. Mutates ``state``; returns new parameters."""
    gradient = np.asarray(gradient, dtype=float)
    if gradient.shape != params.shape or params.shape != state.m.shape:
        raise ShapeMismatch("parameter, gradient and optimizer state lengths differ")
    if not np.all(np.isfinite(gradient)):
        raise NonFiniteGradient("gradient contains NaN or Inf")
    state.step_count += 1
    t = state.step_count
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * gradient
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * gradient * gradient
    m_hat = state.m / (1.0 - state.beta1**t)
    v_hat = state.v / (1.0 - state.beta2**t)
    new = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    check_finite(new)
    return new


def model_to_dict(model: ForecastModel) -> dict:
    return {
        "kind": model.kind,
        "M": model.M,
        "H": model.H,
        "kernel": model.kernel,
        "n_cov": model.n_cov,
        "params": [float(v) for v in model.params],
    }


def model_from_dict(d: dict) -> ForecastModel:
    return ForecastModel(
        d["kind"], int(d["M"]), int(d["H"]), np.array(d["params"], dtype=float),
        int(d.get("kernel", 3)), int(d.get("n_cov", 0)),
    )


def save_checkpoint(model: ForecastModel, path: str | Path) -> None:
    # json floats use repr(), which round-trips doubles exactly
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> ForecastModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
