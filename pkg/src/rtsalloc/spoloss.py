"""SPO+ surrogate loss over a (possibly risk-constrained) allocation space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .allocate import Allocation, FeasibleSpace, solve_allocation, solve_batch
from .errors import ShapeMismatch
from .forecast import prediction_loss, prediction_loss_grad


@dataclass(frozen=True)
class SpoEvaluation:
    loss: float
    subgradient: np.ndarray
    inner_max_solution: Allocation
    full_info_solution: Allocation


def _pair(yhat, y):
    yhat = np.asarray(yhat, dtype=float)
    y = np.asarray(y, dtype=float)
    if yhat.shape != y.shape:
        raise ShapeMismatch(f"prediction shape {yhat.shape} != target shape {y.shape}")
    return yhat, y


def spo_plus(yhat, y, space: FeasibleSpace, full_info: Allocation | None = None) -> SpoEvaluation:
    """loss = 2 a*(y).yhat - a*(y).y + max_a {a.y - 2 a.yhat}.

    The max is the negated minimum of a.(2 yhat - y), so it reuses the allocation
    solver and its tie-breaking. Subgradient is 2 (a*(y) - a_max).
    """
    yhat, y = _pair(yhat, y)
    a_star = full_info if full_info is not None else solve_allocation(y, space)
    shifted = 2.0 * yhat - y
    a_max = solve_allocation(shifted, space)
    w = a_star.weights
    loss = 2.0 * w @ yhat - w @ y - a_max.weights @ shifted
    return SpoEvaluation(float(loss), 2.0 * (w - a_max.weights), a_max, a_star)


def spo_plus_batch(Yhat, Y, space: FeasibleSpace, A_star: np.ndarray | None = None):
    """Per-sample SPO+ losses (N,) and subgradients (N, H) for a batch."""
    Yhat, Y = _pair(Yhat, Y)
    if A_star is None:
        A_star = solve_batch(Y, space)
    shifted = 2.0 * Yhat - Y
    A_max = solve_batch(shifted, space)
    losses = 2.0 * np.einsum("nh,nh->n", A_star, Yhat) - np.einsum("nh,nh->n", A_star, Y)
    losses -= np.einsum("nh,nh->n", A_max, shifted)
    return losses, 2.0 * (A_star - A_max)


def combined_objective(yhat, y, space: FeasibleSpace, beta: float = 1.0) -> tuple[float, np.ndarray]:
    """SPO+ plus beta * mse, with the matching (sub)gradient in yhat."""
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    ev = spo_plus(yhat, y, space)
    loss = ev.loss + beta * prediction_loss(yhat, y, "mse")
    return loss, ev.subgradient + beta * prediction_loss_grad(yhat, y)


def combined_objective_batch(Yhat, Y, space: FeasibleSpace, beta: float = 1.0, A_star=None):
    """Batch-mean loss and per-sample gradient rows already scaled by 1/N."""
    Yhat, Y = _pair(Yhat, Y)
    N = Yhat.shape[0]
    losses, G = spo_plus_batch(Yhat, Y, space, A_star)
    d = Yhat - Y
    loss = float(losses.mean() + beta * np.mean(d * d))
    G = G + beta * prediction_loss_grad(Yhat, Y)
    return loss, G / N
