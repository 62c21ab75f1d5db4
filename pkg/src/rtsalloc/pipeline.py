"""Training regimes (prediction-only, RTS-PtO, RTS-PnO) and inference."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .allocate import Allocation, FeasibleSpace, solve_allocation, solve_batch
from .data import DatasetSplits, NormalizerStats, WindowSample, denormalize, fit_normalizer, normalize, stack
from .errors import ConfigError, Infeasible
from .files import atomic_write_text, dumps_json
from .forecast import (
    MODEL_KINDS,
    ForecastModel,
    OptimizerState,
    backward,
    forward,
    init_model,
    load_checkpoint,
    model_to_dict,
    optimizer_step,
    prediction_loss_grad,
)
from .spoloss import combined_objective_batch
from .uncertainty import RiskProfile, build_feasible_space, collect_residuals, positional_uncertainty, risk_threshold

log = logging.getLogger(__name__)

METHODS = ("predict-only", "rts-pto", "rts-pno")


@dataclass
class TrainConfig:
    method: str = "rts-pno"
    M: int = 48
    H: int = 24
    gamma: float = 0.9
    alpha: float = 0.5
    beta: float = 1.0
    learning_rate: float = 1e-3
    epochs: int = 10
    batch_size: int = 32
    model_kind: str = "linear"
    kernel: int = 3
    seed: int = 0
    caps: list[float] | None = None
    # False freezes r after the first epoch (ablation of the adaptive constraint)
    adaptive: bool = True
    # True trains RTS-PtO with SPO+ + beta*mse over the plain simplex instead of mse
    pto_combined: bool = False
    selection: str = "best-regret"

    def validate(self) -> "TrainConfig":
        if self.method not in METHODS:
            raise ConfigError(f"method: must be one of {METHODS}, got {self.method!r}")
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"model_kind: must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        for key in ("M", "H", "epochs", "batch_size", "kernel"):
            v = getattr(self, key)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{key}: must be a positive integer, got {v!r}")
        if not 0 < self.gamma < 1:
            raise ConfigError(f"gamma: must be in (0, 1), got {self.gamma}")
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha: must be in (0, 1], got {self.alpha}")
        if not self.beta >= 0:
            raise ConfigError(f"beta: must be >= 0, got {self.beta}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate: must be > 0, got {self.learning_rate}")
        if self.selection not in ("best-regret", "last"):
            raise ConfigError(f"selection: must be 'best-regret' or 'last', got {self.selection!r}")
        if self.caps is not None:
            if len(self.caps) != self.H:
                raise ConfigError(f"caps: need {self.H} entries, got {len(self.caps)}")
            try:
                FeasibleSpace(self.H, self.caps)
            except Exception as exc:
                raise ConfigError(f"caps: {exc}") from None
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown training key")
        return cls(**d).validate()


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    calib_regret: float
    mean_r: float | None = None
    r: list[float] | None = None


@dataclass
class TrainedPolicy:
    model: ForecastModel
    normalizer: NormalizerStats
    method: str
    space: FeasibleSpace
    risk_profile: RiskProfile | None = None
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    # r from the untrained model, used for the first PnO epoch
    initial_r: np.ndarray | None = None

    def infer(self, x, c=None) -> tuple[np.ndarray, Allocation]:
        yhat_n = forward(self.model, normalize(x, self.normalizer), c)
        return denormalize(yhat_n, self.normalizer), solve_allocation(yhat_n, self.space)

    def decide_batch(self, X_raw, C=None) -> tuple[np.ndarray, np.ndarray]:
        """Raw-space forecasts (N, H) and allocation weights (N, H)."""
        Yn = forward(self.model, normalize(X_raw, self.normalizer), C)
        return denormalize(Yn, self.normalizer), solve_batch(Yn, self.space)

    @property
    def name(self) -> str:
        return self.method


def _normalized_arrays(samples: Sequence[WindowSample], stats: NormalizerStats):
    X, Y, C = stack(samples)
    return normalize(X, stats), normalize(Y, stats), C


def calibration_regret(model: ForecastModel, stats: NormalizerStats, calibration, space: FeasibleSpace) -> float:
    """Mean raw-space regret of decisions on the calibration split."""
    X, Y, C = stack(calibration)
    A_hat = solve_batch(forward(model, normalize(X, stats), C), space)
    A_star = solve_batch(Y, space)
    return float(np.mean(np.abs(np.einsum("nh,nh->n", A_star - A_hat, Y))))


def _plain_space(cfg: TrainConfig) -> FeasibleSpace:
    return FeasibleSpace(cfg.H, cfg.caps)


def _risk_space(r: np.ndarray, cfg: TrainConfig) -> FeasibleSpace:
    space = build_feasible_space(r, cfg.alpha, cfg.caps)
    # the threshold is a quantile of r, so mass on argmin r is always admissible
    probe = np.zeros(cfg.H)
    probe[int(np.argmin(r))] = 1.0
    if cfg.caps is None and not space.contains(probe):
        raise Infeasible("risk space excludes the argmin-r allocation")
    return space


def _check_inputs(cfg: TrainConfig, splits: DatasetSplits) -> None:
    for name in ("train", "calibration", "test"):
        part = getattr(splits, name)
        if name != "test" and not part:
            raise ConfigError(f"splits.{name}: empty split")
        if part and (len(part[0].x) != cfg.M or len(part[0].y) != cfg.H):
            raise ConfigError(f"M/H: windows have M={len(part[0].x)}, H={len(part[0].y)}")


class _Snapshots:
    """Keeps the epoch with the lowest calibration regret (ties go to the later epoch)."""

    def __init__(self, selection: str):
        self.selection = selection
        self.best = None

    def offer(self, epoch: int, regret: float, model: ForecastModel, extra=None):
        if self.selection == "last" or self.best is None or regret <= self.best[1]:
            self.best = (epoch, regret, model.copy(), extra)


def _epochs(cfg: TrainConfig, model: ForecastModel, Xtr, Ytr, Ctr, loss_and_grad, end_of_epoch):
    """Minibatch Adam loop. ``loss_and_grad(Yhat, Y, idx)`` returns (mean loss, G / N)."""
    state = OptimizerState(model.params.size, learning_rate=cfg.learning_rate)
    rng = np.random.default_rng([cfg.seed, 1])
    n = Xtr.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            Yhat = forward(model, Xtr[idx], Ctr[idx])
            loss, G = loss_and_grad(Yhat, Ytr[idx], idx)
            grad = backward(model, Xtr[idx], Ctr[idx], G)
            model.params = optimizer_step(state, model.params, grad)
            total += loss * idx.size
        end_of_epoch(epoch, total / n)


def _mse_loss_and_grad(Yhat, Y, idx):
    d = Yhat - Y
    return float(np.mean(d * d)), prediction_loss_grad(Yhat, Y) / Yhat.shape[0]


def train_predict_only(cfg: TrainConfig, splits: DatasetSplits, stats: NormalizerStats | None = None) -> TrainedPolicy:
    cfg.validate()
    _check_inputs(cfg, splits)
    stats = stats or fit_normalizer(splits.train, allow_degenerate=True)
    Xtr, Ytr, Ctr = _normalized_arrays(splits.train, stats)
    model = init_model(cfg.model_kind, cfg.M, cfg.H, cfg.seed, cfg.kernel, Ctr.shape[1])
    space = _plain_space(cfg)
    history: list[EpochRecord] = []
    snaps = _Snapshots(cfg.selection)

    loss_and_grad = _mse_loss_and_grad
    if cfg.method == "rts-pto" and cfg.pto_combined:
        A_star = solve_batch(Ytr, space)

        def loss_and_grad(Yhat, Y, idx):
            return combined_objective_batch(Yhat, Y, space, cfg.beta, A_star[idx])

    def end_of_epoch(epoch, train_loss):
        reg = calibration_regret(model, stats, splits.calibration, space)
        history.append(EpochRecord(epoch, train_loss, reg))
        snaps.offer(epoch, reg, model)
        log.debug("epoch %d loss %.6g calib regret %.6g", epoch, train_loss, reg)

    _epochs(cfg, model, Xtr, Ytr, Ctr, loss_and_grad, end_of_epoch)
    best_epoch, _, best_model, _ = snaps.best
    return TrainedPolicy(best_model, stats, "predict-only", space, None, history, best_epoch)


def train_pto(cfg: TrainConfig, splits: DatasetSplits, stats: NormalizerStats | None = None) -> TrainedPolicy:
    """Prediction training, then a single conformal pass that fixes the risk space."""
    base = train_predict_only(cfg, splits, stats)
    calib_n = [normalize(s, base.normalizer) for s in splits.calibration]
    r = positional_uncertainty(collect_residuals(base.model, calib_n), cfg.gamma)
    profile = RiskProfile(r, cfg.gamma, cfg.alpha, risk_threshold(r, cfg.alpha))
    return TrainedPolicy(
        base.model, base.normalizer, "rts-pto", _risk_space(r, cfg), profile, base.history, base.best_epoch
    )


def train_pno(cfg: TrainConfig, splits: DatasetSplits, stats: NormalizerStats | None = None) -> TrainedPolicy:
    """End-to-end SPO+ training with the risk space rebuilt from fresh residuals every epoch."""
    cfg.validate()
    _check_inputs(cfg, splits)
    stats = stats or fit_normalizer(splits.train, allow_degenerate=True)
    Xtr, Ytr, Ctr = _normalized_arrays(splits.train, stats)
    model = init_model(cfg.model_kind, cfg.M, cfg.H, cfg.seed, cfg.kernel, Ctr.shape[1])

    calib_n = [normalize(s, stats) for s in splits.calibration]

    def current_r():
        return positional_uncertainty(collect_residuals(model, calib_n), cfg.gamma)

    r0_vec = current_r()
    ctx = {"r": r0_vec, "space": _risk_space(r0_vec, cfg)}
    ctx["A_star"] = solve_batch(Ytr, ctx["space"])
    history: list[EpochRecord] = []
    snaps = _Snapshots(cfg.selection)

    def loss_and_grad(Yhat, Y, idx):
        return combined_objective_batch(Yhat, Y, ctx["space"], cfg.beta, ctx["A_star"][idx])

    def end_of_epoch(epoch, train_loss):
        if cfg.adaptive or epoch == 1:
            ctx["r"] = current_r()
            ctx["space"] = _risk_space(ctx["r"], cfg)
            ctx["A_star"] = solve_batch(Ytr, ctx["space"])
        reg = calibration_regret(model, stats, splits.calibration, ctx["space"])
        r = ctx["r"]
        history.append(EpochRecord(epoch, train_loss, reg, float(np.mean(r)), [float(v) for v in r]))
        snaps.offer(epoch, reg, model, r.copy())
        log.debug("epoch %d loss %.6g calib regret %.6g mean r %.6g", epoch, train_loss, reg, np.mean(r))

    _epochs(cfg, model, Xtr, Ytr, Ctr, loss_and_grad, end_of_epoch)
    best_epoch, _, best_model, r = snaps.best
    profile = RiskProfile(r, cfg.gamma, cfg.alpha, risk_threshold(r, cfg.alpha))
    return TrainedPolicy(
        best_model, stats, "rts-pno", _risk_space(r, cfg), profile, history, best_epoch, initial_r=r0_vec
    )


def train(cfg: TrainConfig, splits: DatasetSplits, stats: NormalizerStats | None = None) -> TrainedPolicy:
    cfg.validate()
    fn = {"predict-only": train_predict_only, "rts-pto": train_pto, "rts-pno": train_pno}[cfg.method]
    return fn(cfg, splits, stats)


def infer(policy: TrainedPolicy, x, c=None) -> tuple[np.ndarray, Allocation]:
    return policy.infer(x, c)


# ---------------------------------------------------------------- persistence


def history_csv(history: Sequence[EpochRecord]) -> str:
    lines = ["epoch,train_loss,calib_regret,mean_r"]
    for h in history:
        mean_r = "" if h.mean_r is None else repr(h.mean_r)
        lines.append(f"{h.epoch},{h.train_loss!r},{h.calib_regret!r},{mean_r}")
    return "\n".join(lines) + "\n"


def policy_sidecar(policy: TrainedPolicy) -> dict:
    caps = None if policy.space.uncapped else [float(v) for v in policy.space.caps]
    return {
        "method": policy.method,
        "normalizer": {"mean": policy.normalizer.mean, "std": policy.normalizer.std},
        "risk_profile": policy.risk_profile.to_dict() if policy.risk_profile else None,
        "caps": caps,
        "best_epoch": policy.best_epoch,
        "history": [asdict(h) for h in policy.history],
    }


def save_policy(policy: TrainedPolicy, directory: str | Path) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = [d / "model.json", d / "policy.json", d / "history.csv"]
    atomic_write_text(written[0], dumps_json(model_to_dict(policy.model)))
    atomic_write_text(written[1], dumps_json(policy_sidecar(policy)))
    atomic_write_text(written[2], history_csv(policy.history))
    return written


def load_policy(directory: str | Path) -> TrainedPolicy:
    d = Path(directory)
    model = load_checkpoint(d / "model.json")
    side = json.loads((d / "policy.json").read_text(encoding="utf-8"))
    stats = NormalizerStats(**side["normalizer"])
    profile = RiskProfile.from_dict(side["risk_profile"]) if side["risk_profile"] else None
    if profile is not None:
        space = FeasibleSpace(model.H, side["caps"], profile.r, profile.r0)
    else:
        space = FeasibleSpace(model.H, side["caps"])
    history = [EpochRecord(**h) for h in side.get("history", [])]
    return TrainedPolicy(model, stats, side["method"], space, profile, history, side.get("best_epoch", 0))
