"""Risk-aware fund allocation over a forecast horizon.

Forecasters are trained either two-stage (predict, then solve the allocation LP)
or end-to-end through the LP with the SPO+ surrogate, under a conformal
positional-uncertainty constraint that is recalibrated every epoch.
"""

from .allocate import Allocation, FeasibleSpace, brute_force_oracle, solve_allocation, solve_batch
from .data import (
    DatasetSplits,
    NormalizerStats,
    PriceSeries,
    SynthSpec,
    WindowSample,
    denormalize,
    fit_normalizer,
    generate_synthetic,
    load_csv,
    make_windows,
    normalize,
    split_chronological,
)
from .evaluation import EvalReport, evaluate_method, rank_table, regret, relative_regret
from .forecast import ForecastModel, backward, forward, init_model, prediction_loss, prediction_loss_grad
from .pipeline import TrainConfig, TrainedPolicy, infer, train, train_pno, train_predict_only, train_pto
from .spoloss import combined_objective, spo_plus
from .uncertainty import build_feasible_space, collect_residuals, positional_uncertainty, risk_threshold

__version__ = "0.1.0"
