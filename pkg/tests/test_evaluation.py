from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import splits_for
from rtsalloc.allocate import FeasibleSpace, solve_allocation
from rtsalloc.data import SynthSpec, fit_normalizer
from rtsalloc.errors import IncompleteGrid, NonPositiveOptimalCost
from rtsalloc.evaluation import (
    Baseline,
    EvalReport,
    Oracle,
    baseline_topk_forecast,
    baseline_topk_risk_avoid,
    baseline_uncertainty_penalty,
    evaluate_method,
    rank_table,
    regret,
    relative_regret,
)
from rtsalloc.pipeline import TrainConfig, train


def rep(method, dataset, value):
    return EvalReport(method, dataset, value, value, 0.0, 0.0, 1, 0)


def test_regret_examples():
    simplex = FeasibleSpace.simplex(2)
    assert regret(solve_allocation([1, 2], simplex), [1, 2], simplex) == 0
    assert regret(np.array([0, 1.0]), [1, 2], simplex) == 1
    space = FeasibleSpace(4, risk=[1, 2, 3, 4], threshold=2)
    reg = regret(np.array([1.0, 0, 0, 0]), [5, 4, 3, 1], space)
    assert abs(reg - 4 / 3) < 1e-9
    assert abs(relative_regret(reg, 11 / 3) - 4 / 11) < 1e-9


def test_relative_regret_examples():
    assert relative_regret(1, 1) == 1.0
    assert relative_regret(0, 7.5) == 0
    with pytest.raises(NonPositiveOptimalCost):
        relative_regret(1, 0)


def test_topk_forecast_examples():
    assert baseline_topk_forecast([3, 1, 2, 5], 2).weights.tolist() == [0, 0.5, 0.5, 0]
    assert baseline_topk_forecast([3, 1, 2, 5], 1).weights.tolist() == [0, 1, 0, 0]
    assert baseline_topk_forecast([4, 4, 4, 4], 2).weights.tolist() == [0.5, 0.5, 0, 0]


def test_topk_risk_examples():
    assert baseline_topk_risk_avoid([3, 1, 2], [0.1, 3, 0.5], 1).weights.tolist() == [0, 0, 1]
    assert baseline_topk_risk_avoid([1, 1], [2, 1], 1).weights.tolist() == [0, 1]
    y = [3, 1, 2, 5]
    assert baseline_topk_risk_avoid(y, [0] * 4, 2).weights.tolist() == baseline_topk_forecast(y, 2).weights.tolist()


def test_uncertainty_penalty_examples():
    assert baseline_uncertainty_penalty([1, 2], [4, 1], 0.5).weights.tolist() == [0, 1]
    rng = np.random.default_rng(0)
    for _ in range(50):
        y, r = rng.normal(size=5), rng.uniform(0, 1, 5)
        assert baseline_uncertainty_penalty(y, r, 0).weights.tolist() == baseline_topk_forecast(y).weights.tolist()
        assert (
            baseline_uncertainty_penalty(y, r, 1).weights.tolist() == baseline_topk_risk_avoid(y, r).weights.tolist()
        )


def test_top1_equals_simplex_solve():
    rng = np.random.default_rng(4)
    space = FeasibleSpace.simplex(7)
    for _ in range(200):
        y = rng.normal(size=7)
        assert baseline_topk_forecast(y).weights.tolist() == solve_allocation(y, space).weights.tolist()


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 8), st.floats(1e-2, 1e2), st.integers(0, 2**31 - 1))
def test_regret_homogeneity(H, lam, seed):
    rng = np.random.default_rng(seed)
    r = rng.uniform(0, 2, H)
    space = FeasibleSpace(H, risk=r, threshold=float(np.max(r)))
    y = rng.uniform(1, 10, H)
    a = rng.dirichlet(np.ones(H))
    reg, reg_l = regret(a, y, space), regret(a, lam * y, space)
    assert abs(reg_l - lam * reg) <= 1e-9 * max(1.0, lam * reg)
    opt, opt_l = solve_allocation(y, space).cost(y), solve_allocation(lam * y, space).cost(lam * y)
    assert abs(relative_regret(reg_l, opt_l) - relative_regret(reg, opt)) < 1e-9


def test_rank_table_examples():
    one = rank_table({"d": {"A": rep("A", "d", 1), "B": rep("B", "d", 2)}})
    assert one["regret"] == {"A": 1.0, "B": 2.0}
    two = rank_table(
        {
            "d1": {"A": rep("A", "d1", 1), "B": rep("B", "d1", 2)},
            "d2": {"A": rep("A", "d2", 2), "B": rep("B", "d2", 1)},
        }
    )
    assert two["regret"] == {"A": 1.5, "B": 1.5}
    tie = rank_table({"d": {"A": rep("A", "d", 1), "B": rep("B", "d", 1), "C": rep("C", "d", 3)}})
    assert tie["relative_regret"] == {"A": 1.5, "B": 1.5, "C": 3.0}


def test_rank_table_incomplete():
    with pytest.raises(IncompleteGrid):
        rank_table({"d1": {"A": rep("A", "d1", 1)}, "d2": {"B": rep("B", "d2", 1)}})


@pytest.fixture(scope="module")
def trained(small_splits):
    cfg = TrainConfig(M=24, H=12, epochs=3, learning_rate=1e-2, batch_size=16)
    stats = fit_normalizer(small_splits.train)
    return {m: train(replace(cfg, method=m), small_splits, stats) for m in ("predict-only", "rts-pno")}, stats


def test_oracle_zero_regret(small_splits, trained):
    _, stats = trained
    report = evaluate_method(Oracle(FeasibleSpace.simplex(12), stats), small_splits.test)
    assert report.regret == 0 and report.mse == 0
    assert report.n_samples == len(small_splits.test)


def test_constant_series_zero_regret():
    splits = splits_for(SynthSpec(kind="constant", amplitude=5, length=200), 8, 4)
    cfg = TrainConfig(M=8, H=4, epochs=3, batch_size=16)
    for method in ("predict-only", "rts-pto", "rts-pno"):
        policy = train(replace(cfg, method=method), splits)
        assert evaluate_method(policy, splits.test).regret == 0
    base = Baseline("topk-forecast", policy.model, policy.normalizer, k=2)
    assert evaluate_method(base, splits.test).regret == 0


def test_evaluation_deterministic_and_feasible(small_splits, trained):
    policies, _ = trained
    for policy in policies.values():
        a = evaluate_method(policy, small_splits.test, dataset="x")
        b = evaluate_method(policy, small_splits.test, dataset="x")
        assert a.to_dict() == b.to_dict()
        assert a.regret >= 0 and a.relative_regret >= 0
        _, A = policy.decide_batch(np.stack([s.x for s in small_splits.test]))
        assert all(policy.space.contains(w) for w in A)


def test_oracle_unconstrained_flag(small_splits, trained):
    policy = trained[0]["rts-pno"]
    same = evaluate_method(policy, small_splits.test)
    plain = evaluate_method(policy, small_splits.test, oracle_unconstrained=True)
    # a looser hindsight optimum can only raise the gap
    assert plain.regret >= same.regret - 1e-12
