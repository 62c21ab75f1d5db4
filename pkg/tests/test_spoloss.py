import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtsalloc.allocate import FeasibleSpace, solve_allocation
from rtsalloc.evaluation import regret
from rtsalloc.spoloss import combined_objective, combined_objective_batch, spo_plus, spo_plus_batch

SIMPLEX2 = FeasibleSpace.simplex(2)


def test_perfect_prediction():
    ev = spo_plus([1, 2], [1, 2], SIMPLEX2)
    assert ev.loss == 0
    assert ev.full_info_solution.weights.tolist() == [1, 0]
    assert ev.inner_max_solution.weights.tolist() == [1, 0]
    assert ev.subgradient.tolist() == [0, 0]


def test_swapped_prediction_simplex():
    ev = spo_plus([2, 1], [1, 2], SIMPLEX2)
    assert abs(ev.loss - 3) < 1e-9
    assert ev.inner_max_solution.weights.tolist() == [0, 1]
    np.testing.assert_allclose(ev.subgradient, [2, -2], atol=1e-9)


def test_swapped_prediction_risk():
    ev = spo_plus([2, 1], [1, 2], FeasibleSpace(2, risk=[10, 1], threshold=4))
    np.testing.assert_allclose(ev.full_info_solution.weights, [1 / 3, 2 / 3], atol=1e-9)
    np.testing.assert_allclose(ev.inner_max_solution.weights, [0, 1], atol=1e-9)
    assert abs(ev.loss - 1) < 1e-9
    np.testing.assert_allclose(ev.subgradient, [2 / 3, -2 / 3], atol=1e-9)


def test_combined_examples():
    loss, g = combined_objective([2, 1], [1, 2], SIMPLEX2, beta=1.0)
    assert abs(loss - 4) < 1e-9
    np.testing.assert_allclose(g, [3, -3], atol=1e-9)
    loss0, g0 = combined_objective([2, 1], [1, 2], SIMPLEX2, beta=0.0)
    ev = spo_plus([2, 1], [1, 2], SIMPLEX2)
    assert loss0 == ev.loss and g0.tolist() == ev.subgradient.tolist()
    for beta in (0.0, 0.3, 10.0):
        loss, g = combined_objective([1, 2], [1, 2], SIMPLEX2, beta)
        assert loss == 0 and not g.any()
    with pytest.raises(ValueError):
        combined_objective([1, 2], [1, 2], SIMPLEX2, beta=-1)


def test_batch_matches_single():
    rng = np.random.default_rng(2)
    r = rng.uniform(0, 1, 5)
    space = FeasibleSpace(5, risk=r, threshold=float(np.median(r)))
    Yhat, Y = rng.normal(size=(30, 5)), rng.normal(size=(30, 5))
    losses, G = spo_plus_batch(Yhat, Y, space)
    for i in range(30):
        ev = spo_plus(Yhat[i], Y[i], space)
        assert abs(losses[i] - ev.loss) < 1e-12
        np.testing.assert_allclose(G[i], ev.subgradient, atol=1e-12)
    loss, Gm = combined_objective_batch(Yhat, Y, space, beta=0.5)
    ref = [combined_objective(Yhat[i], Y[i], space, 0.5) for i in range(30)]
    assert abs(loss - np.mean([l for l, _ in ref])) < 1e-12
    np.testing.assert_allclose(Gm * 30, [g for _, g in ref], atol=1e-12)


@st.composite
def spaces(draw):
    H = draw(st.integers(2, 8))
    rng = np.random.default_rng(draw(st.integers(0, 2**31 - 1)))
    if draw(st.booleans()):
        return rng, FeasibleSpace.simplex(H)
    r = rng.uniform(0, 3, H)
    return rng, FeasibleSpace(H, risk=r, threshold=float(np.sort(r)[rng.integers(H)]))


@settings(max_examples=100, deadline=None)
@given(spaces())
def test_upper_bounds_regret(rs):
    rng, space = rs
    yhat, y = rng.normal(size=space.H), rng.normal(size=space.H)
    ev = spo_plus(yhat, y, space)
    reg = regret(solve_allocation(yhat, space), y, space)
    assert reg >= 0
    assert ev.loss >= reg - 1e-9


@settings(max_examples=100, deadline=None)
@given(spaces())
def test_zero_at_truth(rs):
    rng, space = rs
    y = rng.normal(size=space.H)
    assert abs(spo_plus(y, y, space).loss) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(spaces())
def test_subgradient_inequality(rs):
    rng, space = rs
    y, yhat, yhat2 = rng.normal(size=(3, space.H))
    ev = spo_plus(yhat, y, space)
    assert spo_plus(yhat2, y, space).loss >= ev.loss + ev.subgradient @ (yhat2 - yhat) - 1e-8


@settings(max_examples=100, deadline=None)
@given(spaces(), st.integers(-5, 5))
def test_translation_keeps_subgradient(rs, kappa):
    # integer shifts keep the arithmetic exact enough that tie-breaking cannot flip
    rng, space = rs
    yhat, y = rng.integers(-20, 20, size=(2, space.H)).astype(float)
    g0 = spo_plus(yhat, y, space).subgradient
    g1 = spo_plus(yhat + kappa, y + kappa, space).subgradient
    np.testing.assert_allclose(g0, g1, atol=1e-9)
