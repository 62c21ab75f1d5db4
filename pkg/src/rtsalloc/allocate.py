"""Allocation LP: minimize a . prices over the capped simplex and a risk halfspace.

Two engines solve the same problem:

* ``pairs`` (caps all 1): the LP has two general constraints, so an optimal
  vertex has at most two nonzero weights. All single positions and all pairs
  with the risk constraint tight are enumerated once per space and then priced
  with one matrix product. Handles batches.
* ``simplex``: dense two-phase tableau simplex with Bland's rule, for arbitrary
  caps.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import Infeasible, InvalidSpec, ShapeMismatch

FEAS_TOL = 1e-9
# relative to max |price|; keeps tie-breaking invariant under positive scaling
TIE_TOL = 1e-12
PIVOT_TOL = 1e-11


@dataclass(frozen=True)
class FeasibleSpace:
    H: int
    caps: np.ndarray | None = None
    risk: np.ndarray | None = None
    threshold: float | None = None

    def __post_init__(self):
        caps = np.ones(self.H) if self.caps is None else np.asarray(self.caps, dtype=float)
        if caps.shape != (self.H,):
            raise ShapeMismatch(f"caps shape {caps.shape} != ({self.H},)")
        if np.any(caps <= 0) or np.any(caps > 1):
            raise InvalidSpec("caps must lie in (0, 1]")
        if caps.sum() < 1 - FEAS_TOL:
            raise InvalidSpec(f"sum(caps) = {caps.sum()} < 1 leaves the simplex empty")
        caps.setflags(write=False)
        object.__setattr__(self, "caps", caps)
        if (self.risk is None) != (self.threshold is None):
            raise InvalidSpec("risk vector and threshold must be given together")
        if self.risk is not None:
            r = np.asarray(self.risk, dtype=float)
            if r.shape != (self.H,):
                raise ShapeMismatch(f"risk shape {r.shape} != ({self.H},)")
            if np.any(r < 0) or not np.all(np.isfinite(r)):
                raise InvalidSpec("risk entries must be finite and >= 0")
            r.setflags(write=False)
            object.__setattr__(self, "risk", r)
            object.__setattr__(self, "threshold", float(self.threshold))

    @classmethod
    def simplex(cls, H: int, caps=None) -> "FeasibleSpace":
        return cls(H, caps)

    @property
    def risk_enabled(self) -> bool:
        return self.risk is not None

    @property
    def uncapped(self) -> bool:
        return bool(np.all(self.caps >= 1.0))

    def contains(self, a, tol: float = FEAS_TOL) -> bool:
        a = np.asarray(a, dtype=float)
        ok = a.shape == (self.H,) and np.all(a >= -tol) and abs(a.sum() - 1) <= tol
        ok = ok and np.all(a <= self.caps + tol)
        if ok and self.risk_enabled:
            ok = float(a @ self.risk) <= self.threshold + tol
        return bool(ok)

    @cached_property
    def vertices(self) -> tuple[np.ndarray, list[tuple[int, ...]]]:
        """Candidate optimal vertices for caps = 1, ordered by support tuple."""
        H = self.H
        rows, supports = [], []
        r, r0 = self.risk, self.threshold
        for i in range(H):
            if r is None or r[i] <= r0 + FEAS_TOL:
                v = np.zeros(H)
                v[i] = 1.0
                rows.append(v)
                supports.append((i,))
            if r is None:
                continue
            for j in range(i + 1, H):
                if (r[i] - r0) * (r[j] - r0) < 0:
                    ai = (r[j] - r0) / (r[j] - r[i])
                    v = np.zeros(H)
                    v[i] = ai
                    v[j] = 1.0 - ai
                    rows.append(v)
                    supports.append((i, j))
        V = np.array(rows) if rows else np.zeros((0, H))
        V.setflags(write=False)
        return V, supports


@dataclass(frozen=True)
class Allocation:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < -FEAS_TOL):
            raise InvalidSpec("allocation has negative weights")
        w = np.maximum(w, 0.0)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def cost(self, prices) -> float:
        return float(self.weights @ np.asarray(prices, dtype=float))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.weights > 0))


def _check_prices(prices, H: int) -> np.ndarray:
    p = np.asarray(prices, dtype=float)
    if p.shape[-1] != H:
        raise ShapeMismatch(f"prices length {p.shape[-1]} != H={H}")
    if not np.all(np.isfinite(p)):
        raise InvalidSpec("prices must be finite")
    return p


def solve_batch(prices, space: FeasibleSpace) -> np.ndarray:
    """Vectorized pairs-engine solve. ``prices`` is (B, H); returns (B, H) weights."""
    P = np.atleast_2d(_check_prices(prices, space.H))
    if not space.uncapped:
        return np.stack([_simplex_allocation(p, space) for p in P])
    V, _ = space.vertices
    if V.shape[0] == 0:
        raise Infeasible("risk halfspace excludes every point of the simplex")
    costs = P @ V.T
    best = costs.min(axis=1, keepdims=True)
    tol = TIE_TOL * np.abs(P).max(axis=1, keepdims=True)
    k = np.argmax(costs <= best + tol, axis=1)
    return V[k].copy()


def solve_allocation(prices, space: FeasibleSpace, engine: str = "auto") -> Allocation:
    p = _check_prices(prices, space.H)
    if p.ndim != 1:
        raise ShapeMismatch("solve_allocation takes one price vector; use solve_batch")
    if engine == "auto":
        engine = "pairs" if space.uncapped else "simplex"
    if engine == "pairs":
        if not space.uncapped:
            raise InvalidSpec("pairs engine requires caps all equal to 1")
        return Allocation(solve_batch(p[None, :], space)[0])
    if engine == "simplex":
        return Allocation(_simplex_allocation(p, space))
    raise ValueError(f"unknown engine {engine!r}")


# ---------------------------------------------------------------- simplex engine


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]


def _run_simplex(T: np.ndarray, basis: list[int], allowed: int) -> None:
    """Bland's rule pivoting on a tableau whose last row holds reduced costs."""
    m = T.shape[0] - 1
    for _ in range(50_000):
        cost_row = T[-1, :allowed]
        entering = next((j for j in range(allowed) if cost_row[j] < -PIVOT_TOL), None)
        if entering is None:
            return
        col = T[:m, entering]
        best_ratio, leave = np.inf, None
        for i in range(m):
            if col[i] > PIVOT_TOL:
                ratio = T[i, -1] / col[i]
                if ratio < best_ratio - 1e-15 or (
                    abs(ratio - best_ratio) <= 1e-15 and basis[i] < basis[leave]
                ):
                    best_ratio, leave = ratio, i
        if leave is None:
            raise InvalidSpec("LP is unbounded")
        _pivot(T, leave, entering)
        basis[leave] = entering
    raise RuntimeError("simplex iteration limit reached")


def simplex_solve(c, A_eq, b_eq) -> np.ndarray:
    """min c.x s.t. A_eq x = b_eq, x >= 0 (dense two-phase simplex, Bland's rule)."""
    c = np.asarray(c, dtype=float)
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    m, n = A.shape

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    _run_simplex(T, basis, n + m)
    if -T[-1, -1] > 1e-9 * max(1.0, b.sum()):
        raise Infeasible("no feasible allocation")

    # drive artificials out of the basis; drop redundant rows
    keep = []
    for i in range(m):
        if basis[i] >= n:
            j = next((j for j in range(n) if abs(T[i, j]) > PIVOT_TOL), None)
            if j is None:
                continue
            _pivot(T, i, j)
            basis[i] = j
        keep.append(i)
    T2 = np.zeros((len(keep) + 1, n + 1))
    T2[:-1, :n] = T[keep, :n]
    T2[:-1, -1] = T[keep, -1]
    basis = [basis[i] for i in keep]
    cb = c[basis]
    T2[-1, :n] = c - cb @ T2[:-1, :n]
    T2[-1, -1] = -cb @ T2[:-1, -1]
    _run_simplex(T2, basis, n)

    x = np.zeros(n)
    for i, j in enumerate(basis):
        x[j] = T2[i, -1]
    return x


def _allocation_lp(space: FeasibleSpace):
    """Standard-form rows: a + s = caps, sum(a) = 1, r.a + t = r0."""
    H = space.H
    n = 2 * H + (1 if space.risk_enabled else 0)
    rows, rhs = [], []
    for h in range(H):
        row = np.zeros(n)
        row[h] = 1.0
        row[H + h] = 1.0
        rows.append(row)
        rhs.append(space.caps[h])
    row = np.zeros(n)
    row[:H] = 1.0
    rows.append(row)
    rhs.append(1.0)
    if space.risk_enabled:
        row = np.zeros(n)
        row[:H] = space.risk
        row[-1] = 1.0
        rows.append(row)
        rhs.append(space.threshold)
    return np.array(rows), np.array(rhs), n


def _simplex_allocation(prices: np.ndarray, space: FeasibleSpace) -> np.ndarray:
    H = space.H
    if space.risk_enabled and space.threshold < 0:
        raise Infeasible("negative risk threshold with nonnegative risk")
    A, b, n = _allocation_lp(space)
    c = np.zeros(n)
    c[:H] = prices
    x = simplex_solve(c, A, b)
    z = float(prices @ x[:H])
    # among optimal points, prefer weight on low indices
    tol = TIE_TOL * max(1.0, float(np.abs(prices).max()))
    A2 = np.zeros((A.shape[0] + 1, n + 1))
    A2[:-1, :n] = A
    A2[-1, :H] = prices
    A2[-1, n] = 1.0
    b2 = np.append(b, z + tol)
    c2 = np.zeros(n + 1)
    c2[:H] = np.arange(1, H + 1)
    try:
        x = simplex_solve(c2, A2, b2)
    except Infeasible:
        pass
    a = np.clip(x[:H], 0.0, None)
    return a / a.sum()


# ---------------------------------------------------------------- oracle


def brute_force_oracle(prices, space: FeasibleSpace, grid_steps: int = 1000) -> Allocation | None:
    """Grid-search optimum for test-scale problems (H <= 8). Returns None if infeasible.

    Every LP vertex here has some weights at their cap, at most two weights strictly
    inside their bounds, and the rest zero. The search walks, for each set of capped
    positions, a ``grid_steps`` lattice along every remaining pair edge, and adds the
    exact points where the risk constraint is tight on that edge.
    """
    p = _check_prices(prices, space.H)
    H = space.H
    if H > 8:
        raise InvalidSpec("brute_force_oracle is limited to H <= 8")
    caps = space.caps
    pts = []
    t = np.linspace(0.0, 1.0, grid_steps + 1)
    for size in range(H + 1):
        for S in itertools.combinations(range(H), size):
            S = list(S)
            mass = 1.0 - caps[S].sum()
            if mass < -FEAS_TOL:
                continue
            base = np.zeros(H)
            base[S] = caps[S]
            if mass <= FEAS_TOL:
                pts.append(base[None, :])
                continue
            free = [h for h in range(H) if h not in S]
            for i in free:
                if caps[i] >= mass - FEAS_TOL:
                    v = base.copy()
                    v[i] = mass
                    pts.append(v[None, :])
            for i, j in itertools.combinations(free, 2):
                lo, hi = max(0.0, mass - caps[j]), min(caps[i], mass)
                if lo > hi:
                    continue
                ai = lo + (hi - lo) * t
                block = np.repeat(base[None, :], ai.size, axis=0)
                block[:, i] = ai
                block[:, j] = mass - ai
                pts.append(block)
                if space.risk_enabled:
                    r = space.risk
                    system = np.array([[1.0, 1.0], [r[i], r[j]]])
                    if abs(np.linalg.det(system)) > 1e-14:
                        target = np.array([mass, space.threshold - r[S] @ caps[S]])
                        ai_, aj_ = np.linalg.solve(system, target)
                        if -FEAS_TOL <= ai_ <= caps[i] + FEAS_TOL and -FEAS_TOL <= aj_ <= caps[j] + FEAS_TOL:
                            v = base.copy()
                            v[i], v[j] = max(ai_, 0.0), max(aj_, 0.0)
                            pts.append(v[None, :])
    P = np.vstack(pts)
    if space.risk_enabled:
        P = P[P @ space.risk <= space.threshold + FEAS_TOL]
    if P.shape[0] == 0:
        return None
    return Allocation(P[int(np.argmin(P @ p))])
