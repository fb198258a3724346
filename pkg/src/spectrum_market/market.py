"""Market primitives: secondary-user utility, linear demand system, capacities.

Secondary users hold the quadratic utility

    u(q) = sum(alpha_i q_i) - 1/2 (sum(beta_i q_i^2) + 2 mu sum_{i < j} q_i q_j) - sum(p_i q_i)

whose first-order conditions give the inverse demand ``p = alpha - T q``
with ``T`` carrying ``beta`` on the diagonal and ``mu`` elsewhere.  Inverting
``T`` yields the linear demand ``q_i = a_i - b_i p_i + sum_j c_ij p_j`` that
every solver in the package works with.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DimensionMismatchError,
    InvalidParametersError,
    NonSymmetricError,
    SignViolationError,
    SingularMatrixError,
)

PIVOT_TOL = 1e-12

#: Sentinel for a player with no capacity limit.
UNLIMITED = math.inf


def _vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


def _check_len(vec: np.ndarray, n: int, name: str) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (n,):
        raise DimensionMismatchError(f"{name} has shape {vec.shape}, expected ({n},)")
    return vec


@dataclass(frozen=True)
class MarketParameters:
    """Utility-side parameters of the secondary users.

    ``strict`` enforces ``beta_i > mu > 0``, the condition under which the
    substitutability matrix is positive definite and all derived slopes are
    positive.  Turn it off to build degenerate markets such as ``mu = 0``.
    """

    alpha: np.ndarray
    beta: np.ndarray
    mu: float
    strict: bool = True

    def __post_init__(self):
        alpha = _vector(self.alpha, "alpha")
        beta = _vector(self.beta, "beta")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "mu", float(self.mu))
        if alpha.shape != beta.shape:
            raise DimensionMismatchError("alpha and beta must have the same length")
        if alpha.size < 2:
            raise InvalidParametersError("a market needs at least two players")
        if not np.all(np.isfinite(alpha)) or not np.all(np.isfinite(beta)) or not math.isfinite(self.mu):
            raise InvalidParametersError("market parameters must be finite")
        if np.any(alpha <= 0):
            raise InvalidParametersError("all alpha_i must be positive")
        if np.any(beta <= 0):
            raise InvalidParametersError("all beta_i must be positive")
        if self.mu < 0:
            raise InvalidParametersError("mu must be nonnegative")
        if self.strict and not (self.mu > 0 and np.all(beta > self.mu)):
            raise InvalidParametersError(
                "strict validity requires beta_i > mu > 0 for every player "
                "(positive definiteness of the substitutability matrix)"
            )

    @property
    def n(self) -> int:
        return int(self.alpha.size)


@dataclass(frozen=True)
class DemandModel:
    """Linear demand ``q_i = a_i - b_i p_i + sum_{j != i} c_ij p_j``.

    ``c`` is stored as a full symmetric matrix with a zero diagonal.
    ``nonpositive_intercepts`` lists players with ``a_i <= 0``; that is
    allowed but usually means the market has no positive-price equilibrium.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    nonpositive_intercepts: tuple = field(default=(), compare=False)

    def __post_init__(self):
        a = _vector(self.a, "a")
        b = _vector(self.b, "b")
        n = a.size
        c = np.asarray(self.c, dtype=float)
        if c.ndim == 0:
            c = np.full((n, n), float(c))
        if c.shape != (n, n) or b.shape != (n,):
            raise DimensionMismatchError("a, b and c describe different player counts")
        c = c.copy()
        np.fill_diagonal(c, 0.0)
        if not np.array_equal(c, c.T):
            raise NonSymmetricError("cross-price slopes must satisfy c_ij == c_ji")
        if np.any(b <= 0):
            raise SignViolationError("own-price slopes b_i must be positive")
        if np.any(c < 0):
            raise SignViolationError("cross-price slopes c_ij must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "nonpositive_intercepts", tuple(int(i) for i in np.flatnonzero(a <= 0)))

    @classmethod
    def duopoly(cls, a: Sequence[float], b: Sequence[float], c: float) -> "DemandModel":
        return cls(np.asarray(a, float), np.asarray(b, float), np.array([[0.0, c], [c, 0.0]]))

    @property
    def n(self) -> int:
        return int(self.a.size)

    @property
    def cross(self) -> float:
        """Cross-price slope of a duopoly."""
        if self.n != 2:
            raise DimensionMismatchError("cross slope is only defined for duopolies")
        return float(self.c[0, 1])

    def permuted(self, order: Sequence[int]) -> "DemandModel":
        order = np.asarray(order)
        return DemandModel(self.a[order], self.b[order], self.c[np.ix_(order, order)])


@dataclass(frozen=True)
class CapacitySpec:
    """Spectrum each player can lease; ``inf`` marks an unlimited player."""

    q_avail: np.ndarray

    def __post_init__(self):
        q = _vector(self.q_avail, "q_avail")
        if np.any(np.isnan(q)) or np.any(q <= 0):
            raise InvalidParametersError("available spectrum must be positive (or inf)")
        object.__setattr__(self, "q_avail", q)

    @classmethod
    def unlimited(cls, n: int) -> "CapacitySpec":
        return cls(np.full(n, UNLIMITED))

    @classmethod
    def from_load(cls, w, load, rate) -> "CapacitySpec":
        """Capacity left after primary traffic: ``W_i - B_i / r_i``."""
        w, load, rate = (np.asarray(x, dtype=float) for x in (w, load, rate))
        if np.any(w * rate <= load):
            raise InvalidParametersError("primary traffic uses the whole band (W_i r_i <= B_i)")
        return cls(w - load / rate)

    @property
    def n(self) -> int:
        return int(self.q_avail.size)

    @property
    def limited(self) -> np.ndarray:
        return np.isfinite(self.q_avail)

    def permuted(self, order: Sequence[int]) -> "CapacitySpec":
        return CapacitySpec(self.q_avail[np.asarray(order)])


# -- small dense SPD algebra -------------------------------------------------

def cholesky(m: np.ndarray, tol: float = PIVOT_TOL) -> np.ndarray:
    """Lower Cholesky factor; raises if any pivot is not above ``tol``."""
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    low = np.zeros_like(m)
    for j in range(n):
        pivot = m[j, j] - low[j, :j] @ low[j, :j]
        if not pivot > tol:
            raise SingularMatrixError(f"pivot {j} = {pivot:.3e} does not exceed {tol:g}")
        low[j, j] = math.sqrt(pivot)
        low[j + 1:, j] = (m[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low


def _check_symmetric(m: np.ndarray, tol: float) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {m.shape}")
    if np.max(np.abs(m - m.T), initial=0.0) > tol:
        raise NonSymmetricError("matrix is not symmetric within tolerance")


def check_positive_definite(m, tol: float = PIVOT_TOL) -> bool:
    m = np.asarray(m, dtype=float)
    _check_symmetric(m, tol)
    try:
        cholesky(m, tol)
    except SingularMatrixError:
        return False
    return True


def spd_solve(m, rhs, tol: float = PIVOT_TOL) -> np.ndarray:
    low = cholesky(np.asarray(m, dtype=float), tol)
    y = solve_triangular(low, np.asarray(rhs, dtype=float), lower=True)
    return solve_triangular(low.T, y, lower=False)


def spd_inverse(m, tol: float = PIVOT_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return spd_solve(m, np.eye(m.shape[0]), tol)


# -- market operations -------------------------------------------------------

def build_substitutability_matrix(params: MarketParameters) -> np.ndarray:
    n = params.n
    t = np.full((n, n), params.mu)
    np.fill_diagonal(t, params.beta)
    return t


def derive_demand_model(params: MarketParameters) -> DemandModel:
    """Invert the substitutability matrix into demand intercepts and slopes."""
    t = build_substitutability_matrix(params)
    _check_symmetric(t, PIVOT_TOL)
    inv = spd_inverse(t)
    inv = 0.5 * (inv + inv.T)
    b = np.diag(inv).copy()
    c = -inv
    np.fill_diagonal(c, 0.0)
    off = ~np.eye(params.n, dtype=bool)
    if np.any(b <= 0):
        raise SignViolationError("derived own-price slope is not positive")
    if params.mu > 0 and np.any(c[off] <= 0):
        raise SignViolationError("derived cross-price slope is not positive")
    if params.mu == 0:
        c[off] = 0.0
    c = np.maximum(c, 0.0)
    a = params.alpha * b - c @ params.alpha
    model = DemandModel(a, b, c)
    if model.nonpositive_intercepts:
        warnings.warn(
            f"demand intercepts a_i <= 0 for players {list(model.nonpositive_intercepts)}",
            RuntimeWarning,
            stacklevel=2,
        )
    return model


def params_from_demand_model(model: DemandModel, strict: bool = True, rtol: float = 1e-9) -> MarketParameters:
    """Recover ``alpha, beta, mu`` from demand coefficients.

    Only markets whose inverse has a single off-diagonal value come from the
    quadratic utility; every duopoly does.
    """
    slope = np.diag(model.b) - model.c
    t = spd_inverse(slope)
    t = 0.5 * (t + t.T)
    off = t[~np.eye(model.n, dtype=bool)]
    mu = float(off.mean())
    if np.max(np.abs(off - mu)) > rtol * max(1.0, abs(mu)):
        raise InvalidParametersError("demand model has no common substitutability parameter mu")
    return MarketParameters(t @ model.a, np.diag(t).copy(), mu, strict=strict)


def demand(model: DemandModel, p, with_flag: bool = False):
    """Raw linear demand; entries may be negative.

    With ``with_flag`` the boolean mask of negative demands is returned too.
    """
    p = _check_len(p, model.n, "price vector")
    q = model.a - model.b * p + model.c @ p
    if with_flag:
        return q, q < 0
    return q


def inverse_demand(params: MarketParameters, q) -> np.ndarray:
    q = _check_len(q, params.n, "demand vector")
    return params.alpha - params.beta * q - params.mu * (q.sum() - q)


def secondary_utility(params: MarketParameters, q, p) -> float:
    q = _check_len(q, params.n, "demand vector")
    p = _check_len(p, params.n, "price vector")
    total = q.sum()
    # sum over unordered pairs i < j, so the stationarity condition is inverse_demand
    pairs = 0.5 * (total * total - q @ q)
    return float(params.alpha @ q - 0.5 * (params.beta @ (q * q) + 2.0 * params.mu * pairs) - p @ q)


def type1_payoffs(model: DemandModel, caps: CapacitySpec, p) -> np.ndarray:
    """Revenue ``p_i * min(f_i(p), q_i^a)`` under strict capacities."""
    p = np.asarray(p, dtype=float)
    return p * np.minimum(demand(model, p), caps.q_avail)
