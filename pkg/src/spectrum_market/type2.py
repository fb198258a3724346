"""QoS-penalty (type-II) game.

Player ``i`` earns ``p_i q_i - theta * log[(B_i / r_i) / (q_i^a - q_i)]``.  The
log term is a queueing-delay barrier, so demand must stay strictly below
capacity.  The first-order condition in demand space,

    k_i q_i + mu b_i Z - alpha_i b_i + theta b_i / (q_i^a - q_i) = 0,
    k_i = 1 + beta_i b_i - mu b_i,   Z = sum_j q_j,

is a quadratic in ``q_i`` once the aggregate ``Z`` is fixed.  Its smaller root
``h_i(Z)`` decreases in ``Z``, so ``Z = sum_i h_i(Z)`` has a unique solution
found by bisection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    ComplexRootsError,
    ConditionViolationError,
    DimensionMismatchError,
    InfeasibleMarketError,
    InvalidParametersError,
    NoInteriorSolutionError,
    PenaltyDomainError,
    ToleranceError,
)
from .market import CapacitySpec, DemandModel, MarketParameters, demand, inverse_demand, params_from_demand_model
from .type1 import Case, EquilibriumResult
from .dynamics import OrbitRecord

BISECT_TOL = 1e-12
BISECT_MAX_ITER = 200
ACCEPT_RESIDUAL = 1e-10
FOC_TOL = 1e-8


@dataclass(frozen=True)
class Type2Config:
    """Penalty weight, capacities and the optional per-player load offsets ``B_i / r_i``."""

    theta: float
    caps: CapacitySpec
    load_terms: np.ndarray | None = None

    def __post_init__(self):
        if not (self.theta > 0 and math.isfinite(self.theta)):
            raise InvalidParametersError("theta must be positive")
        if not np.all(self.caps.limited):
            raise InvalidParametersError("the delay penalty needs finite capacities")
        if self.load_terms is not None:
            lt = np.asarray(self.load_terms, dtype=float)
            if lt.shape != self.caps.q_avail.shape or np.any(lt <= 0):
                raise InvalidParametersError("load terms must be positive, one per player")
            object.__setattr__(self, "load_terms", lt)

    @property
    def offset_included(self) -> bool:
        """False when the constant ``theta log(B_i / r_i)`` is left out of utilities."""
        return self.load_terms is not None

    def with_theta(self, theta: float) -> "Type2Config":
        return Type2Config(theta, self.caps, self.load_terms)


def capacity_flags(params: MarketParameters, cfg: Type2Config) -> np.ndarray:
    """Players violating the necessary condition ``alpha_i q_i^a >= theta``."""
    return params.alpha * cfg.caps.q_avail < cfg.theta


def type2_utility(model: DemandModel, params: MarketParameters | None, cfg: Type2Config, i: int, p) -> float:
    p = np.asarray(p, dtype=float)
    q = demand(model, p)[i]
    qa = cfg.caps.q_avail[i]
    if q >= qa:
        raise PenaltyDomainError(f"player {i + 1} demand {q:g} reaches its capacity {qa:g}")
    value = p[i] * q + cfg.theta * math.log(qa - q)
    if cfg.load_terms is not None:
        value -= cfg.theta * math.log(cfg.load_terms[i])
    return float(value)


def type2_payoffs(model: DemandModel, cfg: Type2Config, p) -> np.ndarray:
    return np.array([type2_utility(model, None, cfg, i, p) for i in range(model.n)])


def foc_residuals(model: DemandModel, cfg: Type2Config, p, slack=None) -> np.ndarray:
    """``d pi_i / d p_i`` at ``p``: ``q_i - b_i p_i + theta b_i / (q_i^a - q_i)``.

    Pass ``slack = q^a - q`` when it is known more precisely than ``q^a - demand(p)``;
    for tiny theta the gap is far below the rounding error of the demand.
    """
    p = np.asarray(p, dtype=float)
    if slack is None:
        q = demand(model, p)
        slack = cfg.caps.q_avail - q
    else:
        slack = np.asarray(slack, dtype=float)
        q = cfg.caps.q_avail - slack
    return q - model.b * p + cfg.theta * model.b / slack


def _positive_root(k: float, r: float, t: float) -> float:
    """Positive root of ``k s^2 - r s - t = 0`` for ``k, t > 0``, free of cancellation."""
    root = math.sqrt(r * r + 4.0 * k * t)
    return (r + root) / (2.0 * k) if r >= 0 else 2.0 * t / (root - r)


def _quadratic_terms(model: DemandModel, params: MarketParameters, i: int, z: float):
    k = 1.0 + params.beta[i] * model.b[i] - params.mu * model.b[i]
    m = params.mu * model.b[i] * z - params.alpha[i] * model.b[i]
    return k, m


def h_of_z(model: DemandModel, params: MarketParameters, cfg: Type2Config, i: int, z: float) -> float:
    """Smaller root of ``k q^2 - (k q^a - m) q - (m q^a + theta b) = 0``.

    The larger root always exceeds ``q^a``; this one always stays below it.
    """
    k, m = _quadratic_terms(model, params, i, z)
    qa = cfg.caps.q_avail[i]
    disc = (k * qa + m) ** 2 + 4.0 * k * cfg.theta * model.b[i]
    return ((k * qa - m) - math.sqrt(disc)) / (2.0 * k)


def h_slack(model: DemandModel, params: MarketParameters, cfg: Type2Config, i: int, z: float) -> float:
    """``q^a - h_i(Z)`` computed directly, accurate even when demand sits next to capacity."""
    k, m = _quadratic_terms(model, params, i, z)
    return _positive_root(k, k * cfg.caps.q_avail[i] + m, cfg.theta * model.b[i])


def h_roots(model: DemandModel, params: MarketParameters, cfg: Type2Config, i: int, z: float):
    """Both roots (larger first) of the per-player quadratic."""
    k, m = _quadratic_terms(model, params, i, z)
    qa = cfg.caps.q_avail[i]
    root = math.sqrt((k * qa + m) ** 2 + 4.0 * k * cfg.theta * model.b[i])
    return ((k * qa - m) + root) / (2.0 * k), ((k * qa - m) - root) / (2.0 * k)


def h_quadratic_residual(model, params, cfg, i, z, q) -> float:
    k, m = _quadratic_terms(model, params, i, z)
    qa = cfg.caps.q_avail[i]
    return k * q * q - (k * qa - m) * q - (m * qa + cfg.theta * model.b[i])


@dataclass
class AggregateDemandSolve:
    z_star: float
    residual: float
    per_player_q: np.ndarray
    feasibility_flags: dict
    iterations: int = 0
    foc_residual: float = 0.0

    def as_record(self) -> dict:
        return {
            "z_star": self.z_star,
            "residual": self.residual,
            "q": [float(x) for x in self.per_player_q],
            "flags": {k: [bool(x) for x in np.atleast_1d(v)] for k, v in self.feasibility_flags.items()},
        }


def _resolve_params(model: DemandModel, params: MarketParameters | None) -> MarketParameters:
    return params if params is not None else params_from_demand_model(model, strict=False)


def _check_dims(model, params, cfg):
    if not (model.n == params.n == cfg.caps.n):
        raise DimensionMismatchError("market, parameters and capacities disagree on player count")


def existence_conditions(model: DemandModel, params: MarketParameters, cfg: Type2Config, z: float | None = None) -> dict:
    """The four existence conditions, one boolean vector per condition.

    The last one involves the solution ``Z*`` itself and is only available after solving.
    """
    off = ~np.eye(model.n, dtype=bool)
    flags = {
        "beta_exceeds_mu": params.beta > params.mu,
        "positive_coefficients": np.full(model.n, bool(
            np.all(params.alpha > 0) and np.all(params.beta > 0) and params.mu > 0
            and np.all(model.a > 0) and np.all(model.b > 0) and np.all(model.c[off] > 0))),
        "capacity_covers_theta": params.alpha * cfg.caps.q_avail >= cfg.theta,
    }
    if z is not None:
        qa = cfg.caps.q_avail
        flags["aggregate_sign"] = (params.mu * model.b * z * qa - params.alpha * model.b * qa
                                   + cfg.theta * model.b) <= 0
    return flags


def type2_oligopoly_ne(model: DemandModel, params: MarketParameters | None, cfg: Type2Config,
                       tol: float = BISECT_TOL, max_iter: int = BISECT_MAX_ITER):
    """Type-II equilibrium for any number of players via the aggregate-demand fixed point."""
    params = _resolve_params(model, params)
    _check_dims(model, params, cfg)
    n = model.n

    def g(z):
        return sum(h_of_z(model, params, cfg, i, z) for i in range(n)) - z

    lo, hi = 0.0, float(np.sum(cfg.caps.q_avail))
    g_lo = g(lo)
    if not g_lo > 0:
        raise InfeasibleMarketError(f"sum of best-response demands at Z=0 is {g_lo:.6g}, not positive", gap=g_lo)
    z = lo
    gz = g_lo
    it = 0
    for it in range(1, max_iter + 1):
        z = 0.5 * (lo + hi)
        gz = g(z)
        if abs(gz) < tol or hi - lo < 4 * np.finfo(float).eps * max(1.0, hi):
            break
        if gz > 0:
            lo = z
        else:
            hi = z
    if abs(gz) >= ACCEPT_RESIDUAL:
        raise ToleranceError(f"bisection stalled with |g(Z)| = {abs(gz):.3g}")
    q = np.array([h_of_z(model, params, cfg, i, z) for i in range(n)])
    flags = existence_conditions(model, params, cfg, z)
    for name in ("beta_exceeds_mu", "positive_coefficients", "aggregate_sign"):
        if not np.all(flags[name]):
            raise ConditionViolationError(f"existence condition '{name}' fails for players "
                                          f"{[int(i) + 1 for i in np.flatnonzero(~flags[name])]}", condition=name)
    if np.any(q <= 0) or np.any(q >= cfg.caps.q_avail):
        raise ConditionViolationError("equilibrium demand leaves (0, q^a)", condition="interior_demand")
    p = inverse_demand(params, q)
    slack = np.array([h_slack(model, params, cfg, i, z) for i in range(n)])
    foc = float(np.max(np.abs(foc_residuals(model, cfg, p, slack))))
    solve = AggregateDemandSolve(float(z), abs(float(gz)), q, flags, it, foc)
    result = EquilibriumResult(p, demand(model, p), type2_payoffs(model, cfg, p), np.zeros(n, dtype=bool), Case.TYPE2)
    return result, solve


def type2_duopoly_ne(model: DemandModel, params: MarketParameters | None, cfg: Type2Config) -> EquilibriumResult:
    """Duopoly equilibrium by eliminating ``q2`` and solving a scalar equation.

    The unknown is player 1's slack ``s1 = q1^a - q1``.  Player 1's condition
    gives ``q2`` as an increasing function of ``s1``; substituting it into player
    2's condition leaves an increasing function of ``s1`` whose root is
    bracketed where ``0 < q2 < q2^a``.  Working with slacks keeps full relative
    precision when theta is tiny and both players sit next to capacity.
    """
    params = _resolve_params(model, params)
    _check_dims(model, params, cfg)
    if model.n != 2:
        raise DimensionMismatchError("elimination solver handles two players")
    (al1, al2), (be1, be2), mu = params.alpha, params.beta, params.mu
    (b1, b2), th = model.b, cfg.theta
    q1a, q2a = cfg.caps.q_avail
    k1, k2 = 1 + be1 * b1, 1 + be2 * b2
    rtol = 4 * np.finfo(float).eps

    def q2_of(s1):
        return (b1 * al1 - k1 * (q1a - s1) - th * b1 / s1) / (mu * b1)

    def gap(s1):
        q2 = q2_of(s1)
        return k2 * q2 + mu * b2 * (q1a - s1) - b2 * al2 + th * b2 / (q2a - q2)

    def solve(f, lo, hi):
        return brentq(f, lo, hi, xtol=1e-300, rtol=rtol, maxiter=1000)

    tiny = 1e-300
    if q2_of(q1a) <= 0:
        raise NoInteriorSolutionError("second player's demand is not positive even at q1 = 0")
    lo = solve(q2_of, tiny, q1a)
    lo = math.nextafter(lo, q1a)
    if q2_of(q1a) < q2a:
        hi = q1a
        if not gap(hi) > 0:
            raise NoInteriorSolutionError(f"sign condition at q1 = 0 fails (gap {gap(hi):.6g})")
    else:
        hi = solve(lambda x: q2_of(x) - q2a, lo, q1a)
        while q2_of(hi) >= q2a:
            hi = math.nextafter(hi, lo)
    if not gap(lo) < 0:
        raise NoInteriorSolutionError("no sign change before the second player's demand reaches zero")
    s1 = solve(gap, lo, hi)
    q1 = q1a - s1
    # player 2's slack from its own condition given q1
    s2 = _positive_root(k2, k2 * q2a + mu * b2 * q1 - b2 * al2, th * b2)
    q = np.array([q1, q2a - s2])
    p = inverse_demand(params, q)
    res = foc_residuals(model, cfg, p, [s1, s2])
    if np.max(np.abs(res)) > FOC_TOL:
        raise ToleranceError(f"first-order residuals {res} exceed {FOC_TOL:g}")
    return EquilibriumResult(p, demand(model, p), type2_payoffs(model, cfg, p), np.zeros(2, dtype=bool), Case.TYPE2)


# -- QoSBEST ----------------------------------------------------------------

@dataclass
class QosStepDiagnostics:
    roots: np.ndarray  # (n, 2): larger and smaller price root per player
    demands: np.ndarray  # (n, 2): predicted demand at each root
    feasible: np.ndarray  # (n, 2) bool
    chosen: np.ndarray  # index into the root pair per player
    discriminant: np.ndarray
    unique_feasible: np.ndarray = field(default=None)


def qosbest_roots(model: DemandModel, cfg: Type2Config, i: int, p):
    """Price roots of player ``i``'s best-response quadratic, larger first.

    With ``s = a_i + sum_j c_ij p_j`` the condition is
    ``2 b^2 x^2 + (2 b (q^a - s) - b s) x - s (q^a - s) - b theta = 0``.
    """
    p = np.asarray(p, dtype=float)
    s = model.a[i] + model.c[i] @ p
    b, qa, th = model.b[i], cfg.caps.q_avail[i], cfg.theta
    qa_coef = 2.0 * b * b
    lin = 2.0 * b * (qa - s) - b * s
    const = -s * (qa - s) - b * th
    disc = lin * lin - 4.0 * qa_coef * const
    if disc < 0:
        raise ComplexRootsError(f"player {i + 1}: discriminant {disc:g} < 0 (s={s:g}, q^a={qa:g}, theta={th:g})")
    root = math.sqrt(disc)
    return (-lin + root) / (2.0 * qa_coef), (-lin - root) / (2.0 * qa_coef), s, disc


def qosbest_step(model: DemandModel, cfg: Type2Config, p):
    """Each player solves its own quadratic against the opponents' current prices."""
    p = np.asarray(p, dtype=float)
    n = model.n
    new = np.empty(n)
    diag = QosStepDiagnostics(np.empty((n, 2)), np.empty((n, 2)), np.zeros((n, 2), bool),
                              np.zeros(n, int), np.empty(n), np.zeros(n, bool))
    for i in range(n):
        hi_root, lo_root, s, disc = qosbest_roots(model, cfg, i, p)
        qa = cfg.caps.q_avail[i]
        pair = (hi_root, lo_root)
        dem = [s - model.b[i] * x for x in pair]
        ok = [0 < d < qa for d in dem]
        if ok[0] != ok[1]:
            k = 0 if ok[0] else 1
        else:
            utils = []
            for x, d in zip(pair, dem):
                utils.append(x * d + cfg.theta * math.log(qa - d) if d < qa else -math.inf)
            if abs(utils[0] - utils[1]) <= 1e-12:
                k = int(np.argmin(pair))
            else:
                k = int(np.argmax(utils))
        new[i] = pair[k]
        diag.roots[i] = pair
        diag.demands[i] = dem
        diag.feasible[i] = ok
        diag.chosen[i] = k
        diag.discriminant[i] = disc
        diag.unique_feasible[i] = ok[0] != ok[1]
    return new, diag


def closed_form_price(model: DemandModel, cfg: Type2Config, i: int, p) -> float:
    """Closed-form best response ``[(3s - 2q^a) + sqrt((s - 2q^a)^2 + 8 b theta)] / (4b)``."""
    p = np.asarray(p, dtype=float)
    s = model.a[i] + model.c[i] @ p
    b, qa = model.b[i], cfg.caps.q_avail[i]
    return ((3 * s - 2 * qa) + math.sqrt((s - 2 * qa) ** 2 + 8 * b * cfg.theta)) / (4 * b)


def qosbest_run(model: DemandModel, cfg: Type2Config, p0, tol: float = 1e-10, max_iter: int = 1000,
                params: MarketParameters | None = None, validate: bool = True) -> OrbitRecord:
    """Iterate QoSBEST; records two-slot contraction ratios of the second player's price."""
    if model.n == 2:
        b1, b2 = model.b
        c = model.cross
        if not (b1 > c > 0 and b2 > c > 0):
            raise InvalidParametersError("convergence guarantee needs b_i > c > 0")
    p = np.asarray(p0, dtype=float)
    traj = [p]
    chosen = []
    closed_form_gap = 0.0
    converged = False
    for _ in range(max_iter):
        new, diag = qosbest_step(model, cfg, p)
        chosen.append(diag.chosen.copy())
        closed = np.array([closed_form_price(model, cfg, i, p) for i in range(model.n)])
        closed_form_gap = max(closed_form_gap, float(np.max(np.abs(closed - new))))
        traj.append(new)
        step = float(np.max(np.abs(new - p)))
        p = new
        if step < tol:
            converged = True
            break
    traj = np.array(traj)
    rec = OrbitRecord(traj, np.array(chosen, dtype=np.int8).reshape(-1, model.n), converged,
                      p.copy() if converged else None, len(chosen))
    rec.extras["closed_form_gap"] = closed_form_gap
    if validate and model.n == 2:
        ne = type2_duopoly_ne(model, params, cfg)
        rec.ne_gap = float(np.max(np.abs(p - ne.prices))) if converged else None
        rec.extras["foc_residual"] = float(np.max(np.abs(foc_residuals(model, cfg, p))))
        rec.extras["contraction_ratios"] = contraction_ratios(traj[:, 1], ne.prices[1])
        rec.extras["contraction_bound"] = model.cross ** 2 / (model.b[0] * model.b[1])
    return rec


def contraction_ratios(series: Sequence[float], target: float, floor: float = 1e-7) -> np.ndarray:
    """``|x(t+2) - x*| / |x(t) - x*|`` wherever ``|x(t) - x*|`` exceeds ``floor``."""
    err = np.abs(np.asarray(series, dtype=float) - target)
    idx = np.flatnonzero(err[:-2] > floor)
    return err[idx + 2] / err[idx]
