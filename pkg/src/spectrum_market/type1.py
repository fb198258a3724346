"""Static Nash equilibria of the strict-capacity (type-I) Bertrand game.

Each player earns ``p_i * min(f_i(p), q_i^a)``.  A player is
*capacity-insufficient* (binding) when the demand at its unconstrained best
response, ``(a_i + sum_j c_ij p_j) / 2``, exceeds its capacity; such a player
prices so that its demand equals the capacity instead.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateMarketError,
    DimensionMismatchError,
    InconsistentCaseError,
    NoConvergenceError,
    SignViolationError,
    SingularMatrixError,
    SingularSystemError,
)
from .market import CapacitySpec, DemandModel, demand, spd_solve

#: Demand within this distance of capacity counts as capacity-sufficient.
TIE_TOL = 1e-9


class Case(str, enum.Enum):
    CASE1 = "Case1"  # nobody binding
    CASE2 = "Case2"  # player 1 binding
    CASE3 = "Case3"  # player 2 binding
    CASE4 = "Case4"  # both binding
    OLIGOPOLY = "OligopolyGeneral"
    TYPE2 = "TypeII"

    @classmethod
    def from_binding(cls, binding: Sequence[bool]) -> "Case":
        if len(binding) != 2:
            return cls.OLIGOPOLY
        return {
            (False, False): cls.CASE1,
            (True, False): cls.CASE2,
            (False, True): cls.CASE3,
            (True, True): cls.CASE4,
        }[(bool(binding[0]), bool(binding[1]))]


@dataclass(frozen=True)
class EquilibriumResult:
    """Equilibrium prices with the post-capacity demands and payoffs."""

    prices: np.ndarray
    demands: np.ndarray
    payoffs: np.ndarray
    binding: np.ndarray
    case_label: Case
    resolved_by_search: bool = False

    def as_record(self) -> dict:
        return {
            "case": self.case_label.value,
            "prices": [float(x) for x in self.prices],
            "demands": [float(x) for x in self.demands],
            "payoffs": [float(x) for x in self.payoffs],
            "binding": [bool(x) for x in self.binding],
        }


@dataclass(frozen=True)
class SearchState:
    """One step of the capacity-insufficiency search."""

    iteration: int
    insufficient_set: tuple
    q_matrix: np.ndarray
    rhs: np.ndarray
    prices: np.ndarray

    def as_record(self) -> dict:
        return {
            "k": self.iteration,
            "M": [int(i) for i in self.insufficient_set],
            "p": [float(x) for x in self.prices],
        }


def best_response_demand(model: DemandModel, p) -> np.ndarray:
    """Demand each player would serve at its unconstrained best response to ``p``."""
    p = np.asarray(p, dtype=float)
    return 0.5 * (model.a + model.c @ p)


def binding_mask(model: DemandModel, caps: CapacitySpec, p, tol: float = TIE_TOL) -> np.ndarray:
    return best_response_demand(model, p) > caps.q_avail + tol


def type1_result(model: DemandModel, caps: CapacitySpec, p, case: Case | None = None,
                 resolved_by_search: bool = False) -> EquilibriumResult:
    p = np.asarray(p, dtype=float)
    raw = demand(model, p)
    served = np.minimum(raw, caps.q_avail)
    binding = binding_mask(model, caps, p)
    if case is None:
        case = Case.from_binding(binding)
    return EquilibriumResult(p, served, p * served, binding, case, resolved_by_search)


def _require_duopoly(model: DemandModel, caps: CapacitySpec | None = None) -> None:
    if model.n != 2:
        raise DimensionMismatchError("closed forms exist only for two players")
    if caps is not None and caps.n != 2:
        raise DimensionMismatchError("capacity vector does not match the market")


def duopoly_unconstrained_ne(model: DemandModel) -> EquilibriumResult:
    _require_duopoly(model)
    (a1, a2), (b1, b2), c = model.a, model.b, model.cross
    det = 4 * b1 * b2 - c * c
    if det <= 0:
        raise DegenerateMarketError(f"4 b1 b2 - c^2 = {det:g} is not positive")
    p = np.array([(2 * a1 * b2 + a2 * c) / det, (2 * a2 * b1 + a1 * c) / det])
    return type1_result(model, CapacitySpec.unlimited(2), p, Case.CASE1)


def _first_binding_prices(a1, a2, b1, b2, c, q1):
    """Player 1 sells exactly ``q1``; player 2 best-responds freely."""
    det = 2 * b1 * b2 - c * c
    return np.array([(2 * a1 * b2 + a2 * c - 2 * b2 * q1) / det, (a2 * b1 + a1 * c - c * q1) / det])


def duopoly_case_candidates(model: DemandModel, caps: CapacitySpec) -> dict:
    """Closed-form price vector of every case that is defined for ``caps``."""
    _require_duopoly(model, caps)
    (a1, a2), (b1, b2), c = model.a, model.b, model.cross
    q1, q2 = caps.q_avail
    if 4 * b1 * b2 - c * c <= 0 or b1 * b2 - c * c <= 0:
        raise DegenerateMarketError("duopoly slopes violate b1 b2 > c^2")
    out = {Case.CASE1: duopoly_unconstrained_ne(model).prices}
    if math.isfinite(q1):
        out[Case.CASE2] = _first_binding_prices(a1, a2, b1, b2, c, q1)
    if math.isfinite(q2):
        out[Case.CASE3] = _first_binding_prices(a2, a1, b2, b1, c, q2)[::-1]
    if math.isfinite(q1) and math.isfinite(q2):
        det = b1 * b2 - c * c
        out[Case.CASE4] = np.array([(a1 * b2 + a2 * c - b2 * q1 - c * q2) / det,
                                    (a2 * b1 + a1 * c - b1 * q2 - c * q1) / det])
    return out


_CASE_BINDING = {
    Case.CASE1: (False, False),
    Case.CASE2: (True, False),
    Case.CASE3: (False, True),
    Case.CASE4: (True, True),
}


def duopoly_ne(model: DemandModel, caps: CapacitySpec) -> EquilibriumResult:
    """Closed-form type-I duopoly equilibrium.

    Every case formula is evaluated and checked for self-consistency (each
    player's binding status at the candidate must match the case).  When
    rounding leaves zero or several consistent cases the iterative search
    decides and the result is marked ``resolved_by_search``.
    """
    candidates = duopoly_case_candidates(model, caps)
    consistent = [
        case for case, p in candidates.items()
        if tuple(binding_mask(model, caps, p)) == _CASE_BINDING[case] and np.all(p > 0)
    ]
    if len(consistent) == 1:
        case = consistent[0]
        return type1_result(model, caps, candidates[case], case)
    result, _ = oligopoly_ne_search(model, caps)
    case = Case.from_binding(result.binding)
    if consistent and case not in consistent:
        raise InconsistentCaseError(f"search landed in {case.value}, closed forms allow {[c.value for c in consistent]}")
    return type1_result(model, caps, result.prices, case, resolved_by_search=True)


def mixed_coefficient_system(model: DemandModel, caps: CapacitySpec, insufficient: Iterable[int]):
    """Matrix ``Q(M)`` and right-hand side ``a(M)`` for binding set ``M``.

    Binding rows encode ``f_i(p) = q_i^a``; free rows encode the unconstrained
    first-order condition ``a_i - 2 b_i p_i + sum_j c_ij p_j = 0``.
    """
    mask = np.zeros(model.n, dtype=bool)
    mask[list(insufficient)] = True
    q_matrix = -np.array(model.c, dtype=float)
    np.fill_diagonal(q_matrix, np.where(mask, model.b, 2.0 * model.b))
    rhs = np.where(mask, model.a - np.where(mask, caps.q_avail, 0.0), model.a)
    return q_matrix, rhs


def oligopoly_ne_search(model: DemandModel, caps: CapacitySpec, tol: float = TIE_TOL):
    """Iterative search over capacity-insufficient sets.

    Starts from the all-free system, adds every player whose best-response
    demand exceeds its capacity and re-solves until the set stops growing.
    Returns the equilibrium and the list of :class:`SearchState`.
    """
    if caps.n != model.n:
        raise DimensionMismatchError("capacity vector does not match the market")
    n = model.n
    insufficient: tuple = ()
    trace = []
    for k in range(n + 1):
        q_matrix, rhs = mixed_coefficient_system(model, caps, insufficient)
        try:
            p = spd_solve(q_matrix, rhs)
        except SingularMatrixError as exc:
            raise SingularSystemError(f"Q(M) for M={list(insufficient)} is not positive definite") from exc
        if np.any(p < 0):
            raise SignViolationError(f"negative candidate price {p.min():g} at search step {k}")
        trace.append(SearchState(k, insufficient, q_matrix, rhs, p))
        flagged = np.flatnonzero(binding_mask(model, caps, p, tol))
        grown = tuple(sorted(set(insufficient) | set(int(i) for i in flagged)))
        if grown == insufficient:
            case = Case.from_binding([i in insufficient for i in range(n)]) if n == 2 else Case.OLIGOPOLY
            return type1_result(model, caps, p, case), trace
        insufficient = grown
    raise NoConvergenceError(f"insufficient set still changing after {n} iterations")


def write_trace_jsonl(trace: Sequence[SearchState], fh: IO[str]) -> None:
    for state in trace:
        fh.write(json.dumps(state.as_record()) + "\n")


@dataclass
class VerifyReport:
    """Outcome of the unilateral-deviation test; truthy when no deviation pays."""

    ok: bool
    counterexample: dict | None = None
    max_gain: float = 0.0
    gains: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def ne_verify(model: DemandModel, caps: CapacitySpec, candidate, grid: int | Sequence = 400,
              tol: float = 1e-9) -> VerifyReport:
    """Check that no player gains by a unilateral deviation on a price grid.

    ``grid`` is a point count (deviations span ``[0, 2 p_i]``) or an explicit
    sequence of multipliers applied to ``p_i``.
    """
    p_star = np.asarray(getattr(candidate, "prices", candidate), dtype=float)
    if isinstance(grid, int):
        multipliers = np.linspace(0.0, 2.0, grid)
    else:
        multipliers = np.asarray(grid, dtype=float)
    base = p_star * np.minimum(demand(model, p_star), caps.q_avail)
    gains = []
    first_bad = None
    for i in range(model.n):
        devs = multipliers * p_star[i]
        # f_i(p) with only p_i moving
        q_i = model.a[i] - model.b[i] * devs + model.c[i] @ p_star
        payoff = devs * np.minimum(q_i, caps.q_avail[i])
        k = int(np.argmax(payoff))
        gain = float(payoff[k] - base[i])
        gains.append(gain)
        if gain > tol and first_bad is None:
            first_bad = {"player": i, "price": float(devs[k]), "payoff": float(payoff[k]),
                         "equilibrium_payoff": float(base[i]), "gain": gain}
    return VerifyReport(first_bad is None, first_bad, max(gains), gains)
