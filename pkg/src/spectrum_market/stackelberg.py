"""Leader-follower (Stackelberg) pricing in the type-I duopoly.

The follower's best response to the leader price ``x`` has two regimes:

* free:     ``p_F = (a_F + c x) / (2 b_F)`` while ``(a_F + c x) / 2 <= q_F``
* binding:  ``p_F = (a_F - q_F + c x) / b_F`` above the switch point
  ``x_switch = (2 q_F - a_F) / c``.

Substituting either regime into the leader's demand gives an affine function
``A - B x``, so the leader's revenue ``x * min(A - B x, q_L)`` is unimodal on
each regime interval.  The leader's optimum is the best of the two clipped
regime maximizers; both coincide with the static solution at the kink.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMarketError, InvalidParametersError
from .market import CapacitySpec, DemandModel
from .type1 import Case, EquilibriumResult, _require_duopoly, duopoly_ne, type1_result


@dataclass(frozen=True)
class StackelbergResult:
    leader: int
    prices: np.ndarray
    demands: np.ndarray
    payoffs: np.ndarray
    case_label: Case
    coincides_with_static: bool
    follower_binding: bool

    @property
    def follower(self) -> int:
        return 1 - self.leader

    def as_record(self) -> dict:
        return {
            "leader": self.leader,
            "case": self.case_label.value,
            "prices": [float(x) for x in self.prices],
            "demands": [float(x) for x in self.demands],
            "payoffs": [float(x) for x in self.payoffs],
            "coincides_with_static": self.coincides_with_static,
        }


def follower_response(model: DemandModel, caps: CapacitySpec, leader: int, x: float) -> tuple[float, bool]:
    """Follower price against leader price ``x`` and whether it is capacity-bound."""
    f = 1 - leader
    a, b, c, q = model.a[f], model.b[f], model.cross, caps.q_avail[f]
    if 0.5 * (a + c * x) > q:
        return (a - q + c * x) / b, True
    return (a + c * x) / (2 * b), False


def _regime_line(model: DemandModel, caps: CapacitySpec, leader: int, follower_bound: bool):
    """Leader demand ``A - B x`` once the follower's response is substituted."""
    f = 1 - leader
    a_l, b_l, a_f, b_f, c = model.a[leader], model.b[leader], model.a[f], model.b[f], model.cross
    if follower_bound:
        q_f = caps.q_avail[f]
        return a_l + c * (a_f - q_f) / b_f, b_l - c * c / b_f
    return a_l + c * a_f / (2 * b_f), b_l - c * c / (2 * b_f)


def _unimodal_argmax(intercept: float, slope: float, cap: float) -> float:
    """Maximizer of ``x * min(intercept - slope x, cap)`` over ``x >= 0``."""
    x = intercept / (2 * slope)
    if intercept - slope * x > cap:
        # demand still above capacity at the interior optimum: sell exactly cap
        x = (intercept - cap) / slope
    return x


def _leader_revenue(model, caps, leader, x):
    pf, _ = follower_response(model, caps, leader, x)
    p = np.empty(2)
    p[leader], p[1 - leader] = x, pf
    q = model.a[leader] - model.b[leader] * x + model.cross * pf
    return x * min(q, caps.q_avail[leader]), p


def stackelberg_ne(model: DemandModel, caps: CapacitySpec, leader: int) -> StackelbergResult:
    """Subgame-perfect prices when player ``leader`` (0-based) moves first."""
    _require_duopoly(model, caps)
    if leader not in (0, 1):
        raise InvalidParametersError("leader must be 0 or 1")
    b1, b2 = model.b
    c = model.cross
    if b1 * b2 - c * c <= 0:
        raise DegenerateMarketError("duopoly slopes violate b1 b2 > c^2")
    f = 1 - leader
    q_f, q_l = caps.q_avail[f], caps.q_avail[leader]
    switch = (2 * q_f - model.a[f]) / c if c > 0 else (-math.inf if model.a[f] > 2 * q_f else math.inf)

    best = None
    for bound in (False, True):
        lo, hi = (0.0, switch) if not bound else (max(switch, 0.0), math.inf)
        if hi < 0 or (bound and not math.isfinite(q_f)):
            continue
        intercept, slope = _regime_line(model, caps, leader, bound)
        x = min(max(_unimodal_argmax(intercept, slope, q_l), lo), hi)
        revenue, p = _leader_revenue(model, caps, leader, x)
        # ties go to the free regime, which is visited first
        if best is None or revenue > best[0]:
            best = (revenue, p)
    if best is None:
        raise DegenerateMarketError("follower response undefined for every leader price")
    p = best[1]
    eq = type1_result(model, caps, p)
    static = duopoly_ne(model, caps)
    return StackelbergResult(
        leader=leader,
        prices=eq.prices,
        demands=eq.demands,
        payoffs=eq.payoffs,
        case_label=Case.from_binding(_served_at_capacity(eq, caps)),
        coincides_with_static=bool(np.allclose(p, static.prices, rtol=0, atol=1e-9)),
        follower_binding=follower_response(model, caps, leader, p[leader])[1],
    )


def _served_at_capacity(eq: EquilibriumResult, caps: CapacitySpec) -> np.ndarray:
    return eq.demands >= caps.q_avail - 1e-9


@dataclass(frozen=True)
class GapReport:
    """Static equilibrium next to both leader orderings.

    ``price_gap`` and ``payoff_gap`` are (leader=1) minus (leader=0) values,
    so positive payoff gaps mean both players prefer the second player leading.
    """

    static: EquilibriumResult
    leader_first: StackelbergResult
    leader_second: StackelbergResult
    price_gap: np.ndarray
    payoff_gap: np.ndarray

    @property
    def second_leader_better(self) -> bool:
        return bool(np.all(self.payoff_gap > 0))

    @property
    def leader_gain(self) -> np.ndarray:
        """Each player's payoff when it leads minus its static payoff."""
        return np.array([self.leader_first.payoffs[0], self.leader_second.payoffs[1]]) - self.static.payoffs


def leadership_gap(model: DemandModel, caps: CapacitySpec) -> GapReport:
    static = duopoly_ne(model, caps)
    first = stackelberg_ne(model, caps, 0)
    second = stackelberg_ne(model, caps, 1)
    return GapReport(static, first, second, second.prices - first.prices, second.payoffs - first.payoffs)


def leadership_crossover(model: DemandModel, other_cap: float, lo: float, hi: float,
                         player: int = 0, tol: float = 1e-9) -> float:
    """Capacity of ``player`` where leadership by the other player stops paying off.

    Bisects the sign of the smaller payoff gain from switching the leader to the
    other player; ``lo`` must favor the other player leading and ``hi`` not.
    """
    def favors_other(cap: float) -> bool:
        q = [other_cap, other_cap]
        q[player] = cap
        gap = leadership_gap(model, CapacitySpec(q)).payoff_gap
        if player == 1:
            gap = -gap
        return bool(np.min(gap) > 0)

    if not favors_other(lo) or favors_other(hi):
        raise InvalidParametersError("bracket does not straddle the leadership crossover")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if favors_other(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
