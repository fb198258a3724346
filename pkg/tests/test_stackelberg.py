import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from markets import caps_for_case, duopoly_models, reference_model
from spectrum_market.errors import InvalidParametersError
from spectrum_market.market import CapacitySpec
from spectrum_market.stackelberg import leadership_crossover, leadership_gap, stackelberg_ne
from spectrum_market.type1 import Case, duopoly_ne

INF = np.inf


def _follower_price(model, caps, leader, x):
    f = 1 - leader
    a, b, c, q = model.a[f], model.b[f], model.cross, caps.q_avail[f]
    return max((a + c * x) / (2 * b), (a - q + c * x) / b)


def _leader_revenue(model, caps, leader, x):
    y = _follower_price(model, caps, leader, x)
    q = model.a[leader] - model.b[leader] * x + model.cross * y
    return x * min(q, caps.q_avail[leader])


def brute_force_leader(model, caps, leader):
    """Dense grid then bounded refinement of the leader's revenue."""
    hi = 4 * max(model.a) / min(model.b)
    grid = np.linspace(0, hi, 20001)
    rev = np.array([_leader_revenue(model, caps, leader, x) for x in grid])
    k = int(np.argmax(rev))
    lo, up = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    opt = minimize_scalar(lambda x: -_leader_revenue(model, caps, leader, x), bounds=(lo, up),
                          method="bounded", options={"xatol": 1e-12})
    x = opt.x if -opt.fun >= rev[k] else grid[k]
    return x, _leader_revenue(model, caps, leader, x)


def test_first_player_leads_without_limits():
    res = stackelberg_ne(reference_model(), CapacitySpec([INF, INF]), 0)
    np.testing.assert_allclose(res.prices, [10.36, 5.69], atol=0.01)
    np.testing.assert_allclose(res.demands, [17.81, 22.77], atol=0.01)
    assert res.case_label is Case.CASE1


def test_second_player_leads_without_limits():
    res = stackelberg_ne(reference_model(), CapacitySpec([INF, INF]), 1)
    np.testing.assert_allclose(res.prices, [9.75, 6.00], atol=0.01)
    np.testing.assert_allclose(res.demands, [19.50, 20.63], atol=0.01)


def test_bound_leader_reproduces_static_equilibrium():
    model = reference_model()
    caps = CapacitySpec([10, INF])
    res = stackelberg_ne(model, caps, 0)
    static = duopoly_ne(model, caps)
    assert res.coincides_with_static
    np.testing.assert_allclose(res.prices, static.prices, atol=1e-9)


def test_both_bound_is_leader_invariant():
    model = reference_model()
    caps = CapacitySpec([10, 15])
    gap = leadership_gap(model, caps)
    np.testing.assert_allclose(gap.payoff_gap, 0, atol=1e-9)
    np.testing.assert_allclose(gap.leader_first.prices, gap.static.prices, atol=1e-9)


def test_leading_pays_for_both_players_when_unconstrained():
    gap = leadership_gap(reference_model(), CapacitySpec([INF, INF]))
    for res in (gap.leader_first, gap.leader_second):
        assert np.all(res.payoffs > gap.static.payoffs)


def test_second_player_should_lead_below_crossover():
    model = reference_model()
    assert leadership_gap(model, CapacitySpec([12, INF])).second_leader_better
    cross = leadership_crossover(model, INF, 4.0, 24.0)
    assert 17.0 <= cross <= 19.0


def test_crossover_bracket_checked():
    with pytest.raises(InvalidParametersError):
        leadership_crossover(reference_model(), INF, 20.0, 24.0)


def test_leader_index_validated():
    with pytest.raises(InvalidParametersError):
        stackelberg_ne(reference_model(), CapacitySpec([INF, INF]), 2)


@pytest.mark.parametrize("caps", [[INF, INF], [10, INF], [INF, 12], [10, 15], [15, 26]])
@pytest.mark.parametrize("leader", [0, 1])
def test_matches_brute_force_backward_induction(caps, leader):
    model = reference_model()
    spec = CapacitySpec(caps)
    res = stackelberg_ne(model, spec, leader)
    x, rev = brute_force_leader(model, spec, leader)
    # the oracle refines a kink maximum only to about 1e-8
    assert res.payoffs[leader] == pytest.approx(rev, rel=1e-7)
    assert res.payoffs[leader] >= rev - 1e-9
    assert res.prices[leader] == pytest.approx(x, abs=1e-4)


@settings(max_examples=100, deadline=None)
@given(duopoly_models(), st.integers(1, 4), st.integers(0, 1), st.integers(0, 2**32 - 1))
def test_follower_plays_best_response_and_leader_weakly_gains(model, case, leader, seed):
    caps = caps_for_case(np.random.default_rng(seed), model, case)
    res = stackelberg_ne(model, caps, leader)
    follower = 1 - leader
    assert res.prices[follower] == pytest.approx(_follower_price(model, caps, leader, res.prices[leader]),
                                                 rel=1e-10, abs=1e-10)
    static = duopoly_ne(model, caps)
    assert res.payoffs[leader] >= static.payoffs[leader] - 1e-9
    _, rev = brute_force_leader(model, caps, leader)
    assert res.payoffs[leader] >= rev - 1e-7 * max(1.0, rev)


@settings(max_examples=100, deadline=None)
@given(duopoly_models(), st.integers(0, 1))
def test_unconstrained_leader_prices_above_simultaneous(model, leader):
    caps = CapacitySpec([INF, INF])
    res = stackelberg_ne(model, caps, leader)
    assert res.prices[leader] > duopoly_ne(model, caps).prices[leader]


@settings(max_examples=60, deadline=None)
@given(duopoly_models(), st.integers(0, 2**32 - 1))
def test_doubly_bound_markets_ignore_leadership(model, seed):
    caps = caps_for_case(np.random.default_rng(seed), model, 4)
    static = duopoly_ne(model, caps)
    if static.case_label is not Case.CASE4:
        return
    a = stackelberg_ne(model, caps, 0)
    b = stackelberg_ne(model, caps, 1)
    np.testing.assert_allclose(a.prices, b.prices, atol=1e-9)
