import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from markets import caps_for_case, duopoly_models, reference_model
from spectrum_market.dynamics import (
    Branch,
    LearningRates,
    best_response_transfer,
    br_fixed_points,
    br_jacobian,
    eigenvalues_2x2,
    spectral_radius,
    stability_analysis,
    strict_best_run,
    strict_best_step,
    strict_br_run,
    strict_br_step,
)
from spectrum_market.errors import BoundaryPointError, InvalidParametersError, NonFiniteError
from spectrum_market.market import CapacitySpec
from spectrum_market.type1 import duopoly_ne, oligopoly_ne_search

INF = np.inf
AMPLE = CapacitySpec([100, 100])
FIRST_LIMITED = CapacitySpec([10, 100])
SLOW = LearningRates([0.01, 0.01])


def test_strict_best_step_examples():
    model = reference_model()
    np.testing.assert_allclose(strict_best_step(model, AMPLE, [5, 5]), [9.375, 4.6875])
    new, tags = strict_best_step(model, FIRST_LIMITED, [5, 5], with_branch=True)
    assert new[0] == pytest.approx(13.75)
    assert tags.tolist() == [Branch.CAPACITY, Branch.BEST_RESPONSE]


def test_equilibrium_is_strict_best_fixed_point():
    model = reference_model()
    for caps in (AMPLE, FIRST_LIMITED, CapacitySpec([10, 15])):
        ne = duopoly_ne(model, caps)
        np.testing.assert_allclose(strict_best_step(model, caps, ne.prices), ne.prices, rtol=1e-12)


@pytest.mark.parametrize("caps", [AMPLE, FIRST_LIMITED])
def test_strict_best_converges_to_equilibrium(caps):
    model = reference_model()
    rec = strict_best_run(model, caps, [5, 5], tol=1e-6, max_iter=200)
    assert rec.converged and rec.iterations <= 200
    np.testing.assert_allclose(rec.limit, duopoly_ne(model, caps).prices, atol=1e-5)
    assert rec.ne_gap < 1e-5


def test_strict_best_first_limited_limit():
    rec = strict_best_run(reference_model(), FIRST_LIMITED, [5, 5])
    np.testing.assert_allclose(rec.limit, [14.909, 6.545], atol=1e-3)


def test_strict_best_from_equilibrium_stops_at_once():
    model = reference_model()
    ne = duopoly_ne(model, AMPLE)
    rec = strict_best_run(model, AMPLE, ne.prices)
    assert rec.converged and rec.iterations <= 1


def test_strict_best_reports_non_convergence():
    rec = strict_best_run(reference_model(), AMPLE, [5, 5], max_iter=3)
    assert not rec.converged and rec.limit is None and rec.iterations == 3


def test_strict_br_step_examples():
    model = reference_model()
    np.testing.assert_allclose(strict_br_step(model, AMPLE, SLOW, [5, 5]), [5.875, 4.875])
    assert strict_br_step(model, FIRST_LIMITED, SLOW, [5, 5])[0] == pytest.approx(13.75)
    ne = duopoly_ne(model, AMPLE).prices
    np.testing.assert_allclose(strict_br_step(model, AMPLE, SLOW, ne), ne, rtol=1e-12)


def test_zero_price_escapes_with_small_random_price():
    model = reference_model()
    rng = np.random.default_rng(0)
    new = strict_br_step(model, AMPLE, SLOW, [0.0, 5.0], rng=rng)
    assert 0 < new[0] <= 0.01
    stuck = strict_br_step(model, AMPLE, SLOW, [0.0, 5.0], eps=0.0)
    assert stuck[0] == 0.0


def test_overflow_is_reported():
    model = reference_model()
    # collapsing prices are restarted, so only an already huge opponent price overflows
    with pytest.raises(NonFiniteError):
        strict_br_step(model, AMPLE, LearningRates([1.0, 1.0]), [5.0, 1e12])
    rec = strict_br_run(model, AMPLE, LearningRates([1.0, 1.0]), [5.0, 1e12], 200)
    assert rec.diverged and rec.iterations == 0
    assert np.all(np.isfinite(rec.trajectory))


def test_doubly_bound_market_uses_best_response():
    rec = strict_br_run(reference_model(), CapacitySpec([10, 15]), SLOW, [5, 5], 100)
    assert rec.extras["routed_to"] == "strict_best"
    np.testing.assert_allclose(rec.limit, duopoly_ne(reference_model(), CapacitySpec([10, 15])).prices, atol=1e-5)


def test_strict_br_run_is_deterministic_and_dumps_csv():
    model = reference_model()
    a = strict_br_run(model, AMPLE, LearningRates([0.07, 0.02]), [5, 5], 300, seed=4)
    b = strict_br_run(model, AMPLE, LearningRates([0.07, 0.02]), [5, 5], 300, seed=4)
    np.testing.assert_array_equal(a.trajectory, b.trajectory)
    buf = io.StringIO()
    a.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,p1,p2,branch1,branch2"
    assert lines[1].endswith("initial,initial")
    assert len(lines) == 302


def test_learning_rates_positive():
    with pytest.raises(InvalidParametersError):
        LearningRates([0.01, 0.0])


def test_fixed_points_without_limits():
    pts = dict(br_fixed_points(reference_model(), AMPLE, SLOW, with_labels=True))
    assert set(pts) == {"origin", "first_alone", "second_alone", "interior"}
    np.testing.assert_allclose(pts["first_alone"], [7.5, 0])
    np.testing.assert_allclose(pts["interior"], [9.58, 5.55], atol=0.01)


def test_fixed_points_first_player_bound():
    pts = dict(br_fixed_points(reference_model(), CapacitySpec([10, INF]), SLOW, with_labels=True))
    np.testing.assert_allclose(pts["interior"], [14.909, 6.545], atol=1e-3)
    np.testing.assert_allclose(pts["first_bound"], [10.0, 0.0])


def test_jacobian_examples():
    model = reference_model()
    np.testing.assert_allclose(br_jacobian(model, AMPLE, SLOW, [0, 0]), np.diag([1.3, 1.3]))
    ne = duopoly_ne(model, AMPLE).prices
    jac = br_jacobian(model, AMPLE, SLOW, ne)
    assert jac[0, 0] == pytest.approx(1 - 2 * 0.01 * 2 * ne[0])
    assert jac[0, 0] == pytest.approx(0.6168, abs=1e-3)
    assert jac[0, 1] == pytest.approx(0.01 * 1.5 * ne[0])
    assert jac[1, 0] == pytest.approx(0.01 * 1.5 * ne[1])


def test_jacobian_binding_row():
    model = reference_model()
    jac = br_jacobian(model, FIRST_LIMITED, SLOW, duopoly_ne(model, FIRST_LIMITED).prices)
    np.testing.assert_allclose(jac[0], [0.0, 1.5 / 2.0])


def test_jacobian_undefined_on_branch_switch():
    model = reference_model()
    # choose p1 with cap == grad for player 1 at p2 = 5
    a, b, c, q, g = 30.0, 2.0, 1.5, 20.0, 0.01
    p2 = 5.0
    roots = np.roots([-2 * g * b, 1 + g * (a + c * p2), -(a - q + c * p2) / b])
    p1 = float(roots[np.isreal(roots)].real.min())
    with pytest.raises(BoundaryPointError):
        br_jacobian(model, CapacitySpec([q, 100]), LearningRates([g, g]), [p1, p2])


def test_stability_of_fixed_points():
    rep = stability_analysis(reference_model(), AMPLE, SLOW)
    stable = dict(zip(rep.labels, rep.stable))
    assert stable == {"origin": False, "first_alone": False, "second_alone": False, "interior": True}
    assert len(rep.as_record()["fixed_points"]) == 4


def test_eigenvalues_match_numpy():
    rng = np.random.default_rng(2)
    for _ in range(200):
        m = rng.normal(size=(2, 2))
        ours = np.sort_complex(eigenvalues_2x2(m))
        ref = np.sort_complex(np.linalg.eigvals(m).astype(complex))
        np.testing.assert_allclose(ours, ref, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(duopoly_models())
def test_best_response_transfer_is_contractive(model):
    b1, b2 = model.b
    if b1 * b2 <= model.cross ** 2:
        return
    for binding in ([False, False], [True, False], [False, True]):
        assert spectral_radius(best_response_transfer(model, binding)) < 1


@settings(max_examples=100, deadline=None)
@given(duopoly_models(), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_strict_best_limit_matches_search(model, case, seed):
    caps = caps_for_case(np.random.default_rng(seed), model, case)
    rec = strict_best_run(model, caps, [1.0, 1.0], tol=1e-9, max_iter=5000)
    if rec.converged:
        ne, _ = oligopoly_ne_search(model, caps)
        assert np.max(np.abs(rec.limit - ne.prices)) <= 1e-8 * max(1.0, np.abs(ne.prices).max())


@settings(max_examples=60, deadline=None)
@given(duopoly_models(), st.integers(1, 3), st.floats(0.001, 0.05), st.floats(0.001, 0.05), st.integers(0, 2**32 - 1))
def test_fixed_points_are_reproduced_by_the_map(model, case, g1, g2, seed):
    caps = caps_for_case(np.random.default_rng(seed), model, case)
    rates = LearningRates([g1, g2])
    for pt in br_fixed_points(model, caps, rates):
        np.testing.assert_allclose(strict_br_step(model, caps, rates, pt, eps=0.0), pt, rtol=1e-10, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(duopoly_models(), st.floats(0.001, 0.05), st.floats(0.001, 0.05), st.integers(0, 2**32 - 1))
def test_jacobian_matches_central_differences(model, g1, g2, seed):
    rng = np.random.default_rng(seed)
    caps = CapacitySpec(rng.uniform(5, 40, 2))
    rates = LearningRates([g1, g2])
    p = rng.uniform(0.5, 15, 2)
    try:
        jac = br_jacobian(model, caps, rates, p)
    except BoundaryPointError:
        return
    h = 1e-6
    numeric = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        numeric[:, j] = (strict_br_step(model, caps, rates, p + e, eps=0.0)
                         - strict_br_step(model, caps, rates, p - e, eps=0.0)) / (2 * h)
    # skip points within a step of a branch switch
    if not np.allclose(strict_br_step(model, caps, rates, p + 10 * h, eps=0.0)
                       - strict_br_step(model, caps, rates, p, eps=0.0), jac @ np.full(2, 10 * h), atol=1e-8):
        return
    np.testing.assert_allclose(numeric, jac, rtol=1e-5, atol=1e-5)


@pytest.mark.parametrize("caps", [AMPLE, FIRST_LIMITED])
def test_stable_interior_point_attracts_nearby_orbits(caps):
    model = reference_model()
    rep = stability_analysis(model, caps, SLOW)
    (pt,) = [p for lab, p in zip(rep.labels, rep.fixed_points) if lab == "interior"]
    assert rep.stable[rep.labels.index("interior")]
    rng = np.random.default_rng(9)
    for _ in range(5):
        p0 = pt * (1 + rng.uniform(-0.01, 0.01, 2))
        rec = strict_br_run(model, caps, SLOW, p0, 3000)
        np.testing.assert_allclose(rec.trajectory[-1], pt, atol=1e-8)
