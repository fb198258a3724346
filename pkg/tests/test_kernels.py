import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectrum_market import kernels

BACKENDS = kernels.backends()
needs_cython = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")

REFERENCE = dict(a=np.array([30.0, 30.0]), b=np.array([2.0, 4.0]), c=1.5)


def _inputs(rng):
    a = rng.uniform(10, 40, 2)
    b = rng.uniform(1, 5, 2)
    c = float(rng.uniform(0.1, 0.9) * np.sqrt(b[0] * b[1]))
    q = rng.uniform(5, 60, 2)
    q[rng.random(2) < 0.3] = np.inf
    gamma = rng.uniform(0.005, 0.2, 2)
    p0 = rng.uniform(0, 20, 2)
    return a, b, c, q, gamma, p0


@needs_cython
@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.01]))
def test_orbit_backends_bit_identical(seed, eps):
    rng = np.random.default_rng(seed)
    a, b, c, q, gamma, p0 = _inputs(rng)
    u = rng.random(2 * 300)
    py = BACKENDS["python"].br_orbit(a, b, c, q, gamma, p0, 300, u, eps)
    cy = BACKENDS["cython"].br_orbit(a, b, c, q, gamma, p0, 300, u, eps)
    np.testing.assert_array_equal(py[0], cy[0])
    np.testing.assert_array_equal(py[1], cy[1])
    assert py[2] == cy[2]


@needs_cython
@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 50))
def test_lyapunov_backends_bit_identical(seed, n_record):
    rng = np.random.default_rng(seed)
    a, b, c, q, gamma, p0 = _inputs(rng)
    u = rng.random(2 * 700)
    py = BACKENDS["python"].br_lyapunov(a, b, c, q, gamma, p0, 200, 500, u, 0.01, n_record)
    cy = BACKENDS["cython"].br_lyapunov(a, b, c, q, gamma, p0, 200, 500, u, 0.01, n_record)
    assert py[2:] == cy[2:]
    np.testing.assert_array_equal(py[1], cy[1])
    if np.isnan(py[0]):
        assert np.isnan(cy[0])
    else:
        assert py[0] == cy[0]


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_orbit_stops_at_overflow(name):
    impl = BACKENDS[name]
    traj, _, done = impl.br_orbit(REFERENCE["a"], REFERENCE["b"], REFERENCE["c"], np.array([100.0, 100.0]),
                                  np.array([1.0, 1.0]), np.array([5.0, 1e12]), 10, np.zeros(20), 0.01)
    assert done == 0
    assert np.all(np.isnan(traj[1:]))


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_reset_uses_pre_drawn_uniforms(name):
    impl = BACKENDS[name]
    u = np.array([0.25, 0.5])
    traj, _, _ = impl.br_orbit(REFERENCE["a"], REFERENCE["b"], REFERENCE["c"], np.array([100.0, 100.0]),
                               np.array([0.01, 0.01]), np.array([0.0, 0.0]), 1, u, 0.01)
    np.testing.assert_array_equal(traj[1], [0.0025, 0.005])


def test_pure_fallback_selected_by_environment():
    env = dict(os.environ, SPECTRUM_MARKET_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from spectrum_market import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_default_backend_prefers_extension():
    expected = "cython" if "cython" in BACKENDS and not os.environ.get("SPECTRUM_MARKET_PURE") else "python"
    assert kernels.BACKEND == expected
