"""Nonlinear diagnostics of the StrictBR map: bifurcation sweeps, Lyapunov exponents, attractors."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from . import kernels
from .dynamics import DEFAULT_ESCAPE, LearningRates, _coeffs, _is_case4
from .errors import DivergedError, InvalidParametersError
from .market import CapacitySpec, DemandModel

DEFAULT_TRANSIENT = 1000
DEFAULT_SAMPLES = 200
DEFAULT_LYAPUNOV_STEPS = 50_000
PERIOD_TOL = 1e-6
MAX_PERIOD = 64
DOUBLING_SPREAD = 1e-4


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    lo: float
    hi: float
    steps: int
    transient: int = DEFAULT_TRANSIENT
    samples: int = DEFAULT_SAMPLES
    p0: tuple = (5.0, 5.0)

    def __post_init__(self):
        if self.parameter not in ("gamma1", "gamma2"):
            raise InvalidParametersError("sweep parameter must be gamma1 or gamma2")
        if not self.lo < self.hi:
            raise InvalidParametersError("sweep range needs lo < hi")
        if self.steps < 2:
            raise InvalidParametersError("a sweep needs at least two steps")
        if self.transient < 0 or self.samples < 1:
            raise InvalidParametersError("transient must be >= 0 and samples >= 1")

    @property
    def index(self) -> int:
        return 0 if self.parameter == "gamma1" else 1

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)


@dataclass
class DynamicsReport:
    parameter: str
    values: np.ndarray
    bifurcation_points: list = field(default_factory=list)
    lyapunov: np.ndarray | None = None
    diverged: np.ndarray | None = None
    periods: list = field(default_factory=list)
    attractor: np.ndarray | None = None

    def spreads(self, player: int = 0) -> np.ndarray:
        return np.array([np.ptp(s[:, player]) if s.size and np.all(np.isfinite(s)) else np.inf
                         for s in self.bifurcation_points])

    def first_doubling(self, threshold: float = DOUBLING_SPREAD, player: int = 0) -> float | None:
        """First parameter value whose post-transient samples spread beyond ``threshold``."""
        hits = np.flatnonzero(self.spreads(player) > threshold)
        return float(self.values[hits[0]]) if hits.size else None

    def first_positive_lyapunov(self, threshold: float = 0.0) -> float | None:
        if self.lyapunov is None:
            return None
        hits = np.flatnonzero(self.lyapunov > threshold)
        return float(self.values[hits[0]]) if hits.size else None


def point_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for sweep point ``index``; independent of evaluation order."""
    return np.random.default_rng([int(seed), int(index)])


def _check_dynamic_market(model: DemandModel, caps: CapacitySpec) -> None:
    if model.n != 2:
        raise InvalidParametersError("StrictBR dynamics are defined for two players")
    if _is_case4(model, caps):
        raise InvalidParametersError("both players capacity-bound: StrictBR reduces to best response")


def _orbit_stats(model, caps, gamma, p0, transient, n_iter, n_record, rng, eps):
    a, b, c, q = _coeffs(model, caps)
    u = rng.random(2 * (transient + n_iter))
    return kernels.br_lyapunov(a, b, c, q, np.asarray(gamma, dtype=float), np.asarray(p0, dtype=float),
                               transient, n_iter, u, float(eps), n_record)


def lyapunov_max(model: DemandModel, caps: CapacitySpec, rates: LearningRates, p0=(5.0, 5.0),
                 n_iter: int = DEFAULT_LYAPUNOV_STEPS, transient: int = DEFAULT_TRANSIENT, seed: int = 0,
                 eps: float = DEFAULT_ESCAPE) -> float:
    """Maximal Lyapunov exponent by tangent-vector growth along one orbit."""
    _check_dynamic_market(model, caps)
    lam, _, done, diverged = _orbit_stats(model, caps, rates.gamma, p0, transient, n_iter, 0,
                                          point_rng(seed, 0), eps)
    if diverged:
        raise DivergedError(f"orbit overflowed after {done} steps")
    return float(lam)


def bifurcation_sweep(model: DemandModel, caps: CapacitySpec, spec: SweepSpec, fixed_rates,
                      seed: int = 0, eps: float = DEFAULT_ESCAPE, lyapunov_steps: int | None = None) -> DynamicsReport:
    """Sweep one learning rate and record post-transient orbit samples.

    Each point runs ``transient + max(samples, lyapunov_steps)`` steps and keeps
    the last ``samples`` prices.  With ``lyapunov_steps`` the same orbit also
    yields the maximal Lyapunov exponent.  Divergence is recorded, not raised.
    """
    _check_dynamic_market(model, caps)
    values = spec.values()
    n_iter = max(spec.samples, lyapunov_steps or 0)
    report = DynamicsReport(spec.parameter, values, lyapunov=np.full(values.size, np.nan),
                            diverged=np.zeros(values.size, dtype=bool))
    base = np.array(getattr(fixed_rates, "gamma", fixed_rates), dtype=float)
    for k, value in enumerate(values):
        gamma = base.copy()
        gamma[spec.index] = value
        lam, record, _, diverged = _orbit_stats(model, caps, gamma, spec.p0, spec.transient, n_iter,
                                                spec.samples, point_rng(seed, k), eps)
        report.diverged[k] = diverged
        report.bifurcation_points.append(record[np.all(np.isfinite(record), axis=1)])
        if lyapunov_steps and not diverged:
            report.lyapunov[k] = lam
        report.periods.append(detect_period(record[:, 0]) if not diverged else None)
    if not lyapunov_steps:
        report.lyapunov = None
    return report


def lyapunov_sweep(model: DemandModel, caps: CapacitySpec, spec: SweepSpec, fixed_rates, seed: int = 0,
                   n_iter: int = DEFAULT_LYAPUNOV_STEPS, eps: float = DEFAULT_ESCAPE) -> DynamicsReport:
    return bifurcation_sweep(model, caps, spec, fixed_rates, seed=seed, eps=eps, lyapunov_steps=n_iter)


def attractor_capture(model: DemandModel, caps: CapacitySpec, rates: LearningRates, p0=(5.0, 5.0),
                      n_points: int = 10_000, transient: int = DEFAULT_TRANSIENT, seed: int = 0,
                      eps: float = DEFAULT_ESCAPE) -> np.ndarray:
    """Post-transient ``(p1, p2)`` cloud of ``n_points`` consecutive orbit points."""
    _check_dynamic_market(model, caps)
    _, record, done, diverged = _orbit_stats(model, caps, rates.gamma, p0, transient, n_points, n_points,
                                             point_rng(seed, 0), eps)
    if diverged:
        raise DivergedError(f"orbit overflowed after {done} steps")
    return record


def detect_period(samples: Sequence[float], tol: float = PERIOD_TOL, max_period: int = MAX_PERIOD) -> int | None:
    """Number of clusters of the sampled values, or None when aperiodic.

    Sorted values are split wherever neighbours differ by more than ``tol``;
    each cluster must stay within ``tol`` and at most ``max_period`` may form.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0 or not np.all(np.isfinite(x)):
        return None
    cuts = np.flatnonzero(np.diff(x) > tol) + 1
    clusters = np.split(x, cuts)
    if len(clusters) > max_period:
        return None
    if any(np.ptp(cl) >= tol for cl in clusters):
        return None
    return len(clusters)


def cluster_spread(samples: Sequence[float], tol: float = PERIOD_TOL) -> float:
    """Largest within-cluster spread after splitting sorted samples at gaps above ``tol``."""
    x = np.sort(np.asarray(samples, dtype=float))
    cuts = np.flatnonzero(np.diff(x) > tol) + 1
    return float(max(np.ptp(cl) for cl in np.split(x, cuts)))


def write_bifurcation_csv(report: DynamicsReport, fh: IO[str], both: bool = True) -> None:
    fh.write("param,value_index,p1_sample,p2_sample\n" if both else "param,value_index,p1_sample\n")
    for value, pts in zip(report.values, report.bifurcation_points):
        for k, row in enumerate(pts):
            if both:
                fh.write(f"{float(value)!r},{k},{float(row[0])!r},{float(row[1])!r}\n")
            else:
                fh.write(f"{float(value)!r},{k},{float(row[0])!r}\n")


def write_lyapunov_csv(report: DynamicsReport, fh: IO[str]) -> None:
    fh.write("param,lambda_max,diverged\n")
    for value, lam, div in zip(report.values, report.lyapunov, report.diverged):
        fh.write(f"{float(value)!r},{float(lam)!r},{int(bool(div))}\n")


def write_attractor_csv(points: np.ndarray, fh: IO[str]) -> None:
    fh.write("p1,p2\n")
    for row in points:
        fh.write(f"{float(row[0])!r},{float(row[1])!r}\n")
