"""Price-adjustment dynamics of the type-I duopoly.

StrictBEST: every slot each player jumps to its capacity-aware best response

    p_i' = max{(c p_j + a_i) / (2 b_i), (a_i - q_i^a + c p_j) / b_i}.

StrictBR: boundedly rational players follow their marginal profit instead

    p_i' = max{(a_i - q_i^a + c p_j) / b_i, p_i + gamma_i p_i (a_i - 2 b_i p_i + c p_j)},

with a small random restart whenever a price collapses to zero.  Updates are
simultaneous: both players react to the slot-t prices.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from . import kernels
from .errors import BoundaryPointError, InvalidParametersError, NonFiniteError
from .market import CapacitySpec, DemandModel
from .type1 import Case, _require_duopoly, duopoly_ne, oligopoly_ne_search

log = logging.getLogger(__name__)

DEFAULT_ESCAPE = 0.01
BRANCH_TIE_TOL = 1e-9


class Branch(enum.IntEnum):
    BEST_RESPONSE = 0
    CAPACITY = kernels.CAPACITY
    GRADIENT = kernels.GRADIENT

    @property
    def tag(self) -> str:
        return {0: "best_response", 1: "capacity", 2: "gradient"}[int(self)]


@dataclass(frozen=True)
class LearningRates:
    gamma: np.ndarray

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float).reshape(-1)
        if g.size == 0 or np.any(~np.isfinite(g)) or np.any(g <= 0):
            raise InvalidParametersError("learning rates must be positive and finite")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)


@dataclass
class OrbitRecord:
    """Trajectory with the branch each player used to produce every slot."""

    trajectory: np.ndarray
    rule_taken: np.ndarray
    converged: bool = False
    limit: np.ndarray | None = None
    iterations: int = 0
    diverged: bool = False
    ne_gap: float | None = None
    extras: dict = field(default_factory=dict)

    def write_csv(self, fh: IO[str]) -> None:
        fh.write("t,p1,p2,branch1,branch2\n")
        for t, row in enumerate(self.trajectory):
            if t == 0:
                tags = ("initial", "initial")
            else:
                tags = tuple(Branch(int(x)).tag for x in self.rule_taken[t - 1])
            fh.write(f"{t},{float(row[0])!r},{float(row[1])!r},{tags[0]},{tags[1]}\n")


# -- StrictBEST -------------------------------------------------------------

def strict_best_step(model: DemandModel, caps: CapacitySpec, p, with_branch: bool = False):
    p = np.asarray(p, dtype=float)
    _require_duopoly(model, caps)
    cp = model.c @ p
    free = (cp + model.a) / (2 * model.b)
    bound = (model.a - caps.q_avail + cp) / model.b
    new = np.maximum(free, bound)
    if with_branch:
        tags = np.where(bound > free, Branch.CAPACITY, Branch.BEST_RESPONSE).astype(np.int8)
        return new, tags
    return new


def strict_best_run(model: DemandModel, caps: CapacitySpec, p0, tol: float = 1e-6,
                    max_iter: int = 1000, validate: bool = True) -> OrbitRecord:
    """Iterate StrictBEST until successive prices differ by less than ``tol``."""
    p = np.asarray(p0, dtype=float)
    traj = [p]
    tags = []
    converged = False
    for _ in range(max_iter):
        new, tag = strict_best_step(model, caps, p, with_branch=True)
        traj.append(new)
        tags.append(tag)
        step = float(np.max(np.abs(new - p)))
        p = new
        if step < tol:
            converged = True
            break
    record = OrbitRecord(np.array(traj), np.array(tags, dtype=np.int8).reshape(-1, 2),
                         converged, p if converged else None, len(tags))
    if converged and validate:
        ne, _ = oligopoly_ne_search(model, caps)
        record.ne_gap = float(np.max(np.abs(p - ne.prices)))
        if record.ne_gap > 10 * tol:
            # convergence to the equilibrium is not guaranteed in general; report, do not fail
            log.warning("StrictBEST limit %s is %.3g away from the search equilibrium", p, record.ne_gap)
    return record


# -- StrictBR ---------------------------------------------------------------

def _is_case4(model: DemandModel, caps: CapacitySpec) -> bool:
    if not np.all(caps.limited):
        return False
    return duopoly_ne(model, caps).case_label is Case.CASE4


def _coeffs(model: DemandModel, caps: CapacitySpec):
    return (np.ascontiguousarray(model.a, dtype=float), np.ascontiguousarray(model.b, dtype=float),
            float(model.cross), np.ascontiguousarray(caps.q_avail, dtype=float))


def strict_br_step(model: DemandModel, caps: CapacitySpec, rates: LearningRates, p,
                   rng: np.random.Generator | None = None, eps: float = DEFAULT_ESCAPE):
    """One simultaneous StrictBR update.

    Two uniforms are consumed per call, so a run of single steps matches the
    batched kernel drawing from the same generator.  Markets where both
    players are capacity-bound use the StrictBEST rule instead.
    """
    _require_duopoly(model, caps)
    p = np.asarray(p, dtype=float)
    if _is_case4(model, caps):
        return strict_best_step(model, caps, p)
    u = rng.random(2) if rng is not None else np.full(2, 0.5)
    a, b, c, q = _coeffs(model, caps)
    traj, _, done = kernels.br_orbit(a, b, c, q, rates.gamma, p, 1, u, float(eps))
    if done < 1:
        raise NonFiniteError(f"StrictBR update from {p} overflowed")
    return traj[1].copy()


def strict_br_run(model: DemandModel, caps: CapacitySpec, rates: LearningRates, p0, n_steps: int,
                  seed=0, eps: float = DEFAULT_ESCAPE, tol: float = 1e-9) -> OrbitRecord:
    """Run StrictBR for ``n_steps`` slots; divergence ends the orbit early."""
    _require_duopoly(model, caps)
    p0 = np.asarray(p0, dtype=float)
    if _is_case4(model, caps):
        rec = strict_best_run(model, caps, p0, tol=tol, max_iter=n_steps)
        rec.extras["routed_to"] = "strict_best"
        return rec
    rng = np.random.default_rng(seed)
    u = rng.random(2 * n_steps)
    a, b, c, q = _coeffs(model, caps)
    traj, branches, done = kernels.br_orbit(a, b, c, q, rates.gamma, p0, n_steps, u, float(eps))
    traj = traj[: done + 1]
    branches = branches[:done]
    diverged = done < n_steps
    converged = (not diverged and done >= 1 and float(np.max(np.abs(traj[-1] - traj[-2]))) < tol)
    return OrbitRecord(traj, branches, converged, traj[-1].copy() if converged else None, done, diverged)


# -- fixed points and stability ----------------------------------------------

def _br_candidates(model: DemandModel, caps: CapacitySpec):
    (a1, a2), (b1, b2) = model.a, model.b
    ne = duopoly_ne(model, caps)
    q1, q2 = caps.q_avail
    label = ne.case_label
    if label is Case.CASE1:
        return label, [("origin", [0.0, 0.0]), ("first_alone", [a1 / (2 * b1), 0.0]),
                       ("second_alone", [0.0, a2 / (2 * b2)]), ("interior", ne.prices)]
    if label is Case.CASE2:
        return label, [("first_bound", [(a1 - q1) / b1, 0.0]), ("interior", ne.prices)]
    if label is Case.CASE3:
        return label, [("second_bound", [0.0, (a2 - q2) / b2]), ("interior", ne.prices)]
    return label, [("interior", ne.prices)]


def br_fixed_points(model: DemandModel, caps: CapacitySpec, rates: LearningRates | None = None,
                    with_labels: bool = False):
    """Fixed points of the StrictBR map.

    Candidates come from closed forms; only those the map reproduces (with the
    zero restart switched off) are returned.
    """
    _require_duopoly(model, caps)
    rates = rates or LearningRates([0.01, 0.01])
    label, cands = _br_candidates(model, caps)
    out = []
    for name, pt in cands:
        pt = np.asarray(pt, dtype=float)
        if label is Case.CASE4:
            image = strict_best_step(model, caps, pt)
        else:
            image = strict_br_step(model, caps, rates, pt, eps=0.0)
        if np.allclose(image, pt, rtol=1e-10, atol=1e-10):
            out.append((name, pt) if with_labels else pt)
    return out


def br_jacobian(model: DemandModel, caps: CapacitySpec, rates: LearningRates, at) -> np.ndarray:
    """Jacobian of the active StrictBR branch at ``at``."""
    _require_duopoly(model, caps)
    p = np.asarray(at, dtype=float)
    a, b, c, q, g = model.a, model.b, model.cross, caps.q_avail, rates.gamma
    jac = np.zeros((2, 2))
    for i in range(2):
        j = 1 - i
        cap = (a[i] - q[i] + c * p[j]) / b[i]
        grad = p[i] + g[i] * p[i] * (a[i] - 2.0 * b[i] * p[i] + c * p[j])
        if abs(cap - grad) <= BRANCH_TIE_TOL:
            raise BoundaryPointError(f"player {i + 1} sits on the branch switch at {p}")
        if cap > grad:
            jac[i, j] = c / b[i]
        else:
            jac[i, i] = 1.0 + g[i] * (a[i] - 4.0 * b[i] * p[i] + c * p[j])
            jac[i, j] = g[i] * c * p[i]
    return jac


def eigenvalues_2x2(jac) -> np.ndarray:
    """Roots of ``lambda^2 - tr lambda + det`` (closed form)."""
    jac = np.asarray(jac, dtype=float)
    tr = jac[0, 0] + jac[1, 1]
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    root = np.sqrt(complex(tr * tr - 4.0 * det))
    return np.array([(tr + root) / 2.0, (tr - root) / 2.0])


@dataclass
class StabilityReport:
    fixed_points: list
    labels: list
    jacobians: list
    eigenvalues: list
    stable: list

    def as_record(self) -> dict:
        return {
            "fixed_points": [
                {"label": lab, "p": [float(x) for x in pt], "stable": bool(st),
                 "eigenvalues": [[float(ev.real), float(ev.imag)] for ev in eig]}
                for lab, pt, eig, st in zip(self.labels, self.fixed_points, self.eigenvalues, self.stable)
            ]
        }


def stability_analysis(model: DemandModel, caps: CapacitySpec, rates: LearningRates) -> StabilityReport:
    labelled = br_fixed_points(model, caps, rates, with_labels=True)
    case4 = _is_case4(model, caps)
    rep = StabilityReport([], [], [], [], [])
    for name, pt in labelled:
        if case4:
            # best-response map near the doubly bound point is linear
            c = model.cross
            jac = np.array([[0.0, c / model.b[0]], [c / model.b[1], 0.0]])
        else:
            jac = br_jacobian(model, caps, rates, pt)
        eig = eigenvalues_2x2(jac)
        rep.fixed_points.append(pt)
        rep.labels.append(name)
        rep.jacobians.append(jac)
        rep.eigenvalues.append(eig)
        rep.stable.append(bool(np.max(np.abs(eig)) < 1 - 1e-12))
    return rep


def best_response_transfer(model: DemandModel, binding: Sequence[bool]) -> np.ndarray:
    """Linear StrictBEST map ``p(t+1) = M p(t) + const`` for fixed branches."""
    c = model.cross
    scale = [1.0 if bound else 0.5 for bound in binding]
    return np.array([[0.0, scale[0] * c / model.b[0]], [scale[1] * c / model.b[1], 0.0]])


def spectral_radius(m) -> float:
    return float(np.max(np.abs(eigenvalues_2x2(m))))

