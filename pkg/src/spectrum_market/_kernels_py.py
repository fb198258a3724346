"""Pure-Python StrictBR kernels.

Mirrors ``_kernels.pyx`` expression for expression so both backends produce
bit-identical floats.  Keep the two files in sync.
"""
import math

import numpy as np

RESET_FLOOR = 1e-12
OVERFLOW = 1e12

GRADIENT = 2
CAPACITY = 1


def br_orbit(a, b, c, q, gamma, p0, n_steps, uniforms, eps):
    """Iterate the StrictBR map ``n_steps`` times.

    Returns ``(trajectory, branches, steps_done)``; rows past a divergence are NaN.
    """
    a1, a2 = float(a[0]), float(a[1])
    b1, b2 = float(b[0]), float(b[1])
    c = float(c)
    q1, q2 = float(q[0]), float(q[1])
    g1, g2 = float(gamma[0]), float(gamma[1])
    p1, p2 = float(p0[0]), float(p0[1])
    n_steps = int(n_steps)
    uniforms = np.asarray(uniforms, dtype=float).tolist()
    traj = np.full((n_steps + 1, 2), np.nan)
    branches = np.zeros((n_steps, 2), dtype=np.int8)
    traj[0, 0] = p1
    traj[0, 1] = p2
    done = 0
    for t in range(n_steps):
        cap1 = (a1 - q1 + c * p2) / b1
        grad1 = p1 + g1 * p1 * (a1 - 2.0 * b1 * p1 + c * p2)
        cap2 = (a2 - q2 + c * p1) / b2
        grad2 = p2 + g2 * p2 * (a2 - 2.0 * b2 * p2 + c * p1)
        if cap1 > grad1:
            n1 = cap1
            branches[t, 0] = CAPACITY
        else:
            n1 = grad1
            branches[t, 0] = GRADIENT
        if cap2 > grad2:
            n2 = cap2
            branches[t, 1] = CAPACITY
        else:
            n2 = grad2
            branches[t, 1] = GRADIENT
        if eps > 0.0:
            if n1 <= RESET_FLOOR:
                n1 = eps * uniforms[2 * t]
            if n2 <= RESET_FLOOR:
                n2 = eps * uniforms[2 * t + 1]
        if not (abs(n1) <= OVERFLOW and abs(n2) <= OVERFLOW):
            break
        p1 = n1
        p2 = n2
        traj[t + 1, 0] = p1
        traj[t + 1, 1] = p2
        done = t + 1
    return traj, branches, done


def br_lyapunov(a, b, c, q, gamma, p0, transient, n_iter, uniforms, eps, n_record):
    """Maximal Lyapunov exponent of a StrictBR orbit.

    The tangent vector follows the Jacobian of the branch each player actually
    took and is renormalized every step; only the ``n_iter`` steps after the
    transient enter the average.  The last ``n_record`` orbit points are kept.

    Returns ``(lambda_max, record, steps_done, diverged)``.
    """
    a1, a2 = float(a[0]), float(a[1])
    b1, b2 = float(b[0]), float(b[1])
    c = float(c)
    q1, q2 = float(q[0]), float(q[1])
    g1, g2 = float(gamma[0]), float(gamma[1])
    p1, p2 = float(p0[0]), float(p0[1])
    transient = int(transient)
    n_iter = int(n_iter)
    n_record = int(n_record)
    total = transient + n_iter
    uniforms = np.asarray(uniforms, dtype=float).tolist()
    record = np.full((n_record, 2), np.nan)
    v1 = 1.0 / math.sqrt(2.0)
    v2 = v1
    acc = 0.0
    done = 0
    diverged = False
    for t in range(total):
        cap1 = (a1 - q1 + c * p2) / b1
        grad1 = p1 + g1 * p1 * (a1 - 2.0 * b1 * p1 + c * p2)
        cap2 = (a2 - q2 + c * p1) / b2
        grad2 = p2 + g2 * p2 * (a2 - 2.0 * b2 * p2 + c * p1)
        if cap1 > grad1:
            n1 = cap1
            j11 = 0.0
            j12 = c / b1
        else:
            n1 = grad1
            j11 = 1.0 + g1 * (a1 - 4.0 * b1 * p1 + c * p2)
            j12 = g1 * c * p1
        if cap2 > grad2:
            n2 = cap2
            j21 = c / b2
            j22 = 0.0
        else:
            n2 = grad2
            j21 = g2 * c * p2
            j22 = 1.0 + g2 * (a2 - 4.0 * b2 * p2 + c * p1)
        if eps > 0.0:
            if n1 <= RESET_FLOOR:
                n1 = eps * uniforms[2 * t]
            if n2 <= RESET_FLOOR:
                n2 = eps * uniforms[2 * t + 1]
        if not (abs(n1) <= OVERFLOW and abs(n2) <= OVERFLOW):
            diverged = True
            break
        w1 = j11 * v1 + j12 * v2
        w2 = j21 * v1 + j22 * v2
        nrm = math.sqrt(w1 * w1 + w2 * w2)
        if nrm > 0.0:
            if t >= transient:
                acc += math.log(nrm)
            v1 = w1 / nrm
            v2 = w2 / nrm
        else:
            # tangent annihilated (measure-zero event): count the collapse and restart
            if t >= transient:
                acc += math.log(1e-300)
            v1 = 1.0 / math.sqrt(2.0)
            v2 = v1
        p1 = n1
        p2 = n2
        done = t + 1
        k = total - 1 - t
        if k < n_record:
            record[n_record - 1 - k, 0] = p1
            record[n_record - 1 - k, 1] = p2
    lam = acc / n_iter if (n_iter > 0 and not diverged) else math.nan
    return lam, record, done, diverged
