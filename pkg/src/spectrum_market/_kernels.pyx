# cython: language_level=3
"""Compiled StrictBR kernels; keep in lockstep with ``_kernels_py.py``."""
import numpy as np
from libc.math cimport fabs, log, sqrt, NAN

cdef double RESET_FLOOR = 1e-12
cdef double OVERFLOW = 1e12
cdef signed char GRADIENT = 2
cdef signed char CAPACITY = 1


def br_orbit(a, b, double c, q, gamma, p0, Py_ssize_t n_steps, const double[::1] uniforms, double eps):
    cdef double a1 = a[0], a2 = a[1], b1 = b[0], b2 = b[1]
    cdef double q1 = q[0], q2 = q[1], g1 = gamma[0], g2 = gamma[1]
    cdef double p1 = p0[0], p2 = p0[1]
    cdef double cap1, cap2, grad1, grad2, n1, n2
    cdef Py_ssize_t t, done = 0
    traj_arr = np.full((n_steps + 1, 2), np.nan)
    branch_arr = np.zeros((n_steps, 2), dtype=np.int8)
    cdef double[:, ::1] traj = traj_arr
    cdef signed char[:, ::1] branches = branch_arr
    traj[0, 0] = p1
    traj[0, 1] = p2
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
        if not (fabs(n1) <= OVERFLOW and fabs(n2) <= OVERFLOW):
            break
        p1 = n1
        p2 = n2
        traj[t + 1, 0] = p1
        traj[t + 1, 1] = p2
        done = t + 1
    return traj_arr, branch_arr, done


def br_lyapunov(a, b, double c, q, gamma, p0, Py_ssize_t transient, Py_ssize_t n_iter,
                const double[::1] uniforms, double eps, Py_ssize_t n_record):
    cdef double a1 = a[0], a2 = a[1], b1 = b[0], b2 = b[1]
    cdef double q1 = q[0], q2 = q[1], g1 = gamma[0], g2 = gamma[1]
    cdef double p1 = p0[0], p2 = p0[1]
    cdef double cap1, cap2, grad1, grad2, n1, n2
    cdef double j11, j12, j21, j22, w1, w2, nrm
    cdef double v1 = 1.0 / sqrt(2.0)
    cdef double v2 = v1
    cdef double acc = 0.0
    cdef Py_ssize_t t, k, done = 0
    cdef Py_ssize_t total = transient + n_iter
    cdef bint diverged = False
    record_arr = np.full((n_record, 2), np.nan)
    cdef double[:, ::1] record = record_arr
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
        if not (fabs(n1) <= OVERFLOW and fabs(n2) <= OVERFLOW):
            diverged = True
            break
        w1 = j11 * v1 + j12 * v2
        w2 = j21 * v1 + j22 * v2
        nrm = sqrt(w1 * w1 + w2 * w2)
        if nrm > 0.0:
            if t >= transient:
                acc += log(nrm)
            v1 = w1 / nrm
            v2 = w2 / nrm
        else:
            if t >= transient:
                acc += log(1e-300)
            v1 = 1.0 / sqrt(2.0)
            v2 = v1
        p1 = n1
        p2 = n2
        done = t + 1
        k = total - 1 - t
        if k < n_record:
            record[n_record - 1 - k, 0] = p1
            record[n_record - 1 - k, 1] = p2
    lam = acc / n_iter if (n_iter > 0 and not diverged) else NAN
    return lam, record_arr, done, bool(diverged)
