# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled shooting kernel: stepwise state/costate/sensitivity propagation."""

import numpy as np
from libc.math cimport sqrt

cdef double SINGULAR_NORM = 1e-12


cdef inline void _law(const double* lv, double eps, double u_max,
                      double* u, double* du, bint want_jac) noexcept nogil:
    cdef double L = sqrt(lv[0] * lv[0] + lv[1] * lv[1] + lv[2] * lv[2])
    cdef double S = 1.0 - L
    cdef double mag, dmag, a[3]
    cdef int i, j
    if L < SINGULAR_NORM:
        for i in range(3):
            u[i] = 0.0
        if want_jac:
            for i in range(9):
                du[i] = 0.0
        return
    dmag = 0.0
    if eps > 0.0:
        if S > eps:
            mag = 0.0
        elif S < -eps:
            mag = 1.0
        else:
            mag = (eps - S) / (2.0 * eps)
            dmag = 1.0 / (2.0 * eps)
    else:
        mag = 1.0 if S < 0.0 else 0.0
    for i in range(3):
        a[i] = -lv[i] / L
        u[i] = u_max * mag * a[i]
    if want_jac:
        for i in range(3):
            for j in range(3):
                du[3 * i + j] = -u_max * ((mag / L) * ((1.0 if i == j else 0.0) - a[i] * a[j])
                                          + dmag * a[i] * a[j])


def evaluate(lam0, x0, phi, gamma, psi, Py_ssize_t n_steps, double eps,
             double u_max, bint want_jac=True):
    """Same contract as the numpy fallback ``evaluate``."""
    cdef double[::1] lam0_v = np.ascontiguousarray(lam0, dtype=np.float64)
    cdef double[::1] x0_v = np.ascontiguousarray(x0, dtype=np.float64)
    cdef double[:, ::1] P = np.ascontiguousarray(phi, dtype=np.float64)
    cdef double[:, ::1] G = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef double[:, ::1] Q = np.ascontiguousarray(psi, dtype=np.float64)

    controls = np.zeros((n_steps, 3))
    cdef double[:, ::1] U = controls
    cdef double x[6]
    cdef double xn[6]
    cdef double lam[6]
    cdef double lamn[6]
    cdef double sx[36]
    cdef double sxn[36]
    cdef double sl[36]
    cdef double sln[36]
    cdef double du[9]
    cdef double dusl[18]
    cdef double u[3]
    cdef double acc
    cdef Py_ssize_t k
    cdef int i, j, m

    for i in range(6):
        x[i] = x0_v[i]
        lam[i] = lam0_v[i]
        for j in range(6):
            sx[6 * i + j] = 0.0
            sl[6 * i + j] = 1.0 if i == j else 0.0

    with nogil:
        for k in range(n_steps):
            _law(&lam[3], eps, u_max, u, du, want_jac)
            U[k, 0] = u[0]
            U[k, 1] = u[1]
            U[k, 2] = u[2]
            for i in range(6):
                acc = 0.0
                for j in range(6):
                    acc = acc + P[i, j] * x[j]
                xn[i] = acc + G[i, 0] * u[0] + G[i, 1] * u[1] + G[i, 2] * u[2]
                acc = 0.0
                for j in range(6):
                    acc = acc + Q[i, j] * lam[j]
                lamn[i] = acc
            if want_jac:
                # du/dlam0 = du/dlam_v * (psi^k)[3:6, :]
                for i in range(3):
                    for m in range(6):
                        dusl[6 * i + m] = (du[3 * i] * sl[18 + m] + du[3 * i + 1] * sl[24 + m]
                                           + du[3 * i + 2] * sl[30 + m])
                for i in range(6):
                    for m in range(6):
                        acc = G[i, 0] * dusl[m] + G[i, 1] * dusl[6 + m] + G[i, 2] * dusl[12 + m]
                        for j in range(6):
                            acc = acc + P[i, j] * sx[6 * j + m]
                        sxn[6 * i + m] = acc
                        acc = 0.0
                        for j in range(6):
                            acc = acc + Q[i, j] * sl[6 * j + m]
                        sln[6 * i + m] = acc
                for i in range(36):
                    sx[i] = sxn[i]
                    sl[i] = sln[i]
            for i in range(6):
                x[i] = xn[i]
                lam[i] = lamn[i]

    x_final = np.empty(6)
    for i in range(6):
        x_final[i] = x[i]
    if not want_jac:
        return x_final, None, controls
    jac = np.empty((6, 6))
    for i in range(6):
        for j in range(6):
            jac[i, j] = sx[6 * i + j]
    return x_final, jac, controls
