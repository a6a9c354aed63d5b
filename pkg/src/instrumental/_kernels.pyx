# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the measurement-optimization hot loop.

Mirrors _kernels_py; see that module for the conventions.  These functions
are called millions of times inside grid scans and simplex refinements, so
they avoid temporaries and run as straight C loops.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, fabs, sin, sqrt

cnp.import_array()


cdef inline double _dot3(const double* a, const double* b) nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef double _best_alice_core(const double[:, :, ::1] c,
                             const double* alpha_a, double beta_a,
                             const double* alpha_b,
                             const double* w0, const double* w1,
                             const double* r, const double* s,
                             const double[:, ::1] t) nogil:
    cdef int n_x = c.shape[0]
    cdef double tw[2][3]
    cdef double ws[2]
    cdef double sgn[2]
    cdef double vx[3]
    cdef double const_term = 0.0
    cdef double total = 0.0
    cdef double cc, sb
    cdef int x, a, b, k
    cdef const double* w
    sgn[0] = 1.0
    sgn[1] = -1.0
    for k in range(3):
        tw[0][k] = t[k, 0] * w0[0] + t[k, 1] * w0[1] + t[k, 2] * w0[2]
        tw[1][k] = t[k, 0] * w1[0] + t[k, 1] * w1[1] + t[k, 2] * w1[2]
    ws[0] = _dot3(w0, s)
    ws[1] = _dot3(w1, s)
    for x in range(n_x):
        vx[0] = 0.0
        vx[1] = 0.0
        vx[2] = 0.0
        for a in range(2):
            for b in range(2):
                cc = 0.25 * c[x, a, b]
                sb = sgn[b]
                const_term += cc * alpha_a[a] * (alpha_b[b] + sb * ws[a])
                for k in range(3):
                    vx[k] += cc * sgn[a] * beta_a * (alpha_b[b] * r[k] + sb * tw[a][k])
        total += sqrt(vx[0] * vx[0] + vx[1] * vx[1] + vx[2] * vx[2])
    return const_term + total


def best_alice_value(c, alpha_a, beta_a, alpha_b, w_b, r, s, t):
    cdef const double[:, :, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[::1] aa = np.ascontiguousarray(alpha_a, dtype=np.float64)
    cdef const double[::1] ab = np.ascontiguousarray(alpha_b, dtype=np.float64)
    cdef const double[:, ::1] wb = np.ascontiguousarray(w_b, dtype=np.float64)
    cdef const double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef const double[:, ::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    return _best_alice_core(cv, &aa[0], beta_a, &ab[0], &wb[0, 0], &wb[1, 0],
                            &rv[0], &sv[0], tv)


def ineq_value_general(c, alpha_a, beta_a, axes_a, alpha_b, w_b, r, s, t):
    cdef const double[:, :, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[::1] aa = np.ascontiguousarray(alpha_a, dtype=np.float64)
    cdef const double[:, ::1] ax = np.ascontiguousarray(axes_a, dtype=np.float64)
    cdef const double[::1] ab = np.ascontiguousarray(alpha_b, dtype=np.float64)
    cdef const double[:, ::1] wb = np.ascontiguousarray(w_b, dtype=np.float64)
    cdef const double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef const double[:, ::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef double beta = beta_a
    cdef int n_x = cv.shape[0]
    cdef double tw[2][3]
    cdef double ws[2]
    cdef double sgn[2]
    cdef double total = 0.0
    cdef double ur, p
    cdef int x, a, b, k
    sgn[0] = 1.0
    sgn[1] = -1.0
    for k in range(3):
        tw[0][k] = tv[k, 0] * wb[0, 0] + tv[k, 1] * wb[0, 1] + tv[k, 2] * wb[0, 2]
        tw[1][k] = tv[k, 0] * wb[1, 0] + tv[k, 1] * wb[1, 1] + tv[k, 2] * wb[1, 2]
    ws[0] = wb[0, 0] * sv[0] + wb[0, 1] * sv[1] + wb[0, 2] * sv[2]
    ws[1] = wb[1, 0] * sv[0] + wb[1, 1] * sv[1] + wb[1, 2] * sv[2]
    for x in range(n_x):
        ur = ax[x, 0] * rv[0] + ax[x, 1] * rv[1] + ax[x, 2] * rv[2]
        for a in range(2):
            for b in range(2):
                p = 0.25 * (aa[a] * ab[b]
                            + ab[b] * sgn[a] * beta * ur
                            + aa[a] * sgn[b] * ws[a]
                            + sgn[a] * sgn[b] * beta
                              * (ax[x, 0] * tw[a][0] + ax[x, 1] * tw[a][1] + ax[x, 2] * tw[a][2]))
                total += cv[x, a, b] * p
    return total


cdef double _objective_xz_core(const double[:, :, ::1] c, double g0, double g1,
                               double eta_a_up, double eta_a_down,
                               double eta_b_up, double eta_b_down,
                               const double* r, const double* s,
                               const double[:, ::1] t) nogil:
    cdef double alpha_a[2]
    cdef double alpha_b[2]
    cdef double w0[3]
    cdef double w1[3]
    cdef double beta_a = eta_a_up + eta_a_down - 1.0
    cdef double beta_b = eta_b_up + eta_b_down - 1.0
    alpha_a[0] = 1.0 + (eta_a_up - eta_a_down)
    alpha_a[1] = 1.0 - (eta_a_up - eta_a_down)
    alpha_b[0] = 1.0 + (eta_b_up - eta_b_down)
    alpha_b[1] = 1.0 - (eta_b_up - eta_b_down)
    w0[0] = beta_b * sin(g0)
    w0[1] = 0.0
    w0[2] = beta_b * cos(g0)
    w1[0] = beta_b * sin(g1)
    w1[1] = 0.0
    w1[2] = beta_b * cos(g1)
    return _best_alice_core(c, alpha_a, beta_a, alpha_b, w0, w1, r, s, t)


def objective_xz(c, double g0, double g1, double eta_a_up, double eta_a_down,
                 double eta_b_up, double eta_b_down, r, s, t):
    cdef const double[:, :, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef const double[:, ::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    return _objective_xz_core(cv, g0, g1, eta_a_up, eta_a_down,
                              eta_b_up, eta_b_down, &rv[0], &sv[0], tv)


def objective_xz_pockels(c, double g1, double v_pc, double eta_b_up,
                         double eta_b_down, r, s, t):
    cdef const double[:, :, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef const double[:, ::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef double alpha_a[2]
    cdef double alpha_b[2]
    cdef double w0[3]
    cdef double w1[3]
    cdef double beta_b = eta_b_up + eta_b_down - 1.0
    alpha_a[0] = 1.0
    alpha_a[1] = 1.0
    alpha_b[0] = 1.0 + (eta_b_up - eta_b_down)
    alpha_b[1] = 1.0 - (eta_b_up - eta_b_down)
    w1[0] = beta_b * sin(g1)
    w1[1] = 0.0
    w1[2] = beta_b * cos(g1)
    # kicked axis flips x and y; mixture with weight v_pc on the kick
    w0[0] = v_pc * (-w1[0]) + (1.0 - v_pc) * w1[0]
    w0[1] = 0.0
    w0[2] = w1[2]
    return _best_alice_core(cv, alpha_a, 1.0, alpha_b, w0, w1, &rv[0], &sv[0], tv)


def scan_xz(c, angles, double eta_a_up, double eta_a_down, double eta_b_up,
            double eta_b_down, r, s, t):
    cdef const double[:, :, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[::1] av = np.ascontiguousarray(angles, dtype=np.float64)
    cdef const double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef const double[:, ::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef int n = av.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef int i, j
    with nogil:
        for i in range(n):
            for j in range(n):
                ov[i, j] = _objective_xz_core(cv, av[i], av[j],
                                              eta_a_up, eta_a_down,
                                              eta_b_up, eta_b_down,
                                              &rv[0], &sv[0], tv)
    return out
