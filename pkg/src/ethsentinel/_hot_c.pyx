# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot inner loops: the one-class SMO solver and the ARMA
conditional-sum-of-squares residual recursion.

Behaviorally identical to ``_hot_py`` (same pair selection, same
first-index tie-breaking), just much faster on the scalar loops.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF EPS = 1e-12


def smo_solve(cnp.ndarray[cnp.float64_t, ndim=2] G,
              cnp.ndarray[cnp.float64_t, ndim=1] a,
              double C, double tol, long max_iter,
              bint record_objective=False):
    cdef long n = G.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g = np.dot(G, a)
    cdef long it = 0, i, j, k
    cdef double violation, eta, t, best_up, best_dn
    cdef bint converged = False
    history = []

    while it < max_iter:
        i = -1
        j = -1
        best_up = 0.0
        best_dn = 0.0
        for k in range(n):
            if a[k] < C - EPS and (i < 0 or g[k] < best_up):
                i = k
                best_up = g[k]
            if a[k] > EPS and (j < 0 or g[k] > best_dn):
                j = k
                best_dn = g[k]
        if i < 0 or j < 0:  # every alpha pinned to a bound: vertex optimum
            converged = True
            break
        violation = g[j] - g[i]
        if violation < tol:
            converged = True
            break
        eta = G[i, i] + G[j, j] - 2.0 * G[i, j]
        if eta < EPS:
            eta = EPS
        t = violation / eta
        if t > C - a[i]:
            t = C - a[i]
        if t > a[j]:
            t = a[j]
        a[i] += t
        a[j] -= t
        for k in range(n):
            g[k] += t * (G[k, i] - G[k, j])
        it += 1
        if record_objective:
            history.append(0.5 * float(np.dot(a, np.dot(G, a))))
    return it, converged, history


def css_residuals(cnp.ndarray[cnp.float64_t, ndim=1] w,
                  double c,
                  cnp.ndarray[cnp.float64_t, ndim=1] phi,
                  cnp.ndarray[cnp.float64_t, ndim=1] sphi,
                  cnp.ndarray[cnp.float64_t, ndim=1] theta,
                  cnp.ndarray[cnp.float64_t, ndim=1] stheta,
                  long s, long start):
    cdef long n = w.shape[0]
    cdef long p = phi.shape[0]
    cdef long P = sphi.shape[0]
    cdef long q = theta.shape[0]
    cdef long Q = stheta.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] e = np.zeros(n)
    cdef long t, i, j
    cdef double pred
    for t in range(start, n):
        pred = c
        for i in range(p):
            pred += phi[i] * w[t - 1 - i]
        for j in range(P):
            pred += sphi[j] * w[t - (j + 1) * s]
        for i in range(q):
            pred -= theta[i] * e[t - 1 - i]
        for j in range(Q):
            pred -= stheta[j] * e[t - (j + 1) * s]
        e[t] = w[t] - pred
    return e
