# cython: language_level=3
"""Compiled inner loops. Mirrors the API of ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

# family codes, kept in sync with kernels.Family
cdef enum:
    EXPONENTIAL = 0
    MATERN32 = 1
    MATERN52 = 2
    GAUSSIAN = 3
    RBF = 4


cdef inline double _kval(double h, int family, double ell, double sigma2) nogil:
    cdef double z
    if family == EXPONENTIAL:
        return sigma2 * exp(-h / ell)
    elif family == MATERN32:
        z = h / ell
        return sigma2 * (1.0 + z) * exp(-z)
    elif family == MATERN52:
        z = h / ell
        return sigma2 * (1.0 + z + z * z / 3.0) * exp(-z)
    elif family == GAUSSIAN:
        return sigma2 * exp(-h * h / (2.0 * ell * ell))
    else:
        return exp(-h * h / (2.0 * ell * ell))


def kernel_values(const double[::1] h, int family, double ell, double sigma2):
    cdef Py_ssize_t i, n = h.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _kval(h[i], family, ell, sigma2)
    return out


def kernel_matrix(const double[:, ::1] X, int family, double ell, double sigma2):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, t, w
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] W = out
    cdef double w0 = _kval(0.0, family, ell, sigma2)
    with nogil:
        for i in range(n):
            W[i, i] = w0
            for j in range(i + 1, n):
                s = 0.0
                for k in range(d):
                    t = X[i, k] - X[j, k]
                    s = s + t * t
                w = _kval(sqrt(s), family, ell, sigma2)
                W[i, j] = w
                W[j, i] = w
    return out


def kernel_block(const double[:, ::1] XR, const double[:, ::1] XC, int family,
                 double ell, double sigma2):
    cdef Py_ssize_t nr = XR.shape[0], nc = XC.shape[0], d = XR.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, t
    out = np.empty((nr, nc), dtype=np.float64)
    cdef double[:, ::1] W = out
    with nogil:
        for i in range(nr):
            for j in range(nc):
                s = 0.0
                for k in range(d):
                    t = XR[i, k] - XC[j, k]
                    s = s + t * t
                W[i, j] = _kval(sqrt(s), family, ell, sigma2)
    return out


def lloyd_step(const double[:, ::1] X, const double[:, ::1] C):
    """One assignment pass plus centroid accumulation.

    Returns (labels, sums, counts, inertia, dist2).
    """
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], K = C.shape[0]
    cdef Py_ssize_t i, j, k, best
    cdef double s, t, bestd, inertia = 0.0
    labels = np.empty(n, dtype=np.int64)
    sums = np.zeros((K, d), dtype=np.float64)
    counts = np.zeros(K, dtype=np.int64)
    dist2 = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] lab = labels
    cdef double[:, ::1] S = sums
    cdef cnp.int64_t[::1] cnt = counts
    cdef double[::1] dd = dist2
    with nogil:
        for i in range(n):
            best = 0
            bestd = 0.0
            for k in range(d):
                t = X[i, k] - C[0, k]
                bestd = bestd + t * t
            for j in range(1, K):
                s = 0.0
                for k in range(d):
                    t = X[i, k] - C[j, k]
                    s = s + t * t
                    if s >= bestd:
                        break
                if s < bestd:
                    bestd = s
                    best = j
            lab[i] = best
            dd[i] = bestd
            inertia = inertia + bestd
            cnt[best] += 1
            for k in range(d):
                S[best, k] = S[best, k] + X[i, k]
    return labels, sums, counts, inertia, dist2


def cross_gram(const cnp.int64_t[:, ::1] cols, const double[::1] scale,
               const double[::1] s, Py_ssize_t m):
    """Dense ``B^T diag(s) B`` for a one-hot factor given by global column indices."""
    cdef Py_ssize_t n = cols.shape[0], r = cols.shape[1]
    cdef Py_ssize_t i, a, b
    cdef cnp.int64_t ca, cb
    cdef double si, v
    out = np.zeros((m, m), dtype=np.float64)
    cdef double[:, ::1] M = out
    with nogil:
        for i in range(n):
            si = s[i]
            for a in range(r):
                ca = cols[i, a]
                v = scale[a] * si
                M[ca, ca] = M[ca, ca] + scale[a] * v
                for b in range(a + 1, r):
                    cb = cols[i, b]
                    M[ca, cb] = M[ca, cb] + v * scale[b]
        # each partition pair was accumulated on one side only
        for a in range(m):
            for b in range(a + 1, m):
                v = M[a, b] + M[b, a]
                M[a, b] = v
                M[b, a] = v
    return out


def factor_rmatvec(const cnp.int64_t[:, ::1] cols, const double[::1] scale,
                   const double[::1] x, Py_ssize_t m):
    """``B^T x``."""
    cdef Py_ssize_t n = cols.shape[0], r = cols.shape[1]
    cdef Py_ssize_t i, a
    out = np.zeros(m, dtype=np.float64)
    cdef double[::1] z = out
    with nogil:
        for i in range(n):
            for a in range(r):
                z[cols[i, a]] = z[cols[i, a]] + scale[a] * x[i]
    return out


def factor_matvec(const cnp.int64_t[:, ::1] cols, const double[::1] scale,
                  const double[::1] z):
    """``B z``."""
    cdef Py_ssize_t n = cols.shape[0], r = cols.shape[1]
    cdef Py_ssize_t i, a
    cdef double acc
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    with nogil:
        for i in range(n):
            acc = 0.0
            for a in range(r):
                acc = acc + scale[a] * z[cols[i, a]]
            y[i] = acc
    return out


def hartigan_pass(const double[:, ::1] X, cnp.int64_t[::1] labels, double[:, ::1] C,
                  cnp.int64_t[::1] counts):
    """One sweep of single-point transfers; updates labels, centroids, counts in place.

    A point moves from cluster a to b when
    ``n_b/(n_b+1) |x-c_b|^2 < n_a/(n_a-1) |x-c_a|^2``, i.e. when the move
    strictly lowers the within-cluster sum of squares. Candidates are
    screened against the centroids as they stand at the start of the sweep,
    then settled in index order with exact running centroids (the same
    order as the numpy fallback). Returns the number of moves made.
    """
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], K = C.shape[0]
    cdef Py_ssize_t i, j, k, a, best
    cdef double t, s, remove_cost, best_cost, na, nb
    cdef Py_ssize_t moves = 0
    cdef cnp.uint8_t[::1] cand = np.zeros(n, dtype=np.uint8)
    with nogil:
        for i in range(n):
            a = labels[i]
            if counts[a] <= 1:
                continue
            s = 0.0
            for k in range(d):
                t = X[i, k] - C[a, k]
                s = s + t * t
            na = <double>counts[a]
            remove_cost = na / (na - 1.0) * s
            for j in range(K):
                if j == a:
                    continue
                nb = <double>counts[j]
                s = 0.0
                for k in range(d):
                    t = X[i, k] - C[j, k]
                    s = s + t * t
                if nb / (nb + 1.0) * s < remove_cost:
                    cand[i] = 1
                    break
        for i in range(n):
            if not cand[i]:
                continue
            a = labels[i]
            if counts[a] <= 1:
                continue
            s = 0.0
            for k in range(d):
                t = X[i, k] - C[a, k]
                s = s + t * t
            na = <double>counts[a]
            remove_cost = na / (na - 1.0) * s
            best = a
            best_cost = remove_cost
            for j in range(K):
                if j == a:
                    continue
                nb = <double>counts[j]
                s = 0.0
                for k in range(d):
                    t = X[i, k] - C[j, k]
                    s = s + t * t
                s = nb / (nb + 1.0) * s
                if s < best_cost:
                    best_cost = s
                    best = j
            if best != a:
                na = <double>counts[a]
                nb = <double>counts[best]
                for k in range(d):
                    C[a, k] = (na * C[a, k] - X[i, k]) / (na - 1.0)
                    C[best, k] = (nb * C[best, k] + X[i, k]) / (nb + 1.0)
                counts[a] -= 1
                counts[best] += 1
                labels[i] = best
                moves += 1
    return moves
