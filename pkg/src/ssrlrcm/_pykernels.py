"""Pure numpy versions of the compiled inner loops (same API as ``_ckernels``)."""

import numpy as np

EXPONENTIAL, MATERN32, MATERN52, GAUSSIAN, RBF = range(5)

# max number of float64 temporaries materialised per chunk
_CHUNK_ELEMS = 1 << 22


def kernel_values(h, family, ell, sigma2):
    h = np.asarray(h, dtype=np.float64)
    if family == EXPONENTIAL:
        return sigma2 * np.exp(-h / ell)
    if family == MATERN32:
        z = h / ell
        return sigma2 * (1.0 + z) * np.exp(-z)
    if family == MATERN52:
        z = h / ell
        return sigma2 * (1.0 + z + z * z / 3.0) * np.exp(-z)
    if family == GAUSSIAN:
        return sigma2 * np.exp(-h * h / (2.0 * ell * ell))
    return np.exp(-h * h / (2.0 * ell * ell))


def _sqdist(A, B):
    # direct differences rather than the |a|^2 - 2ab + |b|^2 expansion:
    # exact zeros on coincident points and exact symmetry
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kernel_block(XR, XC, family, ell, sigma2):
    XR = np.asarray(XR, dtype=np.float64)
    XC = np.asarray(XC, dtype=np.float64)
    nr, nc, d = XR.shape[0], XC.shape[0], XR.shape[1]
    out = np.empty((nr, nc))
    step = max(1, _CHUNK_ELEMS // max(1, nc * d))
    for s in range(0, nr, step):
        e = min(nr, s + step)
        out[s:e] = kernel_values(np.sqrt(_sqdist(XR[s:e], XC)), family, ell, sigma2)
    return out


def kernel_matrix(X, family, ell, sigma2):
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    out = np.empty((n, n))
    step = max(1, _CHUNK_ELEMS // max(1, n * d))
    for s in range(0, n, step):
        e = min(n, s + step)
        # upper triangle (including the diagonal block) of these rows
        out[s:e, s:] = kernel_values(np.sqrt(_sqdist(X[s:e], X[s:])), family, ell, sigma2)
    iu = np.triu_indices(n, 1)
    out[(iu[1], iu[0])] = out[iu]
    return out


def lloyd_step(X, C):
    X = np.asarray(X, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    n, d = X.shape
    K = C.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist2 = np.empty(n)
    step = max(1, _CHUNK_ELEMS // max(1, K * d))
    for s in range(0, n, step):
        e = min(n, s + step)
        D = _sqdist(X[s:e], C)
        lab = np.argmin(D, axis=1)
        labels[s:e] = lab
        dist2[s:e] = D[np.arange(e - s), lab]
    counts = np.bincount(labels, minlength=K).astype(np.int64)
    sums = np.zeros((K, d))
    np.add.at(sums, labels, X)
    return labels, sums, counts, float(dist2.sum()), dist2


def cross_gram(cols, scale, s, m):
    cols = np.asarray(cols, dtype=np.int64)
    n, r = cols.shape
    out = np.zeros((m, m))
    for a in range(r):
        for b in range(a, r):
            flat = cols[:, a] * m + cols[:, b]
            acc = np.bincount(flat, weights=s * (scale[a] * scale[b]), minlength=m * m)
            out += acc.reshape(m, m)
    iu = np.triu_indices(m, 1)
    out[iu] = out[iu] + out.T[iu]
    out.T[iu] = out[iu]
    return out


def factor_rmatvec(cols, scale, x, m):
    cols = np.asarray(cols, dtype=np.int64)
    z = np.zeros(m)
    for a in range(cols.shape[1]):
        z += np.bincount(cols[:, a], weights=scale[a] * x, minlength=m)
    return z


def factor_matvec(cols, scale, z):
    cols = np.asarray(cols, dtype=np.int64)
    y = np.zeros(cols.shape[0])
    for a in range(cols.shape[1]):
        y += scale[a] * z[cols[:, a]]
    return y


def hartigan_pass(X, labels, C, counts):
    X = np.asarray(X, dtype=np.float64)
    K = C.shape[0]
    moves = 0
    # screen all points against the current centroids, then settle the
    # candidates one by one with exact (incrementally updated) centroids
    nk = counts.astype(np.float64)
    D = np.empty((X.shape[0], K))
    step = max(1, _CHUNK_ELEMS // max(1, K * X.shape[1]))
    for s in range(0, X.shape[0], step):
        D[s : s + step] = _sqdist(X[s : s + step], C)
    own = D[np.arange(X.shape[0]), labels]
    na = nk[labels]
    with np.errstate(divide="ignore", invalid="ignore"):
        remove = np.where(na > 1, na / (na - 1.0) * own, np.inf)
    add = nk / (nk + 1.0) * D
    add[np.arange(X.shape[0]), labels] = np.inf
    cand = np.flatnonzero(add.min(axis=1) < remove)
    for i in cand:
        a = labels[i]
        if counts[a] <= 1:
            continue
        x = X[i]
        d2 = np.sum((C - x) ** 2, axis=1)
        nk = counts.astype(np.float64)
        cost = nk / (nk + 1.0) * d2
        cost[a] = nk[a] / (nk[a] - 1.0) * d2[a]
        best = a
        for j in range(K):
            if j != a and cost[j] < cost[best]:
                best = j
        if best != a:
            C[a] = (nk[a] * C[a] - x) / (nk[a] - 1.0)
            C[best] = (nk[best] * C[best] + x) / (nk[best] + 1.0)
            counts[a] -= 1
            counts[best] += 1
            labels[i] = best
            moves += 1
    return moves
