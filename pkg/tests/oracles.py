"""Independent reference computations used to freeze derived test values.

These are deliberately naive (explicit loops, brute force) and share no code
with the package beyond numpy.
"""

from __future__ import annotations

import itertools

import numpy as np


def gfevd_direct(betas, sigma, h):
    """Normalized generalized decomposition by companion powers and loops."""
    betas = np.asarray(betas, float)
    p, n, _ = betas.shape
    top = np.concatenate(list(betas), axis=1)
    if p == 1:
        C = top
    else:
        C = np.vstack([top, np.hstack([np.eye(n * (p - 1)), np.zeros((n * (p - 1), n))])])
    J = np.hstack([np.eye(n), np.zeros((n, n * (p - 1)))])
    phis = [J @ np.linalg.matrix_power(C, l) @ J.T for l in range(h + 1)]
    theta = np.zeros((n, n))
    for i in range(n):
        den = 0.0
        for l in range(h + 1):
            den += phis[l][i, :] @ sigma @ phis[l][i, :]
        for j in range(n):
            num = 0.0
            for l in range(h + 1):
                num += (phis[l][i, :] @ sigma[:, j]) ** 2
            theta[i, j] = num / sigma[j, j] / den
    return 100.0 * theta / theta.sum(axis=1, keepdims=True)


def ols_var(X, p):
    """Per-equation least squares with ``np.linalg.lstsq``."""
    X = np.asarray(X, float)
    T, n = X.shape
    Z = np.column_stack([np.ones(T - p)] + [X[p - j : T - j] for j in range(1, p + 1)])
    Y = X[p:]
    coef = np.linalg.lstsq(Z, Y, rcond=None)[0]
    resid = Y - Z @ coef
    return coef, resid, resid.T @ resid / (T - p)


def best_subset_bic(X, p=1):
    """Per-equation support minimizing the Gaussian BIC over every subset."""
    X = np.asarray(X, float)
    T, n = X.shape
    Z = np.column_stack([X[p - j : T - j] for j in range(1, p + 1)])
    Y = X[p:]
    m = Y.shape[0]
    k = Z.shape[1]
    masks = np.zeros((n, k), dtype=bool)
    for i in range(n):
        best = (np.inf, None)
        for r in range(k + 1):
            for sub in itertools.combinations(range(k), r):
                D = np.column_stack([np.ones(m)] + [Z[:, s] for s in sub])
                res = Y[:, i] - D @ np.linalg.lstsq(D, Y[:, i], rcond=None)[0]
                bic = m * np.log(res @ res / m) + (r + 1) * np.log(m)
                if bic < best[0]:
                    best = (bic, sub)
        masks[i, list(best[1])] = True
    return masks


def modularity_brute(A, labels):
    A = np.asarray(A, float)
    two_m = A.sum()
    k = A.sum(axis=1)
    q = 0.0
    n = len(labels)
    for i in range(n):
        for j in range(n):
            if labels[i] == labels[j]:
                q += A[i, j] - k[i] * k[j] / two_m
    return q / two_m


def best_two_partition(A):
    """Highest-modularity split of the nodes into at most two groups."""
    n = A.shape[0]
    best = (-np.inf, None)
    for bits in range(2 ** (n - 1)):
        labels = [(bits >> i) & 1 for i in range(n)]
        q = modularity_brute(A, labels)
        if q > best[0] + 1e-12:
            best = (q, labels)
    return best


def quantile_order_statistic(x, tau):
    """The ceil(tau*n)-th smallest value."""
    s = sorted(x)
    k = int(np.ceil(tau * len(s)))
    return s[max(k, 1) - 1]


def gaussian_es(tau):
    """Lower-tail expected shortfall of N(0,1): -phi(z_tau)/tau."""
    from statistics import NormalDist

    nd = NormalDist()
    z = nd.inv_cdf(tau)
    return -nd.pdf(z) / tau
