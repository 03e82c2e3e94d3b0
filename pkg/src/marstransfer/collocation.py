"""Legendre-Gauss-Radau points, differentiation matrices and barycentric
Lagrange interpolation on [-1, 1]."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import special


@lru_cache(maxsize=None)
def lgr_nodes(n: int) -> np.ndarray:
    """The ``n`` flipped-free LGR points on [-1, 1), including -1.

    They are -1 followed by the roots of the Jacobi polynomial P^(0,1)_{n-1}.
    """
    if n < 1:
        raise ValueError("need at least one LGR node")
    if n == 1:
        return np.array([-1.0])
    roots, _ = special.roots_jacobi(n - 1, 0.0, 1.0)
    nodes = np.concatenate(([-1.0], np.sort(roots)))
    nodes.flags.writeable = False
    return nodes


@lru_cache(maxsize=None)
def lgr_weights(n: int) -> np.ndarray:
    """Quadrature weights matching :func:`lgr_nodes` (exact to degree 2n - 2)."""
    tau = lgr_nodes(n)
    w = np.empty(n)
    w[0] = 2.0 / n**2
    P = special.eval_legendre(n - 1, tau[1:])
    w[1:] = (1.0 - tau[1:]) / (n * P) ** 2
    w.flags.writeable = False
    return w


def support_points(n: int) -> np.ndarray:
    """LGR points plus the non-collocated end point +1."""
    return np.concatenate((lgr_nodes(n), [1.0]))


def barycentric_weights(x: np.ndarray) -> np.ndarray:
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    return w / np.max(np.abs(w))


@lru_cache(maxsize=None)
def differentiation_matrix(n: int) -> np.ndarray:
    """(n, n+1) matrix mapping values at the support points to derivatives at
    the n collocation points."""
    x = support_points(n)
    w = barycentric_weights(x)
    m = len(x)
    D = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            if i != j:
                D[i, j] = (w[j] / w[i]) / (x[i] - x[j])
        D[i, i] = -np.sum(D[i])
    D = D[:n]
    D.flags.writeable = False
    return D


def lagrange_interpolate(x: np.ndarray, values: np.ndarray, xi) -> np.ndarray:
    """Evaluate the interpolating polynomial through (x, values) at ``xi``.

    ``values`` may be 1-D or have shape (len(x), k).
    """
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    w = barycentric_weights(x)
    diff = xi[:, None] - x[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    terms = w / diff
    hit = exact.any(axis=1)
    terms[hit] = exact[hit].astype(float)
    denom = terms.sum(axis=1)
    if values.ndim == 1:
        return terms @ values / denom
    return (terms @ values) / denom[:, None]
