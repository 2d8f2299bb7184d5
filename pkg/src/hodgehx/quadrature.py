"""Quadrature rules on simplices in barycentric form.

Every rule returns ``(bary, weights)`` with ``bary`` of shape ``(nq, k+1)``
and weights summing to one, so that ``vol * sum(w * f(x_q))`` integrates
``f`` over a simplex of measure ``vol``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def symmetric_rule(k: int, degree: int = 2):
    """Small symmetric rules exact up to ``degree``.

    k=1: Gauss-Legendre; k=2: 3-point (degree 2) or 7-point Radon (degree 5);
    k=3: 4-point (degree 2).  Other requests fall back to :func:`conical_rule`.
    """
    if k == 1:
        n = max(1, (degree + 2) // 2)
        t, w = np.polynomial.legendre.leggauss(n)
        s = 0.5 * (t + 1.0)
        return np.column_stack((1.0 - s, s)), 0.5 * w
    if k == 2 and degree <= 2:
        a, b = 2.0 / 3.0, 1.0 / 6.0
        bary = np.array([[a, b, b], [b, a, b], [b, b, a]])
        return bary, np.full(3, 1.0 / 3.0)
    if k == 2 and degree <= 5:
        r = np.sqrt(15.0)
        a1, a2 = (6.0 - r) / 21.0, (6.0 + r) / 21.0
        w1, w2 = (155.0 - r) / 1200.0, (155.0 + r) / 1200.0
        pts = [[1 / 3, 1 / 3, 1 / 3]]
        pts += [[1 - 2 * a1, a1, a1], [a1, 1 - 2 * a1, a1], [a1, a1, 1 - 2 * a1]]
        pts += [[1 - 2 * a2, a2, a2], [a2, 1 - 2 * a2, a2], [a2, a2, 1 - 2 * a2]]
        w = np.array([9 / 40] + [w1] * 3 + [w2] * 3)
        return np.array(pts), w
    if k == 3 and degree <= 2:
        a = (5.0 + 3.0 * np.sqrt(5.0)) / 20.0
        b = (5.0 - np.sqrt(5.0)) / 20.0
        bary = np.full((4, 4), b)
        np.fill_diagonal(bary, a)
        return bary, np.full(4, 0.25)
    return conical_rule(k, degree)


@lru_cache(maxsize=None)
def conical_rule(k: int, degree: int):
    """Collapsed-coordinate Gauss-Jacobi product rule on the k-simplex."""
    n = degree // 2 + 1
    nodes, weights = [], []
    for j in range(k):
        alpha = k - 1 - j  # Jacobian factor (1 - u_j)^(k-1-j)
        t, w = roots_jacobi(n, alpha, 0.0)
        nodes.append(0.5 * (t + 1.0))
        weights.append(w / 2.0 ** (alpha + 1))
    grids = np.meshgrid(*nodes, indexing="ij")
    wgrid = np.ones_like(grids[0])
    for j, wj in enumerate(weights):
        shape = [1] * k
        shape[j] = n
        wgrid = wgrid * wj.reshape(shape)
    u = [g.ravel() for g in grids]
    # x_0 = u_0, x_1 = u_1 (1 - u_0), x_2 = u_2 (1 - u_0)(1 - u_1), ...
    coords, scale = [], np.ones_like(u[0])
    for j in range(k):
        coords.append(u[j] * scale)
        scale = scale * (1.0 - u[j])
    x = np.column_stack(coords)
    bary = np.column_stack((1.0 - x.sum(axis=1), x))
    w = wgrid.ravel()
    return bary, w / w.sum()
