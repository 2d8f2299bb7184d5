"""Independent reference computations used by the tests.

Nothing here reuses the package's basis tables, exterior-derivative
formulas or quadrature: basis functions are built pointwise from the
textbook Whitney formulas, derivatives are taken by central differences
along an orthonormal tangent frame, and integrals use a collapsed
Gauss-Legendre (Duffy) rule.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np


# ----------------------------------------------------------------- geometry
def tangent_frame(z: np.ndarray) -> np.ndarray:
    """Orthonormal rows spanning the affine hull of the simplex ``z``."""
    e = (z[1:] - z[0]).T
    q, _ = np.linalg.qr(e)
    return q.T


def barycentric(z: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of the tangential projection of ``x``."""
    e = (z[1:] - z[0]).T
    coef, *_ = np.linalg.lstsq(e, (np.atleast_2d(x) - z[0]).T, rcond=None)
    lam = np.vstack((1.0 - coef.sum(axis=0), coef)).T
    return lam


def bary_gradients(z: np.ndarray, h: float) -> np.ndarray:
    """Gradients of the barycentric functions by central differences."""
    frame = tangent_frame(z)
    x0 = z.mean(axis=0)
    grads = np.zeros((len(z), z.shape[1]))
    for t in frame:
        d = (barycentric(z, x0 + h * t) - barycentric(z, x0 - h * t))[0] / (2 * h)
        grads += d[:, None] * t[None, :]
    return grads


def element_normal(z: np.ndarray) -> np.ndarray:
    """Unit normal with ``det[nu; z1-z0; ...] > 0`` (the vertex-order orientation)."""
    n = z.shape[1]
    frame = tangent_frame(z)
    # the normal is the null vector of the frame
    _, _, vt = np.linalg.svd(frame, full_matrices=True)
    nu = vt[-1]
    if np.linalg.det(np.vstack((nu, z[1:] - z[0]))) < 0:
        nu = -nu
    assert nu.shape == (n,)
    return nu


def wedge(v: np.ndarray, w: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """``c`` with ``c . x = det[x; v; w; nu]`` via full 4x4 determinants."""
    return np.array([np.linalg.det(np.vstack((e, v, w, nu))) for e in np.eye(4)])


# --------------------------------------------------------------- quadrature
def duffy_rule(k: int, n: int = 4):
    """Collapsed Gauss-Legendre rule on the unit k-simplex (reference coords)."""
    t, w = np.polynomial.legendre.leggauss(n)
    t, w = 0.5 * (t + 1.0), 0.5 * w
    pts, wts = [], []
    for idx in product(range(n), repeat=k):
        u = [t[i] for i in idx]
        weight = np.prod([w[i] for i in idx])
        x, scale = [], 1.0
        for j in range(k):
            x.append(u[j] * scale)
            weight *= scale if j else 1.0
            scale *= 1.0 - u[j]
        pts.append(x)
        wts.append(weight)
    wts = np.array(wts)
    return np.array(pts), wts / wts.sum()  # weights normalized to sum 1


def simplex_points(z: np.ndarray, ref: np.ndarray) -> np.ndarray:
    return z[0] + ref @ (z[1:] - z[0])


def simplex_volume(z: np.ndarray) -> float:
    e = z[1:] - z[0]
    return math.sqrt(max(np.linalg.det(e @ e.T), 0.0)) / math.factorial(len(z) - 1)


# ----------------------------------------------------------- Whitney bases
def _plus_element(mesh, verts):
    """Lowest-index element containing all global vertices ``verts``."""
    for e, row in enumerate(mesh.elements.tolist()):
        if set(verts) <= set(row):
            return e
    raise ValueError("facet not in mesh")


def oracle_basis(mesh, family: str, dof: int, element: int):
    """Pointwise basis function ``dof`` restricted to ``element``.

    Returns ``f(x) -> (m, n)`` or ``None`` when the DOF is not on the element.
    """
    z_all = mesh.vertices
    elem = mesh.elements[element].tolist()
    z = z_all[elem]
    h = 0.25 * max(np.linalg.norm(a - b) for a in z for b in z)
    g = bary_gradients(z, h)
    nu = element_normal(z)
    k = len(elem) - 1
    loc = {v: i for i, v in enumerate(elem)}

    if family == "N0":
        a, b = sorted(mesh.edges[dof].tolist())
        if a not in loc or b not in loc:
            return None
        ia, ib = loc[a], loc[b]

        def f(x):
            lam = barycentric(z, x)
            return lam[:, [ia]] * g[ib] - lam[:, [ib]] * g[ia]

        return f

    verts = sorted(mesh.facets[dof].tolist())
    if not all(v in loc for v in verts):
        return None
    ids = [loc[v] for v in verts]
    if k == 2:
        i, j = ids

        def raw(x):
            lam = barycentric(z, x)
            return lam[:, [i]] * np.cross(g[j], nu) - lam[:, [j]] * np.cross(g[i], nu)

    else:
        i, j, l = ids
        wjk, wki, wij = wedge(g[j], g[l], nu), wedge(g[l], g[i], nu), wedge(g[i], g[j], nu)

        def raw(x):
            lam = barycentric(z, x)
            return 2.0 * (lam[:, [i]] * wjk + lam[:, [j]] * wki + lam[:, [l]] * wij)

    sign = np.sign(oracle_plus_flux(mesh, dof, raw_basis_on_plus(mesh, family, dof)))
    return lambda x: sign * raw(x)


def raw_basis_on_plus(mesh, family, dof):
    """Unsigned sorted-vertex RT0 basis on the facet's plus element."""
    verts = sorted(mesh.facets[dof].tolist())
    e = _plus_element(mesh, verts)
    elem = mesh.elements[e].tolist()
    z = mesh.vertices[elem]
    h = 0.25 * max(np.linalg.norm(a - b) for a in z for b in z)
    g = bary_gradients(z, h)
    nu = element_normal(z)
    ids = [elem.index(v) for v in verts]
    if len(ids) == 2:
        i, j = ids
        return e, lambda x: (
            barycentric(z, x)[:, [i]] * np.cross(g[j], nu) - barycentric(z, x)[:, [j]] * np.cross(g[i], nu)
        )
    i, j, l = ids
    wjk, wki, wij = wedge(g[j], g[l], nu), wedge(g[l], g[i], nu), wedge(g[i], g[j], nu)

    def f(x):
        lam = barycentric(z, x)
        return 2.0 * (lam[:, [i]] * wjk + lam[:, [j]] * wki + lam[:, [l]] * wij)

    return e, f


def plus_conormal(mesh, dof):
    """Outward conormal of facet ``dof`` in its plus element, from geometry."""
    verts = sorted(mesh.facets[dof].tolist())
    e = _plus_element(mesh, verts)
    elem = mesh.elements[e].tolist()
    z = mesh.vertices[elem]
    opp = [v for v in elem if v not in verts][0]
    zf = mesh.vertices[verts]
    frame = tangent_frame(z)
    # tangent direction orthogonal to the facet
    ff = tangent_frame(zf)
    d = frame.T @ frame @ (mesh.vertices[opp] - zf[0])
    d -= ff.T @ (ff @ d)
    return -d / np.linalg.norm(d)


def oracle_plus_flux(mesh, dof, basis_on_plus):
    """Flux through facet ``dof`` against the plus conormal (degree-5 rule)."""
    e, f = basis_on_plus
    verts = sorted(mesh.facets[dof].tolist())
    zf = mesh.vertices[verts]
    ref, w = duffy_rule(len(verts) - 1, 4)
    pts = simplex_points(zf, ref)
    nrm = plus_conormal(mesh, dof)
    return simplex_volume(zf) * np.sum(w * (f(pts) @ nrm))


def oracle_edge_dof(mesh, dof, f):
    a, b = sorted(mesh.edges[dof].tolist())
    za, zb = mesh.vertices[a], mesh.vertices[b]
    t, w = np.polynomial.legendre.leggauss(4)
    s, w = 0.5 * (t + 1.0), 0.5 * w
    pts = za + s[:, None] * (zb - za)
    return np.sum(w * (f(pts) @ (zb - za)))


def fd_derivative(f, z, x, kind):
    """Surface curl/div of ``f`` at points ``x`` by central differences."""
    frame = tangent_frame(z)
    h = 0.25 * max(np.linalg.norm(a - b) for a in z for b in z)
    k = len(frame)
    D = np.zeros((len(x), k, k))  # D[m, i, j] = d_{t_i} (f . t_j)
    for i, t in enumerate(frame):
        df = (f(x + h * t) - f(x - h * t)) / (2 * h)
        D[:, i, :] = df @ frame.T
    if kind == "div":
        return np.trace(D, axis1=1, axis2=2)
    nu = element_normal(z)
    if k == 2:
        s = np.sign(np.dot(np.cross(frame[0], frame[1]), nu))
        return s * (D[:, 0, 1] - D[:, 1, 0])
    s = np.sign(np.linalg.det(np.vstack((frame, nu))))
    om = D - np.swapaxes(D, 1, 2)
    comps = np.stack((om[:, 1, 2], om[:, 2, 0], om[:, 0, 1]), axis=1)
    return s * comps @ frame


def reassemble(mesh, family: str, c: float, n_quad: int = 4) -> np.ndarray:
    """Dense ``(d u, d v) + c (u, v)`` with the Duffy rule (degree ``2 n - 1``)."""
    if family == "P1":
        ndof = mesh.n_vertices
    elif family == "N0":
        ndof = mesh.n_edges
    else:
        ndof = mesh.n_facets
    A = np.zeros((ndof, ndof))
    k = mesh.element_dim
    ref, w = duffy_rule(k, n_quad)
    for e in range(mesh.n_elements):
        elem = mesh.elements[e]
        z = mesh.vertices[elem]
        vol = simplex_volume(z)
        pts = simplex_points(z, ref)
        if family == "P1":
            h = 0.25 * max(np.linalg.norm(a - b) for a in z for b in z)
            g = bary_gradients(z, h)
            lam = barycentric(z, pts)
            dofs = list(elem)
            vals = [lam[:, i] for i in range(k + 1)]
            ders = [np.repeat(g[i][None], len(pts), axis=0) for i in range(k + 1)]
        else:
            local = mesh.element_to_edge[e] if family == "N0" else mesh.element_to_facet[e]
            dofs = list(local)
            fns = [oracle_basis(mesh, family, d, e) for d in dofs]
            vals = [f(pts) for f in fns]
            kind = "div" if family == "RT0" else "curl"
            ders = [fd_derivative(f, z, pts, kind) for f in fns]
        for a, da in enumerate(dofs):
            for b, db in enumerate(dofs):
                m = np.sum(w * _dot(vals[a], vals[b]))
                s = np.sum(w * _dot(ders[a], ders[b]))
                A[da, db] += vol * (s + c * m)
    return A


def _dot(u, v):
    return u * v if u.ndim == 1 else np.sum(u * v, axis=1)
