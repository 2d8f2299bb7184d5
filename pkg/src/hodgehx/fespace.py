"""Lowest-order finite element spaces on simplicial hypersurface meshes.

The three families form the discrete de Rham sequence used throughout:

* ``P1``  continuous piecewise linears, one DOF per vertex;
* ``N0``  Whitney edge elements, DOF = tangential integral along the edge
  (oriented low -> high vertex index);
* ``RT0`` Whitney face elements, DOF = flux through the facet against the
  pre-assigned conormal of the facet's plus element.

On each element a Whitney basis function is stored as the vector-valued
linear field ``sum_a lambda_a W[a]`` with constant vectors ``W[a]``; mass
matrices, loads, DOF functionals and exterior derivatives are all computed
from this representation.

Vector-valued ``P1`` coefficient vectors are laid out component-major: entry
``l * n_vertices + v`` is component ``l`` at vertex ``v``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import IncompatibleFamilies, UnsupportedFamily
from .mesh import LOCAL_EDGES, LOCAL_FACETS, SurfaceMesh, generalized_cross
from .quadrature import symmetric_rule

FAMILIES = ("P1", "N0", "RT0")


def _permutation_parity(keys: np.ndarray) -> np.ndarray:
    """+1/-1 parity of the permutation that sorts each row of ``keys``."""
    order = np.argsort(keys, axis=1)
    n = keys.shape[1]
    parity = np.ones(len(keys), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            parity *= np.where(order[:, i] > order[:, j], -1, 1)
    return parity


def lambda_mass(mesh: SurfaceMesh) -> np.ndarray:
    """Element matrices ``int lambda_a lambda_b`` of shape ``(ne, k+1, k+1)``."""
    k = mesh.element_dim
    ref = (np.ones((k + 1, k + 1)) + np.eye(k + 1)) / ((k + 1) * (k + 2))
    return mesh.volumes[:, None, None] * ref[None]


class FeSpace:
    """DOF numbering and local basis data of one family on one mesh."""

    def __init__(self, mesh: SurfaceMesh, family: str):
        if family not in FAMILIES:
            raise UnsupportedFamily(f"unknown family {family!r}")
        self.mesh = mesh
        self.family = family

    def __repr__(self):
        return f"FeSpace({self.family}, n_dofs={self.n_dofs})"

    @property
    def n_dofs(self) -> int:
        return {
            "P1": self.mesh.n_vertices,
            "N0": self.mesh.n_edges,
            "RT0": self.mesh.n_facets,
        }[self.family]

    @cached_property
    def local_dofs(self) -> np.ndarray:
        m = self.mesh
        return {"P1": m.elements, "N0": m.element_to_edge, "RT0": m.element_to_facet}[
            self.family
        ]

    @property
    def derivative_is_vector(self) -> bool:
        """``d_h`` of an N0 field on a 3-d hypersurface is a vector (curl)."""
        return self.family == "N0" and self.mesh.element_dim == 3

    # --------------------------------------------------------------- local basis
    @cached_property
    def _oriented_fields(self) -> np.ndarray:
        """Local fields for the sorted-vertex basis, before flux normalization."""
        m = self.mesh
        g = m.barycentric_gradients
        ne, k, n = m.n_elements, m.element_dim, m.ambient_dim
        if self.family == "N0":
            le = LOCAL_EDGES[k]
            W = np.zeros((ne, len(le), k + 1, n))
            for loc, (i, j) in enumerate(le):
                W[:, loc, i] = g[:, j]
                W[:, loc, j] = -g[:, i]
            return W * m.element_edge_sign[:, :, None, None]
        if self.family == "RT0":
            lf = LOCAL_FACETS[k]
            nu = m.normals
            W = np.zeros((ne, k + 1, k + 1, n))
            for loc, verts in enumerate(lf):
                if k == 2:
                    p, q = verts
                    W[:, loc, p] = generalized_cross(np.stack((g[:, q], nu), axis=1))
                    W[:, loc, q] = -generalized_cross(np.stack((g[:, p], nu), axis=1))
                else:
                    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
                        va, vb, vc = verts[a], verts[b], verts[c]
                        W[:, loc, va] = 2.0 * generalized_cross(
                            np.stack((g[:, vb], g[:, vc], nu), axis=1)
                        )
            parity = _permutation_parity(m.elements[:, lf].reshape(-1, k)).reshape(ne, k + 1)
            return W * parity[:, :, None, None]
        raise UnsupportedFamily("P1 has no vector basis fields")

    @cached_property
    def facet_signs(self) -> np.ndarray:
        """Sign making each RT0 basis function have flux +1 against ``nu_f^+``."""
        m = self.mesh
        W = self._oriented_fields
        e, loc = m.facet_elements[:, 0], m.facet_local[:, 0]
        flux = _facet_flux(m, W[e, loc], loc, m.plus_conormals, e)
        return np.sign(flux).astype(np.int64)

    @cached_property
    def local_fields(self) -> np.ndarray:
        """``(ne, nloc, k+1, n)`` array of the global basis restricted to elements."""
        W = self._oriented_fields
        if self.family == "RT0":
            W = W * self.facet_signs[self.local_dofs][:, :, None, None]
        return W

    @cached_property
    def local_derivatives(self) -> np.ndarray:
        """Element-constant ``d_h`` of every local basis function.

        N0: surface curl (scalar in 2-d, vector in 3-d); RT0: surface
        divergence; P1: tangential gradient.
        """
        m = self.mesh
        g = m.barycentric_gradients
        if self.family == "P1":
            return g
        W = self.local_fields
        if self.family == "RT0":
            return np.einsum("ead,eiad->ei", g, W)
        nu = np.broadcast_to(m.normals[:, None, None, :], W.shape)
        gg = np.broadcast_to(g[:, None, :, :], W.shape)
        if m.element_dim == 2:
            # curl v = div(v x nu) = sum_a g_a . (w_a x nu)
            return np.einsum("eiad,eiad->ei", gg, np.cross(W, nu))
        wedge = generalized_cross(np.stack((gg, W, nu), axis=-2))
        return wedge.sum(axis=2)

    def evaluate(self, coeffs, elements, bary) -> np.ndarray:
        """Field values at points given by element index and barycentrics."""
        coeffs = np.asarray(coeffs, dtype=float)
        elements = np.asarray(elements)
        c = coeffs[self.local_dofs[elements]]  # (m, nloc)
        if self.family == "P1":
            return np.einsum("mi,mi->m", c, bary)
        W = self.local_fields[elements]  # (m, nloc, k+1, n)
        return np.einsum("mi,ma,miad->md", c, bary, W)

    def evaluate_at_barycenters(self, coeffs) -> np.ndarray:
        k = self.mesh.element_dim
        ne = self.mesh.n_elements
        bary = np.full((ne, k + 1), 1.0 / (k + 1))
        return self.evaluate(coeffs, np.arange(ne), bary)


def _facet_flux(mesh, Wf, local_facet, conormal, elements) -> np.ndarray:
    """Flux of ``sum lambda_a Wf[a]`` through a local facet against ``conormal``.

    On the facet opposite vertex ``l`` the barycentric ``lambda_l`` vanishes
    and every other one integrates to ``|f| / k``.
    """
    k = mesh.element_dim
    facets = mesh.element_to_facet[elements, local_facet]
    area = mesh.facet_measures[facets]
    total = Wf.sum(axis=-2) - np.take_along_axis(
        Wf, local_facet[(slice(None),) + (None,) * (Wf.ndim - 1)], axis=-2
    ).squeeze(-2)
    return area / k * np.einsum("...d,...d->...", total, conormal)


# ----------------------------------------------------------------------- assembly
@dataclass
class AssembledOperator:
    """``stiffness + c * mass`` for one space, with the parts kept."""

    matrix: sp.csr_matrix
    space: FeSpace
    c: float
    stiffness: sp.csr_matrix | None = None
    mass: sp.csr_matrix | None = None

    @property
    def shape(self):
        return self.matrix.shape


def _scatter(local: np.ndarray, dofs: np.ndarray, n: int) -> sp.csr_matrix:
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return mat


def p1_mass(mesh: SurfaceMesh) -> sp.csr_matrix:
    return _scatter(lambda_mass(mesh), mesh.elements, mesh.n_vertices)


def p1_stiffness(mesh: SurfaceMesh) -> sp.csr_matrix:
    g = mesh.barycentric_gradients
    local = mesh.volumes[:, None, None] * np.einsum("ead,ebd->eab", g, g)
    return _scatter(local, mesh.elements, mesh.n_vertices)


def assemble_p1(mesh: SurfaceMesh, c: float = 0.0) -> AssembledOperator:
    """Scalar ``(grad_h u, grad_h v) + c (u, v)`` with exact integration."""
    if c < 0:
        raise ValueError("c must be non-negative")
    K, M = p1_stiffness(mesh), p1_mass(mesh)
    return AssembledOperator((K + c * M).tocsr(), FeSpace(mesh, "P1"), c, K, M)


def whitney_mass(space: FeSpace) -> sp.csr_matrix:
    W = space.local_fields
    local = np.einsum("eiad,eab,ejbd->eij", W, lambda_mass(space.mesh), W)
    return _scatter(local, space.local_dofs, space.n_dofs)


def whitney_stiffness(space: FeSpace) -> sp.csr_matrix:
    d = space.local_derivatives
    vol = space.mesh.volumes[:, None, None]
    if d.ndim == 3:
        local = vol * np.einsum("eid,ejd->eij", d, d)
    else:
        local = vol * d[:, :, None] * d[:, None, :]
    return _scatter(local, space.local_dofs, space.n_dofs)


def assemble_whitney(mesh: SurfaceMesh, family: str, c: float = 0.0) -> AssembledOperator:
    """``(d_h u, d_h v) + c (u, v)`` for ``family`` in ``{"N0", "RT0"}``."""
    if family not in ("N0", "RT0"):
        raise UnsupportedFamily(f"assemble_whitney handles N0/RT0, not {family!r}")
    if c < 0:
        raise ValueError("c must be non-negative")
    space = FeSpace(mesh, family)
    K, M = whitney_stiffness(space), whitney_mass(space)
    return AssembledOperator((K + c * M).tocsr(), space, c, K, M)


def assemble(mesh: SurfaceMesh, family: str, c: float = 0.0) -> AssembledOperator:
    return assemble_p1(mesh, c) if family == "P1" else assemble_whitney(mesh, family, c)


# --------------------------------------------------------------------- incidences
def _round_incidence(vals: np.ndarray) -> np.ndarray:
    rounded = np.rint(vals)
    if np.max(np.abs(vals - rounded), initial=0.0) > 1e-6:
        raise ValueError("incidence entries are not integers; inconsistent orientation?")
    return rounded


def incidence_dminus(mesh: SurfaceMesh, target_family: str) -> sp.csr_matrix:
    """Coefficient matrix of ``d^-_h`` into ``target_family``.

    ``"N0"``: P1 -> N0 (surface gradient).  ``"RT0"`` on triangle meshes:
    P1 -> RT0 (rotated gradient ``grad_h v x nu_h``); on tetrahedral meshes:
    N0 -> RT0 (surface curl).
    """
    if target_family == "N0":
        ne = mesh.n_edges
        rows = np.repeat(np.arange(ne), 2)
        cols = mesh.edges.ravel()
        vals = np.tile([-1.0, 1.0], ne)
        return sp.csr_matrix((vals, (rows, cols)), shape=(ne, mesh.n_vertices))
    if target_family != "RT0":
        raise IncompatibleFamilies(f"no d^- incidence into {target_family!r}")

    e, loc = mesh.facet_elements[:, 0], mesh.facet_local[:, 0]
    nu_f = mesh.plus_conormals
    area = mesh.facet_measures
    nf = mesh.n_facets
    if mesh.element_dim == 2:
        g = mesh.barycentric_gradients[e]  # (nf, 3, 3)
        rot = np.cross(g, mesh.normals[e][:, None, :])
        vals = area[:, None] * np.einsum("fad,fd->fa", rot, nu_f)
        cols = mesh.elements[e]
        shape = (nf, mesh.n_vertices)
    else:
        curl = FeSpace(mesh, "N0").local_derivatives[e]  # (nf, 6, 4)
        vals = area[:, None] * np.einsum("fmd,fd->fm", curl, nu_f)
        cols = mesh.element_to_edge[e]
        shape = (nf, mesh.n_edges)
    vals = _round_incidence(vals)
    rows = np.repeat(np.arange(nf), vals.shape[1])
    mat = sp.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=shape)
    mat.eliminate_zeros()
    return mat


def incidence_d(mesh: SurfaceMesh, family: str) -> sp.csr_matrix:
    """Coefficient matrix of ``d_h`` out of ``family``.

    ``"P1"``: the gradient incidence into N0.  ``"N0"``: the curl, into
    element values (P0) on triangle meshes and into RT0 on tetrahedral
    meshes.  ``"RT0"``: the divergence into element values.  Element values
    are integrals, so every entry is an integer.
    """
    if family == "P1":
        return incidence_dminus(mesh, "N0")
    if family == "N0" and mesh.element_dim == 3:
        return incidence_dminus(mesh, "RT0")
    if family not in ("N0", "RT0"):
        raise UnsupportedFamily(f"no d incidence out of {family!r}")
    space = FeSpace(mesh, family)
    vals = _round_incidence(mesh.volumes[:, None] * space.local_derivatives)
    rows = np.repeat(np.arange(mesh.n_elements), vals.shape[1])
    mat = sp.csr_matrix(
        (vals.ravel(), (rows, space.local_dofs.ravel())), shape=(mesh.n_elements, space.n_dofs)
    )
    mat.eliminate_zeros()
    return mat


# ----------------------------------------------------------------------- transfer
def transfer_matrix(mesh: SurfaceMesh, family: str) -> sp.csr_matrix:
    """Interpolation of vector ``P1`` fields into ``family``.

    N0 uses the canonical tangential DOFs.  RT0 uses the modified flux DOFs
    measured against the plus-element conormal of each facet, which are
    well defined for the normally discontinuous restriction of a continuous
    ambient vector field.
    """
    n, nv = mesh.ambient_dim, mesh.n_vertices
    if family == "N0":
        a, b = mesh.edges[:, 0], mesh.edges[:, 1]
        t = mesh.vertices[b] - mesh.vertices[a]
        rows_v = [a, b]
        coef = 0.5 * t
    elif family == "RT0":
        k = mesh.element_dim
        rows_v = [mesh.facets[:, j] for j in range(k)]
        coef = (mesh.facet_measures / k)[:, None] * mesh.plus_conormals
    else:
        raise UnsupportedFamily(f"no P1 transfer into {family!r}")
    nrow = len(coef)
    rows, cols, vals = [], [], []
    for verts in rows_v:
        for comp in range(n):
            rows.append(np.arange(nrow))
            cols.append(comp * nv + verts)
            vals.append(coef[:, comp])
    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nrow, n * nv),
    )
    mat.eliminate_zeros()
    return mat


def unmodified_rt0_transfer(mesh: SurfaceMesh) -> sp.csr_matrix:
    """Canonical RT0 interpolation averaged over both sides of every facet.

    With the outward conormal on each side the two one-sided interpolants
    differ on a curved surface; this averages them and is only used to
    compare against :func:`transfer_matrix` on flat meshes.
    """
    k, n, nv = mesh.element_dim, mesh.ambient_dim, mesh.n_vertices
    fe, fl = mesh.facet_elements, mesh.facet_local
    nu_plus = mesh.plus_conormals
    nu_minus = -mesh.conormals(fe[:, 1], fl[:, 1])
    coef = (mesh.facet_measures / k)[:, None] * 0.5 * (nu_plus + nu_minus)
    rows, cols, vals = [], [], []
    for j in range(k):
        for comp in range(n):
            rows.append(np.arange(mesh.n_facets))
            cols.append(comp * nv + mesh.facets[:, j])
            vals.append(coef[:, comp])
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.n_facets, n * nv),
    )


# ------------------------------------------------------------- loads and errors
def quadrature_points(mesh: SurfaceMesh, degree: int = 2):
    """Physical points, element ids, barycentrics and weights (incl. volume)."""
    bary, w = symmetric_rule(mesh.element_dim, degree)
    z = mesh.vertices[mesh.elements]  # (ne, k+1, n)
    pts = np.einsum("qa,ead->eqd", bary, z)
    ne, nq = mesh.n_elements, len(w)
    elements = np.repeat(np.arange(ne), nq)
    weights = (mesh.volumes[:, None] * w[None, :]).ravel()
    return pts.reshape(ne * nq, -1), elements, np.tile(bary, (ne, 1)), weights


def l2_project_rhs(mesh: SurfaceMesh, family: str, g, degree: int = 2) -> np.ndarray:
    """Load vector ``(g, phi_i)_h``.

    ``g(points, normals)`` receives quadrature points on the mesh and the
    element normal ``nu_h`` at each point; it returns vectors for N0/RT0 and
    scalars for P1.  Only the tangential part of ``g`` contributes.
    """
    space = FeSpace(mesh, family)
    pts, elements, bary, weights = quadrature_points(mesh, degree)
    gv = np.asarray(g(pts, mesh.normals[elements]), dtype=float)
    nq = len(pts) // mesh.n_elements
    if family == "P1":
        local = np.einsum("m,m,ma->ma", weights, gv, bary)
    else:
        W = space.local_fields
        shp = (mesh.n_elements, nq)
        local = np.einsum(
            "eq,eqd,eqa,eiad->eqi",
            weights.reshape(shp),
            gv.reshape(shp + (-1,)),
            bary.reshape(shp + (-1,)),
            W,
        ).reshape(len(pts), -1)
    dofs = np.repeat(space.local_dofs, nq, axis=0)
    return np.bincount(dofs.ravel(), weights=local.ravel(), minlength=space.n_dofs)


def l2_error(space: FeSpace, coeffs, exact, degree: int = 2, tangential: bool = True) -> float:
    """``||u_h - P_h u||`` on the mesh, ``P_h`` the projection onto the element plane.

    ``exact(points, normals)`` returns the ambient vector to compare with;
    its normal component w.r.t. ``nu_h`` is removed before comparing unless
    ``tangential`` is false.
    """
    mesh = space.mesh
    pts, elements, bary, weights = quadrature_points(mesh, degree)
    uh = space.evaluate(coeffs, elements, bary)
    nu = mesh.normals[elements]
    u = np.asarray(exact(pts, nu), dtype=float)
    if tangential:
        u = u - np.einsum("md,md->m", u, nu)[:, None] * nu
    return float(np.sqrt(np.sum(weights * np.sum((uh - u) ** 2, axis=1))))


# ------------------------------------------------------------ DOF functionals
def edge_dofs(mesh: SurfaceMesh, field, degree: int = 5, element=None) -> np.ndarray:
    """Tangential edge integrals ``int_e v . t_e ds`` of a piecewise field.

    ``field(elements, bary)`` evaluates the field on the given elements;
    ``element`` selects the element used for each edge (default: lowest).
    """
    elem = mesh.edge_element if element is None else np.asarray(element)
    k = mesh.element_dim
    verts = mesh.elements[elem]
    ia = np.argmax(verts == mesh.edges[:, :1], axis=1)
    ib = np.argmax(verts == mesh.edges[:, 1:], axis=1)
    t, w = np.polynomial.legendre.leggauss(max(1, (degree + 2) // 2))
    s, w = 0.5 * (t + 1.0), 0.5 * w
    tvec = mesh.vertices[mesh.edges[:, 1]] - mesh.vertices[mesh.edges[:, 0]]
    total = np.zeros(mesh.n_edges)
    rows = np.arange(mesh.n_edges)
    for sq, wq in zip(s, w):
        bary = np.zeros((mesh.n_edges, k + 1))
        bary[rows, ia] = 1.0 - sq
        bary[rows, ib] = sq
        total += wq * np.einsum("md,md->m", field(elem, bary), tvec)
    return total


def facet_flux_dofs(mesh: SurfaceMesh, field, degree: int = 5, side: int = 0) -> np.ndarray:
    """Fluxes ``int_f v . nu_f^+ ds`` evaluated from the ``side`` element."""
    k = mesh.element_dim
    elem = mesh.facet_elements[:, side]
    loc = mesh.facet_local[:, side]
    fb, fw = symmetric_rule(k - 1, degree)
    nf = mesh.n_facets
    total = np.zeros(nf)
    local_facets = LOCAL_FACETS[k][loc]  # (nf, k) local vertex ids on the facet
    rows = np.arange(nf)
    for bq, wq in zip(fb, fw):
        bary = np.zeros((nf, k + 1))
        for j in range(k):
            bary[rows, local_facets[:, j]] = bq[j]
        total += wq * np.einsum("md,md->m", field(elem, bary), mesh.plus_conormals)
    return mesh.facet_measures * total


def dof_functionals(space: FeSpace, field, degree: int = 5, side: int = 0) -> np.ndarray:
    if space.family == "N0":
        return edge_dofs(space.mesh, field, degree)
    if space.family == "RT0":
        return facet_flux_dofs(space.mesh, field, degree, side)
    raise UnsupportedFamily("DOF functionals are defined for N0/RT0")


def element_gradients(mesh: SurfaceMesh, element: int) -> list[np.ndarray]:
    """Tangential gradients of the barycentric coordinates on one element."""
    return list(mesh.barycentric_gradients[element])


def export_matrix(op: AssembledOperator | sp.spmatrix, path) -> None:
    """MatrixMarket coordinate export of an assembled matrix."""
    from .sparsela import write_matrix_market

    mat = op.matrix if isinstance(op, AssembledOperator) else op
    write_matrix_market(path, mat)
