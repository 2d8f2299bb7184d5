"""Shared test utilities built on the public package API."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import aslinearoperator

from hodgehx import fespace as fs
from hodgehx.mesh import mesh_hierarchy


def hierarchy(name, levels):
    return [m for _, m in mesh_hierarchy(name, levels)]


def identity(n):
    return aslinearoperator(sp.identity(n, format="csr"))


def random_smooth_scalar(rng, dim):
    """``p(x) = sin(a . x + b) + q x . x`` with random coefficients."""
    a = rng.normal(size=dim)
    b = rng.uniform(0, 2 * np.pi)
    q = rng.normal()
    return lambda x: np.sin(x @ a + b) + q * np.sum(x * x, axis=-1)


def random_smooth_vector(rng, dim):
    comps = [random_smooth_scalar(rng, dim) for _ in range(dim)]
    return lambda x: np.stack([f(x) for f in comps], axis=-1)


def commuting_defects(mesh, p) -> dict:
    """Max deviation of ``incidence . sample = DOF . d^-`` for one smooth field.

    ``p`` is sampled at the vertices; ``d^-`` of its P1 interpolant is the
    element-constant gradient (N0) or rotated gradient (RT0 on triangles).
    On tetrahedral meshes the curl incidence is checked on the N0
    interpolant of the vector field ``grad p`` evaluated at the vertices'
    edge midpoints by quadrature.
    """
    pv = p(mesh.vertices)
    g = np.einsum("ead,ea->ed", mesh.barycentric_gradients, pv[mesh.elements])
    out = {}
    G = fs.incidence_dminus(mesh, "N0")
    dofs = fs.edge_dofs(mesh, lambda e, b: g[e])
    out["grad"] = np.max(np.abs(G @ pv - dofs)) / max(1.0, np.max(np.abs(dofs)))
    if mesh.element_dim == 2:
        rot = np.cross(g, mesh.normals)
        C = fs.incidence_dminus(mesh, "RT0")
        flux = fs.facet_flux_dofs(mesh, lambda e, b: rot[e])
        out["rot"] = np.max(np.abs(C @ pv - flux)) / max(1.0, np.max(np.abs(flux)))
    else:
        # an N0 field with coefficients u: curl incidence versus curl fluxes
        u = np.sin(3.0 * pv[mesh.edges[:, 0]]) + pv[mesh.edges[:, 1]]
        space = fs.FeSpace(mesh, "N0")
        curl = np.einsum("ei,eid->ed", u[space.local_dofs], space.local_derivatives)
        C = fs.incidence_dminus(mesh, "RT0")
        flux = fs.facet_flux_dofs(mesh, lambda e, b: curl[e])
        out["curl"] = np.max(np.abs(C @ u - flux)) / max(1.0, np.max(np.abs(flux)))
    return out
