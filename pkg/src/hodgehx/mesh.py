"""Simplicial surface meshes: triangles in R^3 and tetrahedra in R^4.

Topology conventions
--------------------
* Global edges (and faces of tetrahedral meshes) are stored as sorted vertex
  tuples; an edge is oriented from its lower to its higher vertex index.
* Local edges of an element are ``itertools.combinations(range(k + 1), 2)``
  and local faces ``combinations(range(k + 1), 3)``.
* Facets are the codimension-1 sub-simplices (edges for triangle meshes,
  faces for tetrahedral meshes).  Local facet ``i`` is opposite local vertex
  ``i``.  For every facet the incident element with the lower index is the
  designated "plus" element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import DegenerateElement, InvalidResolution, MeshFormatError
from .geometry import ImplicitSurface, Torus

LOCAL_EDGES = {k: np.array(list(combinations(range(k + 1), 2))) for k in (2, 3)}
LOCAL_FACES = {3: np.array(list(combinations(range(4), 3)))}
# local facet i is opposite local vertex i
LOCAL_FACETS = {
    2: np.array([[1, 2], [0, 2], [0, 1]]),
    3: np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]]),
}


def generalized_cross(rows: np.ndarray) -> np.ndarray:
    """Vector ``c`` with ``c . x = det([x; rows])`` for every ``x``.

    ``rows`` has shape ``(..., n-1, n)``.  For ``n = 3`` this is the usual
    cross product of the two rows; for ``n = 4`` it is the 4-d wedge used for
    normals and curls of tetrahedral hypersurface meshes.
    """
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[-1]
    if rows.shape[-2] != n - 1:
        raise ValueError("generalized_cross needs n-1 rows of length n")
    if n == 3:
        return np.cross(rows[..., 0, :], rows[..., 1, :])
    out = np.empty(rows.shape[:-2] + (n,))
    for i in range(n):
        cols = [j for j in range(n) if j != i]
        out[..., i] = (-1) ** i * np.linalg.det(rows[..., :, cols])
    return out


def _unique_simplices(cells: np.ndarray, nv: int):
    """Sorted unique rows of ``cells`` plus the inverse map (int64 keys)."""
    srt = np.sort(cells, axis=1).astype(np.int64)
    key = srt[:, 0]
    for j in range(1, srt.shape[1]):
        key = key * nv + srt[:, j]
    uniq, first, inverse = np.unique(key, return_index=True, return_inverse=True)
    return srt[first], inverse


class SurfaceMesh:
    """Immutable simplicial mesh of a closed hypersurface.

    Parameters
    ----------
    vertices : (nv, ambient_dim) array
    elements : (ne, element_dim + 1) integer array
    reference : (nv, ambient_dim) array, optional
        Vertex positions on the initial polyhedral mesh.  Refinement bisects
        these and maps the new points onto the surface, so that every level
        is the closest-point image of a uniform refinement of the initial
        polyhedron.
    """

    def __init__(self, vertices, elements, reference=None):
        vertices = np.array(vertices, dtype=float)
        elements = np.array(elements, dtype=np.int64)
        if vertices.ndim != 2 or elements.ndim != 2:
            raise MeshFormatError("vertices and elements must be 2-d arrays")
        self.ambient_dim = vertices.shape[1]
        self.element_dim = elements.shape[1] - 1
        if (self.ambient_dim, self.element_dim) not in ((3, 2), (4, 3)):
            raise MeshFormatError(
                f"unsupported mesh: {self.element_dim}-simplices in R^{self.ambient_dim}"
            )
        if elements.size and (elements.min() < 0 or elements.max() >= len(vertices)):
            raise MeshFormatError("element references a missing vertex")
        self.vertices = vertices
        self.elements = elements
        self.reference = vertices.copy() if reference is None else np.array(reference, dtype=float)
        for arr in (self.vertices, self.elements, self.reference):
            arr.setflags(write=False)
        self._build_topology()

    # ------------------------------------------------------------------ topology
    def _build_topology(self):
        k = self.element_dim
        nv, ne = self.n_vertices, self.n_elements
        le = LOCAL_EDGES[k]
        cells = self.elements[:, le].reshape(-1, 2)
        self.edges, inv = _unique_simplices(cells, nv)
        self.element_to_edge = inv.reshape(ne, len(le))
        self.element_edge_sign = np.where(
            self.elements[:, le[:, 0]] < self.elements[:, le[:, 1]], 1, -1
        )
        if k == 3:
            lf = LOCAL_FACES[3]
            self.faces, finv = _unique_simplices(self.elements[:, lf].reshape(-1, 3), nv)
            self.element_to_face = finv.reshape(ne, len(lf))
        else:
            self.faces = None
            self.element_to_face = None

        # facets, with local facet i opposite local vertex i
        facet_cells = self.elements[:, LOCAL_FACETS[k]].reshape(-1, k)
        facets, finv = _unique_simplices(facet_cells, nv)
        if k == 2:
            assert np.array_equal(facets, self.edges)
        else:
            assert np.array_equal(facets, self.faces)
        self.element_to_facet = finv.reshape(ne, k + 1)
        order = np.argsort(finv, kind="stable")  # groups by facet, element ascending
        counts = np.bincount(finv, minlength=len(facets))
        self.facet_valence = counts
        facet_elements = np.full((len(facets), 2), -1, dtype=np.int64)
        facet_local = np.full((len(facets), 2), -1, dtype=np.int64)
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        for slot in (0, 1):
            has = counts > slot
            idx = order[starts[has] + slot]
            facet_elements[has, slot] = idx // (k + 1)
            facet_local[has, slot] = idx % (k + 1)
        self.facet_elements = facet_elements
        self.facet_local = facet_local
        self.face_plus_element = facet_elements[:, 0]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def facets(self) -> np.ndarray:
        return self.edges if self.element_dim == 2 else self.faces

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    @property
    def is_closed(self) -> bool:
        return bool(np.all(self.facet_valence == 2))

    def euler_characteristic(self) -> int:
        if self.element_dim == 2:
            return self.n_vertices - self.n_edges + self.n_elements
        return self.n_vertices - self.n_edges + len(self.faces) - self.n_elements

    def betti1(self) -> int:
        """First Betti number of a closed orientable mesh.

        Triangle meshes use ``2 - chi``; for tetrahedral hypersurfaces the
        Euler characteristic carries no information and the count is
        computed from the rank of the edge-vertex incidence and curl
        incidence matrices instead.
        """
        if self.element_dim == 2:
            return 2 - self.euler_characteristic()
        from scipy.sparse.csgraph import connected_components

        from .fespace import incidence_dminus

        # b1 = dim ker(curl) - dim im(grad)
        grad = incidence_dminus(self, "N0")
        ncomp = connected_components(abs(grad.T @ grad), directed=False)[0]
        curl = incidence_dminus(self, "RT0").toarray()
        rank_curl = np.linalg.matrix_rank(curl) if curl.size else 0
        return int(self.n_edges - (self.n_vertices - ncomp) - rank_curl)

    # ------------------------------------------------------------------ geometry
    @cached_property
    def edge_vectors(self) -> np.ndarray:
        """``(ne, k, n)`` rows ``z_i - z_0`` of each element."""
        z = self.vertices[self.elements]
        return z[:, 1:, :] - z[:, :1, :]

    @cached_property
    def volumes(self) -> np.ndarray:
        """Element measures (area of triangles, volume of tetrahedra)."""
        e = self.edge_vectors
        gram = np.einsum("eid,ejd->eij", e, e)
        det = np.linalg.det(gram)
        return np.sqrt(np.maximum(det, 0.0)) / math.factorial(self.element_dim)

    @cached_property
    def diameters(self) -> np.ndarray:
        z = self.vertices[self.elements]
        le = LOCAL_EDGES[self.element_dim]
        lengths = np.linalg.norm(z[:, le[:, 1]] - z[:, le[:, 0]], axis=2)
        return lengths.max(axis=1)

    @cached_property
    def normals(self) -> np.ndarray:
        """Unit element normals from the vertex ordering (``nu_h``)."""
        n = generalized_cross(self.edge_vectors)
        norm = np.linalg.norm(n, axis=1)
        return n / np.where(norm > 0, norm, 1.0)[:, None]

    @cached_property
    def barycentric_gradients(self) -> np.ndarray:
        """``(ne, k+1, n)`` tangential gradients of the barycentric coordinates.

        Raises
        ------
        DegenerateElement
            If an element measure is below ``1e-14 h^k``.
        """
        k = self.element_dim
        bad = self.volumes < 1e-14 * self.diameters**k
        if np.any(bad):
            raise DegenerateElement(f"degenerate elements: {np.flatnonzero(bad)[:10].tolist()}")
        e = self.edge_vectors
        gram = np.einsum("eid,ejd->eij", e, e)
        # columns of the pseudo-inverse E^T (E E^T)^-1 are grad lambda_1..k
        g = np.einsum("eid,eij->ejd", e, np.linalg.inv(gram))
        return np.concatenate((-g.sum(axis=1, keepdims=True), g), axis=1)

    @cached_property
    def facet_measures(self) -> np.ndarray:
        z = self.vertices[self.facets]
        e = z[:, 1:, :] - z[:, :1, :]
        gram = np.einsum("fid,fjd->fij", e, e)
        return np.sqrt(np.maximum(np.linalg.det(gram), 0.0)) / math.factorial(
            self.element_dim - 1
        )

    def conormals(self, element, local_facet) -> np.ndarray:
        """Outward unit conormal of ``local_facet`` of ``element`` (vectorized)."""
        g = self.barycentric_gradients[element, local_facet]
        return -g / np.linalg.norm(g, axis=-1, keepdims=True)

    @cached_property
    def plus_conormals(self) -> np.ndarray:
        """Pre-assigned facet conormal ``nu_f^{tau_f^+}`` for every facet."""
        return self.conormals(self.facet_elements[:, 0], self.facet_local[:, 0])

    @cached_property
    def edge_element(self) -> np.ndarray:
        """One incident element per edge (the lowest-index one)."""
        ne, nle = self.element_to_edge.shape
        out = np.full(self.n_edges, ne, dtype=np.int64)
        np.minimum.at(out, self.element_to_edge.ravel(), np.repeat(np.arange(ne), nle))
        return out

    def barycenters(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)

    # ------------------------------------------------------------------ helpers
    def oriented(self, surface: ImplicitSurface) -> "SurfaceMesh":
        """Copy whose element normals point outward from ``surface``."""
        nu = surface.normal(self.barycenters())
        flip = np.einsum("ed,ed->e", self.normals, nu) < 0
        if not np.any(flip):
            return self
        elements = self.elements.copy()
        elements[flip, -2], elements[flip, -1] = (
            self.elements[flip, -1],
            self.elements[flip, -2],
        )
        return SurfaceMesh(self.vertices, elements, self.reference)

    def __repr__(self):
        return (
            f"SurfaceMesh(element_dim={self.element_dim}, ambient_dim={self.ambient_dim}, "
            f"nv={self.n_vertices}, ne={self.n_elements})"
        )


# ---------------------------------------------------------------------- builders
def build_torus_initial(n_major: int = 12, n_minor: int = 8, surface: Torus | None = None) -> SurfaceMesh:
    """Structured triangulation of the torus, every quad split in two.

    The default 12 x 8 grid has 96 vertices, 288 edges and 192 triangles.
    """
    if n_major < 3 or n_minor < 3:
        raise InvalidResolution(f"need n_major, n_minor >= 3, got {n_major}, {n_minor}")
    surface = surface or Torus()
    i, j = np.meshgrid(np.arange(n_major), np.arange(n_minor), indexing="ij")
    pts = surface.parametrize(2 * np.pi * i / n_major, 2 * np.pi * j / n_minor).reshape(-1, 3)

    def vid(a, b):
        return (a % n_major) * n_minor + (b % n_minor)

    a, b = i.ravel(), j.ravel()
    v00, v10, v01, v11 = vid(a, b), vid(a + 1, b), vid(a, b + 1), vid(a + 1, b + 1)
    tris = np.concatenate([np.column_stack((v00, v10, v11)), np.column_stack((v00, v11, v01))])
    return SurfaceMesh(pts, tris).oriented(surface)


S3_SIMPLICES = [
    (1, 2, 5, 7), (3, 5, 2, 7), (3, 4, 5, 7), (1, 5, 4, 7),
    (1, 6, 2, 7), (3, 2, 6, 7), (3, 6, 4, 7), (1, 4, 6, 7),
    (8, 1, 2, 5), (8, 3, 5, 2), (8, 3, 4, 5), (8, 1, 5, 4),
    (8, 1, 6, 2), (8, 3, 2, 6), (8, 3, 6, 4), (8, 1, 4, 6),
]


def build_s3_initial(surface: ImplicitSurface | None = None) -> SurfaceMesh:
    """The 16-tetrahedron cross-polytope surface with vertices ``+-e_i``."""
    from .geometry import Sphere3

    p = np.array(
        [
            [1, 0, 0, 0], [0, 1, 0, 0], [-1, 0, 0, 0], [0, -1, 0, 0],
            [0, 0, 1, 0], [0, 0, -1, 0], [0, 0, 0, 1], [0, 0, 0, -1],
        ],
        dtype=float,
    )
    tets = np.array(S3_SIMPLICES) - 1
    return SurfaceMesh(p, tets).oriented(surface or Sphere3())


def build_octahedron() -> SurfaceMesh:
    """Octahedron surface in R^3 (sphere topology, first Betti number 0)."""
    from .geometry import Sphere

    p = np.array(
        [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float
    )
    tris = [
        (0, 2, 4), (2, 1, 4), (1, 3, 4), (3, 0, 4),
        (2, 0, 5), (1, 2, 5), (3, 1, 5), (0, 3, 5),
    ]
    return SurfaceMesh(p, tris).oriented(Sphere(1.0, dim=3))


# -------------------------------------------------------------------- refinement
def _midpoints(mesh: SurfaceMesh, surface: ImplicitSurface):
    """Vertex arrays extended by one projected midpoint per edge."""
    ref = mesh.reference
    mid_ref = 0.5 * (ref[mesh.edges[:, 0]] + ref[mesh.edges[:, 1]])
    new_ref = np.vstack((ref, mid_ref))
    new_pts = np.vstack((mesh.vertices, surface.project(mid_ref)))
    return new_pts, new_ref


def refine_quad(mesh: SurfaceMesh, surface: ImplicitSurface) -> SurfaceMesh:
    """Split every triangle into four through its edge midpoints."""
    if mesh.element_dim != 2:
        raise ValueError("refine_quad needs a triangle mesh")
    pts, ref = _midpoints(mesh, surface)
    nv = mesh.n_vertices
    v = mesh.elements
    m = nv + mesh.element_to_edge  # local edges (0,1), (0,2), (1,2)
    m01, m02, m12 = m[:, 0], m[:, 1], m[:, 2]
    tris = np.concatenate(
        [
            np.column_stack((v[:, 0], m01, m02)),
            np.column_stack((m01, v[:, 1], m12)),
            np.column_stack((m02, m12, v[:, 2])),
            np.column_stack((m01, m12, m02)),
        ]
    )
    return SurfaceMesh(pts, tris, ref).oriented(surface)


def refine_red(mesh: SurfaceMesh, surface: ImplicitSurface) -> SurfaceMesh:
    """Uniform red refinement of tetrahedra into eight children.

    The interior octahedron is cut along its shortest diagonal (measured on
    the reference positions); ties go to the diagonal with the lowest vertex
    index.
    """
    if mesh.element_dim != 3:
        raise ValueError("refine_red needs a tetrahedral mesh")
    pts, ref = _midpoints(mesh, surface)
    nv = mesh.n_vertices
    v = mesh.elements
    m = nv + mesh.element_to_edge  # local edges 01 02 03 12 13 23
    m01, m02, m03, m12, m13, m23 = (m[:, i] for i in range(6))
    corners = [
        np.column_stack((v[:, 0], m01, m02, m03)),
        np.column_stack((m01, v[:, 1], m12, m13)),
        np.column_stack((m02, m12, v[:, 2], m23)),
        np.column_stack((m03, m13, m23, v[:, 3])),
    ]
    # the three diagonals and, for each, the equatorial cycle around it
    diagonals = [
        ((m01, m23), (m02, m03, m13, m12)),
        ((m02, m13), (m01, m03, m23, m12)),
        ((m03, m12), (m01, m02, m23, m13)),
    ]
    lengths = np.column_stack(
        [np.linalg.norm(ref[a] - ref[b], axis=1) for (a, b), _ in diagonals]
    )
    lowest = np.column_stack([np.minimum(a, b) for (a, b), _ in diagonals])
    # shortest first, then lowest vertex index
    rel = np.round(lengths / lengths.max(axis=1, keepdims=True), 12)
    shortest = rel == rel.min(axis=1, keepdims=True)
    choice = np.argmin(np.where(shortest, lowest, np.iinfo(np.int64).max), axis=1)
    inner = []
    for d, ((a, b), cyc) in enumerate(diagonals):
        sel = choice == d
        for s in range(4):
            c0, c1 = cyc[s][sel], cyc[(s + 1) % 4][sel]
            inner.append(np.column_stack((a[sel], b[sel], c0, c1)))
    tets = np.concatenate(corners + inner)
    return SurfaceMesh(pts, tets, ref).oriented(surface)


def refine(mesh: SurfaceMesh, surface: ImplicitSurface) -> SurfaceMesh:
    return refine_quad(mesh, surface) if mesh.element_dim == 2 else refine_red(mesh, surface)


def initial_mesh(surface_name: str) -> tuple[SurfaceMesh, ImplicitSurface]:
    from .geometry import make_surface

    surface = make_surface(surface_name)
    if surface_name == "torus":
        return build_torus_initial(12, 8, surface), surface
    if surface_name in ("s3", "sphere3"):
        return build_s3_initial(surface), surface
    if surface_name in ("s2", "sphere2"):
        return build_octahedron(), surface
    raise ValueError(f"unknown surface {surface_name!r}")


def mesh_hierarchy(surface_name: str, levels: int):
    """Yield ``(level, mesh)`` for ``levels`` uniformly refined meshes."""
    mesh, surface = initial_mesh(surface_name)
    for level in range(levels):
        if level:
            mesh = refine(mesh, surface)
        yield level, mesh


# ----------------------------------------------------------------------- quality
@dataclass(frozen=True)
class MeshQualityReport:
    h_max: float
    h_min: float
    c_qu: float
    normal_error: float
    conormal_jump: float


def quality(mesh: SurfaceMesh, surface: ImplicitSurface | None = None) -> MeshQualityReport:
    """Diagnostics for the usual surface-FEM mesh assumptions.

    ``normal_error`` is ``max |nu - nu_h|`` at element barycentres (zero when
    no surface is given and the mesh is flat); ``conormal_jump`` is
    ``max |nu_f^+ + nu_f^-| / h_f`` over interior facets.
    """
    h = mesh.diameters
    if surface is not None:
        nu = surface.normal(mesh.barycenters())
        normal_error = float(np.linalg.norm(nu - mesh.normals, axis=1).max())
    else:
        n = mesh.normals
        normal_error = float(np.linalg.norm(n - n[0], axis=1).max())
    inner = mesh.facet_elements[:, 1] >= 0
    if np.any(inner):
        fe, fl = mesh.facet_elements[inner], mesh.facet_local[inner]
        jump = mesh.conormals(fe[:, 0], fl[:, 0]) + mesh.conormals(fe[:, 1], fl[:, 1])
        z = mesh.vertices[mesh.facets[inner]]
        hf = np.max(
            [np.linalg.norm(z[:, i] - z[:, j], axis=1) for i, j in combinations(range(z.shape[1]), 2)],
            axis=0,
        )
        conormal_jump = float((np.linalg.norm(jump, axis=1) / hf).max())
    else:
        conormal_jump = 0.0
    return MeshQualityReport(
        h_max=float(h.max()),
        h_min=float(h.min()),
        c_qu=float(h.max() / h.min()),
        normal_error=normal_error,
        conormal_jump=conormal_jump,
    )


# --------------------------------------------------------------------------- I/O
def write_mesh(mesh: SurfaceMesh, path) -> None:
    """ASCII mesh: header, coordinates (17 significant digits), connectivity."""
    path = Path(path)
    lines = [f"{mesh.ambient_dim} {mesh.element_dim} {mesh.n_vertices} {mesh.n_elements}"]
    lines += [" ".join(f"{c:.17g}" for c in row) for row in mesh.vertices]
    lines += [" ".join(str(int(i)) for i in row) for row in mesh.elements]
    path.write_text("\n".join(lines) + "\n")


def read_mesh(path) -> SurfaceMesh:
    text = Path(path).read_text().split("\n")
    try:
        ambient, kdim, nv, ne = (int(t) for t in text[0].split())
        verts = np.array([[float(t) for t in text[1 + i].split()] for i in range(nv)])
        elems = np.array([[int(t) for t in text[1 + nv + i].split()] for i in range(ne)])
    except (ValueError, IndexError) as exc:
        raise MeshFormatError(f"malformed mesh file {path}: {exc}") from exc
    verts = verts.reshape(nv, ambient)
    elems = elems.reshape(ne, kdim + 1)
    return SurfaceMesh(verts, elems)


def write_vtk(mesh: SurfaceMesh, path, cell_vectors: dict | None = None, title="hodgehx") -> None:
    """Legacy-VTK unstructured grid of a triangle mesh with cell vector data."""
    if mesh.element_dim != 2:
        raise ValueError("VTK export supports triangle meshes only")
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    out.append(f"POINTS {mesh.n_vertices} double")
    out += [" ".join(f"{c:.17g}" for c in row) for row in mesh.vertices]
    out.append(f"CELLS {mesh.n_elements} {4 * mesh.n_elements}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.elements]
    out.append(f"CELL_TYPES {mesh.n_elements}")
    out += ["5"] * mesh.n_elements
    if cell_vectors:
        out.append(f"CELL_DATA {mesh.n_elements}")
        for name, data in cell_vectors.items():
            data = np.asarray(data, dtype=float)
            if data.shape != (mesh.n_elements, 3):
                raise ValueError(f"field {name!r} must have shape ({mesh.n_elements}, 3)")
            out.append(f"VECTORS {name} double")
            out += [" ".join(f"{c:.17g}" for c in row) for row in data]
    Path(path).write_text("\n".join(out) + "\n")
