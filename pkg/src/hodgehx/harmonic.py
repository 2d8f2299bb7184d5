"""Discrete harmonic tangential fields from the mixed Hodge Laplacian.

The mixed system for ``(sigma, u)`` in ``P1 x W`` (``W`` = N0, or RT0 on
triangle meshes) has the symmetric block matrix

    Atilde = [[M0, (M1 G)^T], [M1 G, -K]]

whose kernel is ``{(0, z)}`` with ``z`` harmonic: ``K z = 0`` and
``G^T M1 z = 0``.  Kernel vectors are extracted as ``B (b - A x_k)`` from
preconditioned singular MINRES runs with random right-hand sides and then
orthonormalized in the ``M1 + K`` inner product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import IncompatibleFamilies, RankDeficientSampling
from .fespace import FeSpace, assemble_p1, assemble_whitney, incidence_dminus
from .krylov import DEFAULT_SEED, SolveReport, minres_singular, random_rhs
from .mesh import SurfaceMesh
from .precond import BlockHodgePreconditioner


@dataclass
class HodgeSaddleSystem:
    mesh: SurfaceMesh
    family: str
    M0: sp.csr_matrix
    M1: sp.csr_matrix
    Ginc: sp.csr_matrix
    K: sp.csr_matrix
    matrix: sp.csr_matrix

    @property
    def n_potential(self) -> int:
        return self.M0.shape[0]

    @property
    def n_field(self) -> int:
        return self.M1.shape[0]

    def split(self, w):
        w = np.asarray(w)
        return w[: self.n_potential], w[self.n_potential :]


def assemble_hodge_saddle(mesh: SurfaceMesh, family: str = "N0") -> HodgeSaddleSystem:
    """Block system with potential space P1 and field space ``family``.

    Raises
    ------
    IncompatibleFamilies
        For RT0 on tetrahedral meshes, whose potential space is not P1.
    """
    if family not in ("N0", "RT0") or (family == "RT0" and mesh.element_dim != 2):
        raise IncompatibleFamilies(f"no P1 potential space for {family!r} on this mesh")
    M0 = assemble_p1(mesh, 0.0).mass
    op = assemble_whitney(mesh, family, 0.0)
    M1, K = op.mass, op.stiffness
    G = incidence_dminus(mesh, family)
    MG = (M1 @ G).tocsr()
    A = sp.bmat([[M0, MG.T], [MG, -K]], format="csr")
    return HodgeSaddleSystem(mesh, family, M0, M1, G, K, A)


@dataclass
class HarmonicBasis:
    fields: list[np.ndarray]
    gram_norm: sp.csr_matrix
    reports: list[SolveReport] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    kernel_vectors: list[np.ndarray] = field(default_factory=list)

    def __len__(self):
        return len(self.fields)

    def gram(self) -> np.ndarray:
        if not self.fields:
            return np.zeros((0, 0))
        Z = np.column_stack(self.fields)
        return Z.T @ (self.gram_norm @ Z)


def compute_harmonic_basis(
    system: HodgeSaddleSystem,
    precond: BlockHodgePreconditioner,
    n_fields: int | None = None,
    tol: float = 1e-6,
    seed: int = DEFAULT_SEED,
    maxit: int = 500,
    max_retries: int = 5,
    dependence_tol: float | None = None,
    kernel_tol: float = 1e-2,
    deflate: bool = True,
) -> HarmonicBasis:
    """Orthonormal basis of discrete harmonic fields.

    Each attempt solves ``Atilde x = b`` by singular MINRES with a fresh
    seeded random ``b`` (seeds ``seed, seed + 1, ...``) and keeps the field
    part of ``B (b - Atilde x)``.  Each slot gets ``max_retries`` attempts
    and ``n_fields`` defaults to the first Betti number of the mesh.

    A sample ``w`` is rejected as solver noise when
    ``|B Atilde w| > kernel_tol |w|``: true kernel samples give values near
    the MINRES tolerance, range vectors values of the order of the nonzero
    spectrum of ``B Atilde``.  A candidate whose ``M1 + K`` norm drops below
    ``dependence_tol`` (default ``sqrt(tol)``) of its value under
    Gram-Schmidt is rejected as dependent; the solver error left after
    projection is of order ``tol``.

    With ``deflate`` the field part of ``b`` is made Euclidean-orthogonal
    to the fields accepted so far.  The kernel part of the MINRES residual
    is ``N (N^T B^{-1} N)^{-1} N^T b`` for a kernel basis ``N``, so raw
    random samples can be nearly collinear; Gram-Schmidt would then
    magnify the solver tolerance in the later fields.

    Raises
    ------
    RankDeficientSampling
        If fewer than ``n_fields`` independent fields were found.
    """
    if n_fields is None:
        n_fields = system.mesh.betti1()
    if dependence_tol is None:
        dependence_tol = np.sqrt(tol)
    H = (system.M1 + system.K).tocsr()
    basis = HarmonicBasis([], H)
    n = system.matrix.shape[0]
    attempt = 0
    for slot in range(n_fields):
        for _ in range(max_retries):
            s = seed + attempt
            attempt += 1
            b = random_rhs(n, s)
            if deflate and basis.fields:
                bu = b[system.n_potential :]
                Q, _ = np.linalg.qr(np.column_stack(basis.fields))
                bu -= Q @ (Q.T @ bu)
            _, w, rep = minres_singular(system.matrix, precond, b, tol=tol, maxit=maxit)
            basis.reports.append(rep)
            nw = np.linalg.norm(w)
            if nw == 0 or np.linalg.norm(precond @ (system.matrix @ w)) > kernel_tol * nw:
                continue
            _, z = system.split(w)
            z = z.copy()
            norm0 = np.sqrt(z @ (H @ z))
            if norm0 == 0:
                continue
            for q in basis.fields:  # modified Gram-Schmidt, twice for stability
                z -= (q @ (H @ z)) * q
            for q in basis.fields:
                z -= (q @ (H @ z)) * q
            norm1 = np.sqrt(z @ (H @ z))
            if norm1 < dependence_tol * norm0:
                continue
            basis.fields.append(z / norm1)
            basis.seeds.append(s)
            basis.kernel_vectors.append(w)
            break
        else:
            raise RankDeficientSampling(
                f"found {len(basis.fields)} of {n_fields} independent harmonic fields"
            )
    return basis


def harmonic_residuals(system: HodgeSaddleSystem, z, relative: bool = False) -> tuple[float, float]:
    """``(|K z| / |z|, |G^T M1 z| / |z|)``.

    With ``relative`` the two values are further divided by the Frobenius
    norms of ``K`` and ``M1``.
    """
    z = np.asarray(z)
    nz = np.linalg.norm(z)
    curl = np.linalg.norm(system.K @ z) / nz
    div = np.linalg.norm(system.Ginc.T @ (system.M1 @ z)) / nz
    if relative:
        curl /= sp.linalg.norm(system.K)
        div /= sp.linalg.norm(system.M1)
    return float(curl), float(div)


def sigma_part(system: HodgeSaddleSystem, z) -> np.ndarray:
    """Potential ``-M0^{-1} (M1 G)^T z`` paired with a field ``z``."""
    rhs = system.Ginc.T @ (system.M1 @ np.asarray(z))
    return -splu(system.M0.tocsc()).solve(rhs)


def field_at_barycenters(system: HodgeSaddleSystem, z) -> np.ndarray:
    """Whitney field ``z`` evaluated at element barycentres, shape ``(ne, n)``."""
    return FeSpace(system.mesh, system.family).evaluate_at_barycenters(z)
