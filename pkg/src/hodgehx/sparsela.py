"""Sparse kernels: CSR helpers, direct and AMG inner solvers, Jacobi.

CSR storage and matvec come from :mod:`scipy.sparse`; the sparse direct
solver is SuperLU with a symmetric minimum-degree ordering and no pivoting,
which for an SPD matrix is an LDL^T-type factorization; smoothed
aggregation AMG comes from :mod:`pyamg`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.linalg import LinearOperator

from .errors import NotSPD, ZeroDiagonal

CsrMatrix = sp.csr_matrix

__all__ = [
    "CsrMatrix",
    "InnerSolver",
    "as_csr",
    "cholesky_factor",
    "amg_setup",
    "pcg_amg_setup",
    "make_inner_solver",
    "jacobi_inverse_diag",
    "read_matrix_market",
    "write_matrix_market",
]


def as_csr(A) -> sp.csr_matrix:
    """Canonical CSR copy: sorted unique column indices, no stored zeros."""
    A = sp.csr_matrix(A, dtype=float, copy=True)
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def _check_square_symmetric(A: sp.csr_matrix, rtol: float = 1e-10) -> None:
    if A.shape[0] != A.shape[1]:
        raise NotSPD("matrix is not square")
    scale = abs(A).max() if A.nnz else 0.0
    if A.nnz and abs(A - A.T).max() > rtol * scale:
        raise NotSPD("matrix is not symmetric")


@dataclass
class InnerSolver:
    """Approximate or exact inverse of an SPD matrix, applied as ``solver(b)``.

    ``b`` may be a vector or a 2-d array of right-hand sides (columns).
    """

    kind: str
    matrix: sp.csr_matrix
    _apply: object = field(repr=False)
    params: dict = field(default_factory=dict)
    state: object = field(default=None, repr=False)

    def __call__(self, b):
        return self._apply(np.asarray(b, dtype=float))

    @property
    def shape(self):
        return self.matrix.shape

    def as_operator(self) -> LinearOperator:
        n = self.matrix.shape[0]
        return LinearOperator((n, n), matvec=self, matmat=self, dtype=float)


# ----------------------------------------------------------------- direct
class _SymmetricLU:
    """SuperLU factorization of an SPD matrix without pivoting.

    With ``diag_pivot_thresh=0`` and a symmetric ordering the factors are
    ``P A P^T = L U`` with ``U = D L^T``; positivity of ``D`` is the SPD test.
    """

    def __init__(self, A: sp.csr_matrix):
        self.lu = spla.splu(
            A.tocsc(),
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
        d = self.lu.U.diagonal()
        if d.size and (not np.all(np.isfinite(d)) or d.min() <= 0):
            raise NotSPD("non-positive pivot in Cholesky factorization")
        self.pivots = d

    def solve(self, b):
        return self.lu.solve(b)

    def factor_l(self) -> tuple[sp.csc_matrix, np.ndarray]:
        """Lower factor ``L`` and permutation ``p`` with ``A[p][:, p] = L L^T``."""
        L = self.lu.L @ sp.diags(np.sqrt(self.pivots))
        perm = np.empty_like(self.lu.perm_c)
        perm[self.lu.perm_c] = np.arange(len(perm))
        return L.tocsc(), perm


def cholesky_factor(A) -> InnerSolver:
    """Sparse direct solver for an SPD matrix.

    Raises
    ------
    NotSPD
        On a non-symmetric matrix or a non-positive pivot.
    """
    A = as_csr(A)
    _check_square_symmetric(A)
    if A.shape[0] == 0:
        return InnerSolver("DirectCholesky", A, lambda b: np.array(b, dtype=float))
    try:
        fac = _SymmetricLU(A)
    except RuntimeError as exc:  # exactly singular
        raise NotSPD(str(exc)) from exc
    return InnerSolver("DirectCholesky", A, fac.solve, state=fac)


# -------------------------------------------------------------------- AMG
def amg_setup(A, n_cycles: int = 1, presmooth: int = 1, postsmooth: int = 1) -> InnerSolver:
    """Smoothed-aggregation AMG, applied as ``n_cycles`` symmetric V-cycles.

    Symmetric Gauss-Seidel pre- and post-smoothing with Galerkin coarse
    operators makes each V-cycle an SPD operator.
    """
    import pyamg

    A = as_csr(A)
    _check_square_symmetric(A)
    d = A.diagonal()
    if d.size and d.min() <= 0:
        raise NotSPD("AMG needs a positive diagonal")
    ml = pyamg.smoothed_aggregation_solver(
        A,
        symmetry="symmetric",
        strength=("symmetric", {"theta": 0.08}),
        smooth=("jacobi", {"degree": 1}),
        presmoother=("gauss_seidel", {"sweep": "symmetric", "iterations": presmooth}),
        postsmoother=("gauss_seidel", {"sweep": "symmetric", "iterations": postsmooth}),
        max_coarse=200,
        coarse_solver="splu",
        keep=False,
    )
    vcycle = ml.aspreconditioner(cycle="V")

    def apply(b):
        if b.ndim == 2:
            return np.column_stack([apply(col) for col in b.T])
        x = vcycle @ b
        for _ in range(n_cycles - 1):
            x = x + vcycle @ (b - A @ x)
        return x

    params = {"n_cycles": n_cycles, "presmooth": presmooth, "postsmooth": postsmooth}
    return InnerSolver("AmgVcycle", A, apply, params, state=ml)


def pcg_amg_setup(A, tol: float = 1e-8, maxit: int = 200) -> InnerSolver:
    """Inner PCG preconditioned by one AMG V-cycle, run to ``tol``.

    Only approximately linear; use a tight ``tol`` when the outer method
    relies on a fixed preconditioner.
    """
    from .krylov import pcg

    A = as_csr(A)
    vcycle = amg_setup(A).as_operator()

    def apply(b):
        if b.ndim == 2:
            return np.column_stack([apply(col) for col in b.T])
        if not np.any(b):
            return np.zeros_like(b)
        x, _ = pcg(A, vcycle, b, tol=tol, maxit=maxit)
        return x

    return InnerSolver("PcgAmg", A, apply, {"tol": tol, "maxit": maxit})


def make_inner_solver(A, kind: str = "direct", **params) -> InnerSolver:
    """``kind`` in ``{"direct", "amg", "pcg-amg"}`` (also the class-style names)."""
    key = kind.lower().replace("_", "").replace("-", "")
    if key in ("direct", "directcholesky", "cholesky"):
        return cholesky_factor(A)
    if key in ("amg", "amgvcycle"):
        return amg_setup(A, **params)
    if key in ("pcgamg",):
        return pcg_amg_setup(A, **params)
    raise ValueError(f"unknown inner solver kind {kind!r}")


# ----------------------------------------------------------------- Jacobi
def jacobi_inverse_diag(A) -> LinearOperator:
    """``D^{-1}`` of ``A`` as a linear operator.

    Raises
    ------
    ZeroDiagonal
        If a diagonal entry is zero (or not positive).
    """
    d = sp.csr_matrix(A).diagonal()
    if np.any(d <= 0):
        raise ZeroDiagonal("Jacobi needs a positive diagonal")
    inv = 1.0 / d
    n = len(d)

    def matmat(x):
        x = np.asarray(x, dtype=float)
        return inv[:, None] * x if x.ndim == 2 else inv * x

    op = LinearOperator((n, n), matvec=matmat, matmat=matmat, dtype=float)
    op.inverse_diagonal = inv
    return op


# --------------------------------------------------------------------- I/O
def write_matrix_market(path, A, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, precision=17)


def read_matrix_market(path) -> sp.csr_matrix:
    path = Path(path)
    if not path.exists() and path.with_suffix(".mtx").exists():
        path = path.with_suffix(".mtx")
    return as_csr(scipy.io.mmread(str(path)))
