"""Nodal auxiliary space (HX) preconditioners and the block Hodge preconditioner.

For a Whitney operator ``A = K + c M`` the HX preconditioner is

    B = D^{-1} + P boldA^{-1} P^T + c^{-1} Inc Atilde^{-1} Inc^T

with ``D`` the diagonal of ``A``, ``P`` the transfer from vector P1,
``boldA`` the block-diagonal vector P1 operator, ``Atilde`` the scalar P1
operator ``stiffness + c mass`` and ``Inc`` the gradient (N0) or rotated
gradient (2-d RT0) incidence.  On tetrahedral meshes the potential of an
RT0 field is an N0 field, and its exact inverse is replaced by the smoother
and transfer part of the N0 preconditioner:

    c^{-1} C [D_curl^{-1} + P_curl boldA^{-1} P_curl^T] C^T.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .errors import DimensionMismatch, InvalidC, UnsupportedFamily
from .fespace import AssembledOperator, assemble_p1, assemble_whitney, incidence_dminus, transfer_matrix
from .mesh import SurfaceMesh
from .sparsela import InnerSolver, cholesky_factor, jacobi_inverse_diag, make_inner_solver


def _inner(A, kind) -> InnerSolver:
    if isinstance(kind, InnerSolver):
        return kind
    if isinstance(kind, tuple):
        name, params = kind
        return make_inner_solver(A, name, **params)
    return make_inner_solver(A, kind)


class HxPreconditioner(LinearOperator):
    """Additive HX preconditioner; apply with ``B @ r`` or :func:`apply_hx`."""

    def __init__(
        self,
        operator: AssembledOperator,
        smoother: LinearOperator,
        transfer: sp.csr_matrix,
        vector_poisson: InnerSolver,
        potential_incidence: sp.csr_matrix,
        c: float,
        nested_curl: tuple[LinearOperator, sp.csr_matrix] | None = None,
    ):
        n = operator.matrix.shape[0]
        super().__init__(dtype=float, shape=(n, n))
        self.operator = operator
        self.family = operator.space.family
        self.smoother = smoother
        self.transfer = transfer
        self.vector_poisson = vector_poisson
        self.potential_incidence = potential_incidence
        self.c = c
        self.nested_curl = nested_curl
        self.ambient_dim = operator.space.mesh.ambient_dim

    # ---------------------------------------------------------- components
    def _poisson_columns(self, cols: np.ndarray) -> np.ndarray:
        return self.vector_poisson(cols)

    def _to_columns(self, y: np.ndarray) -> np.ndarray:
        """Component-major vector P1 coefficients -> ``(nv, dim)`` columns."""
        return y.reshape(self.ambient_dim, -1).T

    def _from_columns(self, cols: np.ndarray) -> np.ndarray:
        return cols.T.ravel()

    def smoother_term(self, r):
        return self.smoother @ r

    def transfer_term(self, r):
        y = self._poisson_columns(self._to_columns(self.transfer.T @ r))
        return self.transfer @ self._from_columns(y)

    def potential_term(self, r):
        """``c^{-1} Inc [...] Inc^T r`` (bracket as in the module docstring)."""
        s = self.potential_incidence.T @ r
        if self.nested_curl is None:
            return self.potential_incidence @ self.vector_poisson(s) / self.c
        d_curl, p_curl = self.nested_curl
        y = self._poisson_columns(self._to_columns(p_curl.T @ s))
        inner = d_curl @ s + p_curl @ self._from_columns(y)
        return self.potential_incidence @ inner / self.c

    def terms(self) -> list[LinearOperator]:
        """The additive terms as standalone operators (for testing).

        Three terms, or four on tetrahedral RT0 where the potential path
        splits into its smoother and transfer parts.
        """
        n = self.shape[0]
        fns = [self.smoother_term, self.transfer_term]
        if self.nested_curl is None:
            fns.append(self.potential_term)
        else:
            d_curl, p_curl = self.nested_curl
            inc = self.potential_incidence

            def curl_smoother(r):
                return inc @ (d_curl @ (inc.T @ r)) / self.c

            def curl_transfer(r):
                y = self._poisson_columns(self._to_columns(p_curl.T @ (inc.T @ r)))
                return inc @ (p_curl @ self._from_columns(y)) / self.c

            fns += [curl_smoother, curl_transfer]
        return [LinearOperator((n, n), matvec=f, dtype=float) for f in fns]

    # -------------------------------------------------------------- apply
    def _matvec(self, r):
        r = np.asarray(r, dtype=float).ravel()
        if r.shape[0] != self.shape[0]:
            raise DimensionMismatch(f"expected length {self.shape[0]}, got {r.shape[0]}")
        dim = self.ambient_dim
        # batch every scalar Poisson solve of this application in one call
        blocks = [self._to_columns(self.transfer.T @ r)]
        s = self.potential_incidence.T @ r
        if self.nested_curl is None:
            blocks.append(s[:, None])
        else:
            d_curl, p_curl = self.nested_curl
            blocks.append(self._to_columns(p_curl.T @ s))
        y = self._poisson_columns(np.hstack(blocks))
        out = self.smoother @ r + self.transfer @ self._from_columns(y[:, :dim])
        if self.nested_curl is None:
            out += self.potential_incidence @ y[:, dim] / self.c
        else:
            inner = d_curl @ s + p_curl @ self._from_columns(y[:, dim:])
            out += self.potential_incidence @ inner / self.c
        return out

    def _matmat(self, X):
        return np.column_stack([self._matvec(col) for col in np.asarray(X).T])

    def _adjoint(self):
        return self


def build_hx(
    mesh: SurfaceMesh,
    family: str,
    c: float = 1.0,
    inner_kind="direct",
    operator: AssembledOperator | None = None,
    scalar_solver: InnerSolver | None = None,
) -> HxPreconditioner:
    """HX preconditioner for ``assemble_whitney(mesh, family, c)``.

    ``inner_kind`` is ``"direct"``, ``"amg"``, ``"pcg-amg"``, a
    ``(kind, params)`` tuple or a ready :class:`InnerSolver` for the scalar
    P1 operator with the same ``c``.

    Raises
    ------
    InvalidC
        If ``c <= 0``.
    """
    if not c > 0:
        raise InvalidC(f"c must be positive, got {c}")
    if family not in ("N0", "RT0"):
        raise UnsupportedFamily(f"no HX preconditioner for {family!r}")
    if operator is None:
        operator = assemble_whitney(mesh, family, c)
    if scalar_solver is None:
        scalar_solver = _inner(assemble_p1(mesh, c).matrix, inner_kind)
    smoother = jacobi_inverse_diag(operator.matrix)
    transfer = transfer_matrix(mesh, family)
    nested = None
    if family == "RT0" and mesh.element_dim == 3:
        curl_op = assemble_whitney(mesh, "N0", c)
        nested = (jacobi_inverse_diag(curl_op.matrix), transfer_matrix(mesh, "N0"))
    inc = incidence_dminus(mesh, family)
    return HxPreconditioner(operator, smoother, transfer, scalar_solver, inc, c, nested)


def apply_hx(B: HxPreconditioner, r) -> np.ndarray:
    """``B r``; raises :class:`DimensionMismatch` on a wrong length."""
    r = np.asarray(r, dtype=float)
    if r.shape != (B.shape[0],):
        raise DimensionMismatch(f"expected shape ({B.shape[0]},), got {r.shape}")
    return B.matvec(r)


# ------------------------------------------------------------- Hodge blocks
class BlockHodgePreconditioner(LinearOperator):
    """``diag(potential_block^{-1}, field_block)`` for the mixed Hodge system."""

    def __init__(self, potential_block, field_block):
        n0 = potential_block.shape[0]
        n1 = field_block.shape[0]
        super().__init__(dtype=float, shape=(n0 + n1, n0 + n1))
        self.potential_block = potential_block
        self.field_block = field_block
        self.split = n0

    def _apply_potential(self, x):
        blk = self.potential_block
        return blk(x) if isinstance(blk, InnerSolver) else blk @ x

    def _matvec(self, r):
        r = np.asarray(r, dtype=float).ravel()
        if r.shape[0] != self.shape[0]:
            raise DimensionMismatch(f"expected length {self.shape[0]}, got {r.shape[0]}")
        k = self.split
        return np.concatenate((self._apply_potential(r[:k]), self.field_block @ r[k:]))

    def _matmat(self, X):
        return np.column_stack([self._matvec(col) for col in np.asarray(X).T])

    def _adjoint(self):
        return self


def build_block_hodge(mesh: SurfaceMesh, family: str, inner_kind="direct") -> BlockHodgePreconditioner:
    """``diag((A^grad)^{-1}, B_HX)`` with ``c = 1`` in both blocks.

    ``A^grad`` is the scalar P1 operator ``stiffness + mass``, which is also
    the operator the HX field block needs, so one inner solver serves both.
    """
    if family not in ("N0", "RT0"):
        raise UnsupportedFamily(f"no Hodge preconditioner for {family!r}")
    solver = _inner(assemble_p1(mesh, 1.0).matrix, inner_kind)
    field = build_hx(mesh, family, 1.0, scalar_solver=solver)
    return BlockHodgePreconditioner(solver, field)


def build_exact_block_hodge(mesh: SurfaceMesh, family: str) -> BlockHodgePreconditioner:
    """Riesz-map block preconditioner ``diag((A^grad)^{-1}, (K + M1)^{-1})``."""
    potential = cholesky_factor(assemble_p1(mesh, 1.0).matrix)
    field = cholesky_factor(assemble_whitney(mesh, family, 1.0).matrix).as_operator()
    return BlockHodgePreconditioner(potential, field)
