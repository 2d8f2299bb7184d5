"""Preconditioned CG, singular MINRES and Lanczos condition estimates.

Operators may be sparse matrices, dense arrays, :class:`LinearOperator`
instances or callables.  Norms in stopping criteria are Euclidean.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import aslinearoperator

from .errors import BreakdownIndefinite

DEFAULT_SEED = 20240101
DIVERGENCE_FACTOR = 1e3


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    converged: bool = False
    stop_criterion_value: float = float("nan")
    wall_time: float = 0.0
    breakdown: bool = False
    energy_history: list[float] = field(default_factory=list)

    def to_csv(self, path) -> None:
        """Write ``iteration,criterion`` rows (iteration 0 is the initial value)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "criterion"])
            for i, v in enumerate(self.residual_history):
                w.writerow([i, repr(float(v))])


def _op(A):
    if callable(A) and not hasattr(A, "shape"):
        return A
    lin = aslinearoperator(A)
    return lin.matvec


def random_rhs(n: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Uniform ``[0, 1)`` entries from a seeded generator."""
    return np.random.default_rng(seed).random(n)


def pcg(A, B, b, tol: float = 1e-6, maxit: int = 500, x0=None):
    """Preconditioned CG stopping on ``|B r_k| / |b| <= tol``.

    Returns ``(x, SolveReport)``; ``x`` is returned even without convergence.

    Raises
    ------
    BreakdownIndefinite
        If ``p . A p <= 0`` or ``r . B r < 0`` (non-SPD input).
    """
    t0 = time.perf_counter()
    apply_a, apply_b = _op(A), _op(B)
    b = np.asarray(b, dtype=float)
    nb = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    report = SolveReport()
    if nb == 0:
        report.converged, report.stop_criterion_value = True, 0.0
        report.residual_history.append(0.0)
        return np.zeros_like(b), report
    r = b - apply_a(x) if x0 is not None else b.copy()
    z = apply_b(r)
    crit = np.linalg.norm(z) / nb
    report.residual_history.append(crit)
    rz = r @ z
    if rz < 0:
        raise BreakdownIndefinite("preconditioner is not positive definite")
    p = z.copy()
    k = 0
    while crit > tol and k < maxit:
        q = apply_a(p)
        curv = p @ q
        if curv <= 0:
            raise BreakdownIndefinite(f"non-positive curvature {curv:.3e} at iteration {k}")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * q
        z = apply_b(r)
        rz_new = r @ z
        if rz_new < 0:
            raise BreakdownIndefinite("preconditioner is not positive definite")
        k += 1
        crit = np.linalg.norm(z) / nb
        report.residual_history.append(crit)
        p = z + (rz_new / rz) * p
        rz = rz_new
    report.iterations = k
    report.stop_criterion_value = crit
    report.converged = bool(crit <= tol)
    report.wall_time = time.perf_counter() - t0
    return x, report


def minres_singular(A, B, b, tol: float = 1e-6, maxit: int = 500):
    """Preconditioned MINRES for symmetric, possibly singular ``A``.

    Minimizes ``||b - A x||_B`` over the preconditioned Krylov space from a
    zero guess and stops on ``|A B (b - A x_k)| / |b| <= tol``.  Returns
    ``(x, kernel_vector, report)`` with ``kernel_vector = B (b - A x_k)``;
    when ``b`` lies in the range of ``A`` this vector is (nearly) zero.

    ``report.residual_history`` holds the stopping quantity per iteration,
    ``report.energy_history`` the monotone ``||r_k||_B``.  Without
    reorthogonalization the attainable stopping value on an inconsistent
    system is about ``sqrt(eps)`` times the problem scale; past that point
    the iterates may drift, so the run stops once the criterion exceeds
    ``DIVERGENCE_FACTOR`` times its best value and the best iterate is
    returned.
    """
    t0 = time.perf_counter()
    apply_a, apply_b = _op(A), _op(B)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    nb = np.linalg.norm(b)
    report = SolveReport()
    x = np.zeros(n)
    if nb == 0:
        report.converged, report.stop_criterion_value = True, 0.0
        report.residual_history.append(0.0)
        report.energy_history.append(0.0)
        return x, np.zeros(n), report

    # Lanczos vectors r1, r2 (unpreconditioned) and y = B r2.
    r1 = b.copy()
    y = apply_b(r1)
    beta1 = r1 @ y
    if beta1 < 0:
        raise BreakdownIndefinite("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1)
    r2 = r1.copy()
    # B r_k = B b - sum phi_j B A w_j; B A w_j obeys the same recurrence as
    # w_j once B A v_j is rebuilt from quantities the iteration already has
    Bb = y.copy()
    Bres = Bb.copy()
    crit = np.linalg.norm(apply_a(Bres)) / nb
    report.residual_history.append(crit)
    report.energy_history.append(beta1)

    oldb, beta, dbar, epsln = 0.0, beta1, 0.0, 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    bw = np.zeros(n)  # B A w
    bw2 = np.zeros(n)
    v_prev = np.zeros(n)
    k = 0
    breakdown = False
    best_crit, best_x = crit, x.copy()
    while crit > tol and k < maxit:
        k += 1
        v = y / beta
        Av = apply_a(v)
        y = Av.copy()
        if k >= 2:
            y -= (beta / oldb) * r1
        alfa = v @ y
        y -= (alfa / beta) * r2
        r1, r2 = r2, y
        yb = apply_b(r2)
        # A v = r2_new + (alfa/beta) r2_old + (beta/oldb) r1_old with
        # B r2_old = beta v and B r1_old = oldb v_prev
        BAv = yb + alfa * v + beta * v_prev
        v_prev = v
        y = yb
        oldb = beta
        beta2 = r2 @ y
        if beta2 < 0:
            raise BreakdownIndefinite("preconditioner is not positive definite")
        beta = np.sqrt(beta2)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = np.hypot(gbar, beta)
        if gamma == 0.0:
            breakdown = True
            break
        cs, sn = gbar / gamma, beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        bw1, bw2 = bw2, bw
        bw = (BAv - oldeps * bw1 - delta * bw2) / gamma
        x += phi * w
        Bres -= phi * bw

        crit = np.linalg.norm(apply_a(Bres)) / nb
        report.residual_history.append(crit)
        report.energy_history.append(abs(phibar))
        if crit < best_crit:
            best_crit, best_x = crit, x.copy()
        elif crit > DIVERGENCE_FACTOR * best_crit:
            # lost Lanczos orthogonality re-excites kernel directions of an
            # inconsistent system; the iterates then drift off
            breakdown = True
            break
        if beta < 1e-14 * beta1:
            # invariant Krylov space: x is final
            breakdown = True
            break

    if best_crit < crit:
        x = best_x
    kernel_vector = apply_b(b - apply_a(x))
    crit = np.linalg.norm(apply_a(kernel_vector)) / nb
    report.iterations = k
    report.stop_criterion_value = crit
    report.converged = bool(crit <= tol)
    report.breakdown = breakdown
    report.wall_time = time.perf_counter() - t0
    return x, kernel_vector, report


def lanczos_ritz(A, B, n_steps: int, v0=None, seed: int = DEFAULT_SEED):
    """Ritz values of ``B A`` from ``n_steps`` of B-preconditioned Lanczos.

    Runs in the ``B^{-1}`` inner product with full reorthogonalization;
    returns ``(ritz_values, residual_bounds)``.
    """
    apply_a, apply_b = _op(A), _op(B)
    if v0 is None:
        n = A.shape[0]
        v0 = np.random.default_rng(seed).standard_normal(n)
    r = np.asarray(v0, dtype=float)
    z = apply_b(r)
    beta = np.sqrt(r @ z)
    R, Z = [], []
    alphas, betas = [], []
    for _ in range(n_steps):
        r, z = r / beta, z / beta
        R.append(r)
        Z.append(z)
        q = apply_a(z)
        alpha = z @ q
        q = q - alpha * r - (betas[-1] * R[-2] if betas else 0.0)
        for rj, zj in zip(R, Z):  # reorthogonalize in the B inner product
            q = q - (q @ zj) * rj
        alphas.append(alpha)
        zq = apply_b(q)
        beta_new = q @ zq
        if beta_new <= 1e-28 * max(1.0, alpha * alpha) or len(alphas) == n_steps:
            last_beta = np.sqrt(max(beta_new, 0.0))
            break
        beta = np.sqrt(beta_new)
        betas.append(beta)
        r, z = q, zq
    theta, S = eigh_tridiagonal(np.array(alphas), np.array(betas[: len(alphas) - 1]))
    return theta, np.abs(last_beta * S[-1, :])


def estimate_condition(A, B, n_steps: int = 60, seed: int = DEFAULT_SEED):
    """``(lambda_min, lambda_max)`` Ritz estimates of ``B A`` (both SPD)."""
    theta, _ = lanczos_ritz(A, B, n_steps, seed=seed)
    return float(theta.min()), float(theta.max())


def estimate_effective_condition(A, B, n_steps: int = 60, seed=DEFAULT_SEED):
    """Extreme nonzero-magnitude Ritz values of ``B A`` for singular ``A``.

    The start residual is ``A`` applied to a random vector, so it lies in
    the range of ``A`` and Lanczos stays there; Ritz values below
    ``1e-8`` times the largest are discarded.
    """
    apply_a = _op(A)
    n = A.shape[0]
    v = apply_a(np.random.default_rng(seed).standard_normal(n))
    theta, _ = lanczos_ritz(A, B, n_steps, v0=v)
    mag = np.abs(theta)
    keep = mag > 1e-8 * mag.max()
    return float(mag[keep].min()), float(mag[keep].max())
