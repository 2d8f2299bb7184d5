import csv

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import hierarchy, identity
from hodgehx import fespace as fs
from hodgehx.errors import BreakdownIndefinite
from hodgehx.krylov import (
    estimate_condition,
    estimate_effective_condition,
    lanczos_ritz,
    minres_singular,
    pcg,
    random_rhs,
)
from hodgehx.precond import build_hx


def _spd(n, rng, lo=1.0, hi=100.0):
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return Q @ np.diag(np.linspace(lo, hi, n)) @ Q.T


def test_pcg_identity():
    b = np.arange(1.0, 6.0)
    x, rep = pcg(np.eye(5), identity(5), b)
    assert rep.iterations == 1 and rep.converged
    np.testing.assert_allclose(x, b)


def test_pcg_finite_termination():
    A = np.diag([1.0, 4.0])
    x, rep = pcg(A, identity(2), np.ones(2), tol=1e-14)
    assert rep.iterations <= 2
    np.testing.assert_allclose(x, [1, 0.25])


def test_pcg_zero_rhs():
    x, rep = pcg(np.eye(3), identity(3), np.zeros(3))
    assert rep.converged and rep.iterations == 0 and np.all(x == 0)


def test_pcg_a_norm_error_monotone():
    rng = np.random.default_rng(0)
    A = _spd(30, rng)
    b = rng.normal(size=30)
    xs = np.linalg.solve(A, b)
    errs = []
    for k in range(1, 25):
        x, _ = pcg(A, identity(30), b, tol=1e-300, maxit=k)
        e = x - xs
        errs.append(e @ A @ e)
    assert all(b_ <= a * (1 + 1e-10) + 1e-24 for a, b_ in zip(errs, errs[1:]))


def test_pcg_indefinite_breakdown():
    with pytest.raises(BreakdownIndefinite):
        pcg(np.diag([1.0, -1.0]), identity(2), np.ones(2))
    with pytest.raises(BreakdownIndefinite):
        pcg(np.eye(2), np.diag([1.0, -3.0]), np.array([0.1, 1.0]))


def test_pcg_torus_n0_band():
    m = hierarchy("torus", 1)[0]
    op = fs.assemble_whitney(m, "N0", 1.0)
    B = build_hx(m, "N0", 1.0, operator=op)
    b = fs.l2_project_rhs(m, "N0", lambda p, n: np.ones(3) - (n @ np.ones(3))[:, None] * n)
    _, rep = pcg(op.matrix, B, b)
    assert rep.converged and 10 <= rep.iterations <= 25
    assert rep.stop_criterion_value == rep.residual_history[-1] <= 1e-6
    assert len(rep.residual_history) == rep.iterations + 1


def test_minres_singular_hand_example():
    x, kv, rep = minres_singular(np.diag([1.0, 0.0]), identity(2), np.ones(2), tol=1e-12)
    assert x[0] == pytest.approx(1.0)
    np.testing.assert_allclose(kv, [0, 1], atol=1e-12)


def test_minres_spd_trivial_kernel():
    rng = np.random.default_rng(1)
    A = _spd(40, rng)
    b = rng.normal(size=40)
    tol = 1e-8
    x, kv, rep = minres_singular(A, identity(40), b, tol=tol)
    assert rep.converged
    np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-6)
    assert np.linalg.norm(kv) <= tol * np.linalg.norm(b) * np.linalg.norm(np.linalg.inv(A), 2)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), nullity=st.integers(0, 3))
def test_minres_energy_monotone_and_kernel(seed, nullity):
    rng = np.random.default_rng(seed)
    n = 25
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    ev = np.concatenate((np.zeros(nullity), rng.uniform(-5, -0.5, 5), rng.uniform(0.5, 5, n - 5 - nullity)))
    A = Q @ np.diag(ev) @ Q.T
    Bd = _spd(n, rng, 0.5, 2.0)
    b = rng.random(n)
    tol = 1e-6
    x, kv, rep = minres_singular(A, Bd, b, tol=tol, maxit=200)
    h = rep.energy_history
    assert all(b_ <= a * (1 + 1e-8) for a, b_ in zip(h, h[1:]))
    assert rep.converged
    assert np.linalg.norm(A @ kv) <= 10 * tol * np.linalg.norm(b)


def test_minres_returns_best_iterate_past_attainable_accuracy():
    # 25 distinct eigenvalues: the Krylov space is exhausted before the
    # tolerance is met and orthogonality loss sets in
    rng = np.random.default_rng(1)
    n = 25
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    ev = np.concatenate(([0.0], rng.uniform(-5, -0.5, 5), rng.uniform(0.5, 5, n - 6)))
    A = Q @ np.diag(ev) @ Q.T
    Bd = _spd(n, rng, 0.5, 2.0)
    b = rng.random(n)
    x, kv, rep = minres_singular(A, Bd, b, tol=1e-12, maxit=200)
    assert not rep.converged and rep.breakdown and rep.iterations < 200
    assert rep.stop_criterion_value <= 1.01 * min(rep.residual_history)
    assert np.linalg.norm(x) < 100


def test_minres_iterations_grow_with_effective_condition():
    rng = np.random.default_rng(5)
    n = 200
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    base = np.concatenate((np.zeros(2), np.linspace(1, 10, n - 2)))
    b = rng.random(n)
    counts = []
    for scale in (1.0, 2.0, 4.0):
        ev = base.copy()
        ev[2 + (n - 2) // 2 :] *= scale  # scaling one block raises the effective condition
        A = Q @ np.diag(ev) @ Q.T
        _, _, rep = minres_singular(A, identity(n), b, tol=1e-8)
        counts.append(rep.iterations)
    assert counts == sorted(counts)


def test_report_csv(tmp_path):
    _, rep = pcg(np.diag([1.0, 2.0, 3.0]), identity(3), np.ones(3))
    rep.to_csv(tmp_path / "r.csv")
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == ["iteration", "criterion"] and len(rows) == len(rep.residual_history) + 1


def test_condition_estimates():
    assert estimate_condition(np.eye(6), identity(6), 5) == pytest.approx((1.0, 1.0))
    lo, hi = estimate_condition(np.diag(np.arange(1.0, 11.0)), identity(10), 10)
    assert lo == pytest.approx(1.0, abs=1e-8) and hi == pytest.approx(10.0, abs=1e-8)
    lo, hi = estimate_effective_condition(np.diag([0.0, 0.0, 2.0, 3.0, 7.0]), identity(5), 5)
    assert (lo, hi) == pytest.approx((2.0, 7.0))


def test_lanczos_preconditioned_pencil():
    rng = np.random.default_rng(2)
    A, Bm = _spd(20, rng), _spd(20, rng, 0.1, 1.0)
    theta, bounds = lanczos_ritz(A, Bm, 20)
    exact = np.sort(np.linalg.eigvals(Bm @ A).real)
    np.testing.assert_allclose(np.sort(theta), exact, rtol=1e-8)


def test_random_rhs_reproducible():
    a, b = random_rhs(10), random_rhs(10)
    assert np.array_equal(a, b) and a.min() >= 0 and a.max() < 1
    assert not np.array_equal(random_rhs(10, 1), a)
