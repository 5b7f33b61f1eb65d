"""Linear-algebra helpers: residual checks, saddle solve, inf-sup eigenvalue."""

import numpy as np
import pytest
import scipy.sparse as sp

from hypervem.linalg import (
    LinearSolveError,
    min_generalized_singular_value,
    solve_dense,
    solve_saddle_dense,
    solve_sparse,
    solve_spd,
)

RNG = np.random.default_rng(7)


def test_solve_dense_basic():
    A = RNG.uniform(-1, 1, size=(6, 6)) + 6 * np.eye(6)
    x_ref = RNG.uniform(-1, 1, size=6)
    x = solve_dense(A, A @ x_ref)
    assert np.allclose(x, x_ref, atol=1e-12)


def test_solve_dense_multiple_rhs():
    A = RNG.uniform(-1, 1, size=(5, 5)) + 5 * np.eye(5)
    B = RNG.uniform(-1, 1, size=(5, 3))
    X = solve_dense(A, B)
    assert X.shape == (5, 3)
    assert np.allclose(A @ X, B, atol=1e-12)


def test_solve_dense_singular_raises():
    A = np.ones((3, 3))
    with pytest.raises(LinearSolveError):
        solve_dense(A, np.array([1.0, 0.0, 0.0]))


def test_solve_spd():
    M = RNG.uniform(-1, 1, size=(8, 8))
    A = M @ M.T + np.eye(8)
    x_ref = RNG.uniform(-1, 1, size=8)
    x = solve_spd(A, A @ x_ref)
    assert np.allclose(x, x_ref, atol=1e-12)


def test_solve_spd_rejects_indefinite():
    A = np.diag([1.0, -1.0, 2.0])
    with pytest.raises(LinearSolveError):
        solve_spd(A, np.ones(3))


def test_solve_sparse():
    n = 40
    main = 2.0 * np.ones(n)
    off = -1.0 * np.ones(n - 1)
    A = sp.diags([off, main, off], [-1, 0, 1], format="csc")
    x_ref = RNG.uniform(-1, 1, size=n)
    x = solve_sparse(A, A @ x_ref)
    assert np.allclose(x, x_ref, atol=1e-10)


def test_solve_saddle_dense():
    # Minimize 1/2 x^T A x - f^T x subject to Bx = g.
    M = RNG.uniform(-1, 1, size=(5, 5))
    A = M @ M.T + np.eye(5)
    B = RNG.uniform(-1, 1, size=(2, 5))
    f = RNG.uniform(-1, 1, size=5)
    g = RNG.uniform(-1, 1, size=2)
    x, y = solve_saddle_dense(A, B, f, g)
    assert np.allclose(B @ x, g, atol=1e-12)
    assert np.allclose(A @ x + B.T @ y, f, atol=1e-12)


def test_min_generalized_singular_value_identity_norms():
    # With X = Y = I the quantity is the smallest singular value of B.
    B = RNG.uniform(-1, 1, size=(4, 6))
    got = min_generalized_singular_value(B, np.eye(6), np.eye(4))
    assert got == pytest.approx(np.linalg.svd(B, compute_uv=False)[-1], abs=1e-12)


def test_min_generalized_singular_value_scaling():
    # Scaling the tau-norm by c^2 scales the value by 1/c.
    B = RNG.uniform(-1, 1, size=(3, 5))
    base = min_generalized_singular_value(B, np.eye(5), np.eye(3))
    scaled = min_generalized_singular_value(B, 4.0 * np.eye(5), np.eye(3))
    assert scaled == pytest.approx(base / 2.0, rel=1e-12)
