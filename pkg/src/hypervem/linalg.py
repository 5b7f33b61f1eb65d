"""Deterministic linear-algebra helpers shared by the solvers.

All routines are thin wrappers around numpy/scipy factorizations.  They add
two things the callers rely on: a relative-residual check (local element
matrices are small and must be solved essentially to machine precision) and
a uniform exception type so assembly code can report which element or patch
produced a bad system.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class LinearSolveError(RuntimeError):
    """Raised when a linear system is singular or the residual is too large."""


def solve_dense(A, b, rtol=1e-8, label="dense system"):
    """Solve a small dense system with an explicit residual check.

    ``b`` may be a vector or a matrix of stacked right-hand sides.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    try:
        x = sla.solve(A, b)
    except sla.LinAlgError as exc:
        raise LinearSolveError(f"{label}: factorization failed ({exc})") from exc
    res = np.linalg.norm(A @ x - b)
    scale = np.linalg.norm(b) + np.linalg.norm(A) * np.linalg.norm(x) + 1e-300
    if not np.isfinite(res) or res > rtol * scale:
        raise LinearSolveError(
            f"{label}: relative residual {res / scale:.2e} exceeds {rtol:.1e}"
        )
    return x


def solve_spd(A, b, rtol=1e-8, label="SPD system"):
    """Solve a symmetric positive definite dense system via Cholesky."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    try:
        c, low = sla.cho_factor(A, check_finite=False)
        x = sla.cho_solve((c, low), b, check_finite=False)
    except sla.LinAlgError as exc:
        raise LinearSolveError(f"{label}: not SPD ({exc})") from exc
    res = np.linalg.norm(A @ x - b)
    scale = np.linalg.norm(b) + np.linalg.norm(A) * np.linalg.norm(x) + 1e-300
    if not np.isfinite(res) or res > rtol * scale:
        raise LinearSolveError(
            f"{label}: relative residual {res / scale:.2e} exceeds {rtol:.1e}"
        )
    return x


def solve_sparse(A, b, rtol=1e-7, label="sparse system"):
    """Solve a sparse system (SPD or symmetric indefinite) via sparse LU.

    SuperLU with partial pivoting is deterministic and handles the saddle
    point systems of the mixed method as well as the reduced SPD primal
    systems.
    """
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    try:
        lu = spla.splu(A)
        x = lu.solve(b)
    except RuntimeError as exc:
        raise LinearSolveError(f"{label}: sparse LU failed ({exc})") from exc
    res = np.linalg.norm(A @ x - b)
    scale = np.linalg.norm(b) + spla.norm(A) * np.linalg.norm(x) + 1e-300
    if not np.isfinite(res) or res > rtol * scale:
        raise LinearSolveError(
            f"{label}: relative residual {res / scale:.2e} exceeds {rtol:.1e}"
        )
    return x


def solve_saddle_dense(A, B, f, g, rtol=1e-8, label="saddle system"):
    """Solve the dense saddle system [[A, B^T], [B, 0]] [x; y] = [f; g].

    Used by the local patch problems of the flux reconstruction.  Returns
    ``(x, y)``.
    """
    A = np.asarray(A, dtype=float)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n, m = A.shape[0], B.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = A
    K[n:, :n] = B
    K[:n, n:] = B.T
    rhs = np.concatenate([np.asarray(f, dtype=float), np.asarray(g, dtype=float)])
    sol = solve_dense(K, rhs, rtol=rtol, label=label)
    return sol[:n], sol[n:]


def min_generalized_singular_value(B, X, Y):
    """Smallest generalized singular value of the bilinear form matrix B.

    Computes ``min_v max_tau  v^T B tau / (||tau||_X ||v||_Y)`` which equals
    the square root of the smallest eigenvalue of ``B X^{-1} B^T w = mu Y w``.
    All matrices are dense; this is meant for small diagnostic problems.
    """
    B = np.asarray(B, dtype=float)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Z = solve_dense(X, B.T, label="inf-sup norm system")
    S = B @ Z
    S = 0.5 * (S + S.T)
    mu = sla.eigh(S, 0.5 * (Y + Y.T), eigvals_only=True)
    mu_min = float(mu[0])
    if mu_min < -1e-10 * abs(float(mu[-1])):
        raise LinearSolveError(f"inf-sup eigenproblem returned negative {mu_min:.2e}")
    return float(np.sqrt(max(mu_min, 0.0)))
