"""Scaled monomial basis: ordering, derivative matrices, restriction."""

import numpy as np
import pytest

from hypervem.polybasis import (
    MonomialBasis,
    gradient_basis_indices,
    monomial_exponents,
    space_dim,
)

RNG = np.random.default_rng(20240817)


def test_space_dim():
    assert [space_dim(d) for d in (-2, -1, 0, 1, 2, 3, 4)] == [0, 0, 1, 3, 6, 10, 15]


def test_exponent_ordering():
    exps = monomial_exponents(2)
    assert exps == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    assert monomial_exponents(-1) == ()
    # graded ordering: total degree is nondecreasing
    degs = [a + b for a, b in monomial_exponents(6)]
    assert degs == sorted(degs)


@pytest.fixture
def basis():
    return MonomialBasis(xc=0.3, yc=-0.2, h=0.7, degree=4)


def test_eval_matches_direct_formula(basis):
    pts = RNG.uniform(-1, 1, size=(7, 2))
    vals = basis.eval(pts)
    for i, (a, b) in enumerate(basis.exponents):
        direct = ((pts[:, 0] - basis.xc) / basis.h) ** a * (
            (pts[:, 1] - basis.yc) / basis.h
        ) ** b
        assert np.allclose(vals[:, i], direct, atol=1e-14)


def test_grad_matches_finite_differences(basis):
    pts = RNG.uniform(-1, 1, size=(5, 2))
    g = basis.grad(pts)
    eps = 1e-6
    for axis in (0, 1):
        dp = np.zeros(2)
        dp[axis] = eps
        fd = (basis.eval(pts + dp) - basis.eval(pts - dp)) / (2 * eps)
        assert np.allclose(g[:, :, axis], fd, atol=1e-7)


def test_derivative_coeff_matrices(basis):
    """dx/dy coefficient matrices agree with pointwise gradients to 1e-11."""
    pts = RNG.uniform(-1, 1, size=(9, 2))
    lower = basis.restrict(basis.degree - 1)
    g = basis.grad(pts)
    assert np.allclose(lower.eval(pts) @ basis.dx_coeffs(), g[:, :, 0], atol=1e-11)
    assert np.allclose(lower.eval(pts) @ basis.dy_coeffs(), g[:, :, 1], atol=1e-11)


def test_laplacian_coeffs(basis):
    # Laplacian of m via second finite differences.
    pts = RNG.uniform(-1, 1, size=(4, 2))
    L = basis.laplacian_coeffs()
    low = basis.restrict(basis.degree - 2)
    vals = low.eval(pts) @ L
    eps = 1e-4
    lap_fd = (
        basis.eval(pts + [eps, 0])
        + basis.eval(pts - [eps, 0])
        + basis.eval(pts + [0, eps])
        + basis.eval(pts - [0, eps])
        - 4 * basis.eval(pts)
    ) / eps**2
    assert np.allclose(vals, lap_fd, atol=1e-5)


def test_antiderivative_roundtrip(basis):
    """d/dx of the x-antiderivative is the identity (gradient round trip)."""
    A = basis.antiderivative_x()
    up = basis.restrict(basis.degree + 1)
    roundtrip = up.dx_coeffs() @ A
    assert np.allclose(roundtrip, np.eye(basis.dim), atol=1e-11)


def test_gradient_basis_indices():
    assert gradient_basis_indices(-1) == []
    assert gradient_basis_indices(0) == [1, 2]
    assert gradient_basis_indices(2) == list(range(1, 10))
