"""Benchmark cases: PDE residual, branch cuts, boundary-condition tags."""

import numpy as np
import pytest

from hypervem.cases import make_case

RNG = np.random.default_rng(11)


def _laplacian_fd(u, pts, hint, eps=1e-5):
    return (
        u(pts + [eps, 0], hint)
        + u(pts - [eps, 0], hint)
        + u(pts + [0, eps], hint)
        + u(pts - [0, eps], hint)
        - 4 * u(pts, hint)
    ) / eps**2


@pytest.mark.parametrize("name", ["tc1", "tc2", "tc3", "smooth"])
def test_pde_residual(name):
    """-lap(u) = f at interior points away from the singular corner."""
    case = make_case(name)
    pts = RNG.uniform(0.3, 0.9, size=(20, 2))  # first quadrant, away from origin
    hint = np.array([0.5, 0.5])
    res = -_laplacian_fd(case.u, pts, hint) - case.f(pts)
    assert np.max(np.abs(res)) < 1e-4


@pytest.mark.parametrize("name", ["tc1", "tc2", "tc3", "smooth"])
def test_grad_consistent_with_u(name):
    case = make_case(name)
    pts = RNG.uniform(0.2, 0.9, size=(15, 2))
    hint = np.array([0.5, 0.5])
    g = case.grad(pts, hint)
    eps = 1e-7
    for axis in (0, 1):
        dp = np.zeros(2)
        dp[axis] = eps
        fd = (case.u(pts + dp, hint) - case.u(pts - dp, hint)) / (2 * eps)
        assert np.allclose(g[:, axis], fd, atol=1e-6)


def test_tc1_values():
    """u = r^(2/3) sin(2 theta / 3), theta measured from the positive x axis."""
    case = make_case("tc1")
    # theta = pi/2: u = sin(pi/3) * r^(2/3)
    val = case.u(np.array([[0.0, 0.5]]), None)[0]
    assert val == pytest.approx(0.5 ** (2.0 / 3.0) * np.sin(np.pi / 3.0), abs=1e-14)
    # u vanishes on both legs of the reentrant corner (theta = 0 and 3pi/2)
    above = case.u(np.array([[0.5, 0.0]]), np.array([0.5, 0.1]))[0]
    below = case.u(np.array([[0.0, -0.5]]), None)[0]
    assert abs(above) < 1e-13
    assert abs(below) < 1e-13


def test_tc2_branch_cut():
    """Slit case: the positive x axis is two-valued, branch chosen by the hint."""
    case = make_case("tc2")
    pt = np.array([[0.5, 0.0]])
    above = case.u(pt, np.array([0.5, 0.1]))[0]  # theta = 0
    below = case.u(pt, np.array([0.5, -0.1]))[0]  # theta = 2 pi
    assert abs(above) < 1e-13  # sin(0) = 0
    assert below == pytest.approx(0.5**0.25 * np.sin(np.pi / 2.0), abs=1e-13)
    # Neumann flux on the lower slit face: normal is +e_y there.
    gn = case.g_N(pt, np.array([0.0, 1.0]), hint=np.array([0.5, -0.1]))
    assert np.isfinite(gn).all()


def test_tc3_homogeneous_dirichlet():
    case = make_case("tc3")
    edge = np.array([[0.0, 0.3], [1.0, 0.7], [0.4, 0.0], [0.6, 1.0]])
    assert np.allclose(case.u(edge, None), 0.0, atol=1e-15)
    # peak value at the center
    assert case.u(np.array([[0.5, 0.5]]), None)[0] == pytest.approx(0.25, abs=1e-15)


def test_bc_tags():
    tc1 = make_case("tc1")
    assert tc1.domain == "lshape"
    assert tc1.bc_of_tag("dirichlet") == "D"
    assert tc1.bc_of_tag("neumann") == "N"
    tc2 = make_case("tc2")
    assert tc2.domain == "slit"
    assert tc2.bc_of_tag("slit_upper") == "D"
    assert tc2.bc_of_tag("slit_lower") == "N"
    assert make_case("tc3").has_exact
    with pytest.raises(ValueError):
        make_case("nope")


def test_sigma_exact_is_minus_grad():
    case = make_case("smooth")
    pts = RNG.uniform(0.1, 0.9, size=(6, 2))
    assert np.allclose(case.sigma_exact(pts), -case.grad(pts), atol=1e-15)
