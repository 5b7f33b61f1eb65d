"""Primal VEM: projector consistency, patch tests, manufactured solutions."""

import numpy as np
import pytest

from hypervem.cases import Case, make_case
from hypervem.dofmap import DegreeMap
from hypervem.estimators import h1_error_primal
from hypervem.mesh import build_mesh
from hypervem.primal import PrimalElement, solve_primal

from conftest import single_cell_mesh

RNG = np.random.default_rng(3)


def h1_err(case, sol):
    return float(np.sqrt(h1_error_primal(case, sol).sum()))


def element(verts, p, stab="drecipe"):
    mesh = single_cell_mesh(verts)
    return PrimalElement(mesh, 0, DegreeMap.uniform(mesh, p), stab)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_projector_reproduces_polynomials(shape_verts, p):
    """Pi applied to the interpolant of q in P_p returns q's coefficients."""
    el = element(shape_verts, p)
    coeffs = RNG.uniform(-1, 1, size=el.basis.dim)

    def q(pts):
        return el.basis.eval(pts) @ coeffs

    dofs = el.interpolate(q)
    assert np.allclose(el.Pi @ dofs, coeffs, atol=1e-11)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_pi_d_identity(shape_verts, p):
    """Pi D = I: D maps polynomial coefficients to dofs, Pi inverts it."""
    el = element(shape_verts, p)
    assert np.allclose(el.Pi @ el.D, np.eye(el.basis.dim), atol=1e-11)


@pytest.mark.parametrize("stab", ["drecipe", "theoretical"])
def test_stiffness_symmetric_psd_with_constant_kernel(shape_verts, stab):
    el = element(shape_verts, 3, stab=stab)
    A = el.A
    assert np.allclose(A, A.T, atol=1e-12 * np.abs(A).max())
    w = np.linalg.eigvalsh(A)
    assert w[0] > -1e-12 * w[-1]
    # constants are in the kernel
    ones = el.interpolate(lambda pts: np.ones(np.atleast_2d(pts).shape[0]))
    assert np.linalg.norm(A @ ones) < 1e-11 * np.linalg.norm(A)


def test_consistency_on_polynomials(shape_verts):
    """a_h(I q, I r) equals the exact Dirichlet form for q, r in P_p."""
    p = 2
    el = element(shape_verts, p)
    cq, cr = RNG.uniform(-1, 1, size=(2, el.basis.dim))
    dq = el.interpolate(lambda pts: el.basis.eval(pts) @ cq)
    dr = el.interpolate(lambda pts: el.basis.eval(pts) @ cr)
    pts, w = el.quad(2 * p)
    g = el.basis.grad(pts)
    gq = np.einsum("qad,a->qd", g, cq)
    gr = np.einsum("qad,a->qd", g, cr)
    exact = el.kappa * np.sum(w * np.sum(gq * gr, axis=1))
    assert dq @ el.A @ dr == pytest.approx(exact, abs=1e-11 * max(1.0, abs(exact)))


def _poly_case(p):
    """Harmonic polynomial of degree p on the unit square, Dirichlet bc."""
    # Re((x + iy)^p) is harmonic for every p.
    def u(pts, hint=None):
        pts = np.atleast_2d(pts)
        return np.real((pts[:, 0] + 1j * pts[:, 1]) ** p)

    def grad(pts, hint=None):
        pts = np.atleast_2d(pts)
        z = pts[:, 0] + 1j * pts[:, 1]
        dz = p * z ** (p - 1)
        return np.column_stack([np.real(dz), -np.imag(dz)])

    def f(pts):
        return np.zeros(np.atleast_2d(pts).shape[0])

    return Case(f"harmonic{p}", "unit_square", {"dirichlet": "D"}, u, grad, f)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_patch_test(p):
    """Exact polynomial solutions are reproduced to machine precision."""
    mesh = build_mesh("unit_square", "cartesian", 1)
    sol = solve_primal(mesh, DegreeMap.uniform(mesh, p), _poly_case(p))
    assert h1_err(_poly_case(p), sol) < 1e-10


def test_tc3_exact_at_p4():
    """tc3 has a degree-4 solution: p = 4 solves it exactly."""
    case = make_case("tc3")
    mesh = build_mesh("unit_square", "cartesian", 1)
    sol = solve_primal(mesh, DegreeMap.uniform(mesh, 4), case)
    assert h1_err(case, sol) < 1e-9


def test_h_convergence_smooth():
    case = make_case("tc3")
    errs = []
    for lvl in (1, 2, 3):
        mesh = build_mesh("unit_square", "cartesian", lvl)
        sol = solve_primal(mesh, DegreeMap.uniform(mesh, 1), case)
        errs.append(h1_err(case, sol))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 0.9)  # O(h) in H1 for p = 1


def test_variable_degrees():
    """Mixed p over the mesh still passes the patch test for the lowest p."""
    mesh = build_mesh("unit_square", "cartesian", 1)
    dm = DegreeMap.uniform(mesh, 2)
    dm.cell[0] = 3
    dm.edge[:] = np.maximum(dm.edge, 2)
    # bump edge degrees of cell 0's edges to 3
    for eid, _ in mesh.cell_edges[0]:
        dm.edge[eid] = 3
    sol = solve_primal(mesh, dm, _poly_case(2))
    assert h1_err(_poly_case(2), sol) < 1e-10


def test_solution_determinism():
    case = make_case("tc3")
    mesh = build_mesh("unit_square", "cartesian", 2)
    dm = DegreeMap.uniform(mesh, 2)
    u1 = solve_primal(mesh, dm, case).u
    u2 = solve_primal(mesh, dm, case).u
    assert np.array_equal(u1, u2)
