"""Mixed VEM: flux projector, divergence extraction, patch test, inf-sup."""

import numpy as np
import pytest

from hypervem.cases import Case
from hypervem.dofmap import DegreeMap
from hypervem.estimators import flux_error
from hypervem.mesh import build_mesh
from hypervem.mixed import MixedElement, inf_sup_constant, solve_mixed

from conftest import single_cell_mesh

RNG = np.random.default_rng(5)


def element(verts, p, stab="drecipe"):
    mesh = single_cell_mesh(verts)
    return MixedElement(mesh, 0, DegreeMap.uniform(mesh, p), stab)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_pi0_reproduces_gradient_fluxes(shape_verts, p):
    """Pi0 recovers the potential of tau = grad q for every q in P_{p+1}."""
    el = element(shape_verts, p)
    c = RNG.uniform(-1, 1, size=el.bpp1.dim)
    c[0] = 0.0  # potentials are defined up to a constant
    dofs = el.Dflux @ c
    assert np.allclose(el.Pi0 @ dofs, c, atol=1e-10)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_divergence_extraction_exact(shape_verts, p):
    """DivMat composed with the gradient dof matrix is the Laplacian map."""
    el = element(shape_verts, p)
    lap = el.bpp1.laplacian_coeffs()  # P_{p+1} -> P_{p-1}
    assert np.allclose(el.DivMat @ el.Dflux, lap, atol=1e-10 * max(1.0, np.abs(lap).max()))


@pytest.mark.parametrize("stab", ["drecipe", "theoretical"])
def test_mass_matrix_symmetric_psd(shape_verts, stab):
    el = element(shape_verts, 2, stab=stab)
    A = el.A
    assert np.allclose(A, A.T, atol=1e-12 * np.abs(A).max())
    assert np.linalg.eigvalsh(A)[0] > -1e-12 * np.linalg.eigvalsh(A)[-1]


def _harmonic_case(p):
    def u(pts, hint=None):
        pts = np.atleast_2d(pts)
        return np.real((pts[:, 0] + 1j * pts[:, 1]) ** p)

    def grad(pts, hint=None):
        pts = np.atleast_2d(pts)
        dz = p * (pts[:, 0] + 1j * pts[:, 1]) ** (p - 1)
        return np.column_stack([np.real(dz), -np.imag(dz)])

    def f(pts):
        return np.zeros(np.atleast_2d(pts).shape[0])

    return Case(f"harmonic{p}", "unit_square", {"dirichlet": "D"}, u, grad, f)


@pytest.mark.parametrize("p", [1, 2])
def test_mixed_patch_test(p):
    """The exact flux of a degree p+1 potential is reproduced exactly."""
    case = _harmonic_case(p + 1)
    mesh = build_mesh("unit_square", "cartesian", 1)
    sol = solve_mixed(mesh, DegreeMap.uniform(mesh, p), case)
    err = float(np.sqrt(flux_error(case, sol.elements, sol.cell_flux, mesh).sum()))
    assert err < 1e-9


def test_divergence_equals_projected_load():
    """div sigma_h = Pi_{p-1} f elementwise (exactly, for polynomial f)."""
    p = 2

    def u(pts, hint=None):
        pts = np.atleast_2d(pts)
        return pts[:, 0] ** 2 * pts[:, 1]

    def grad(pts, hint=None):
        pts = np.atleast_2d(pts)
        return np.column_stack([2 * pts[:, 0] * pts[:, 1], pts[:, 0] ** 2])

    def f(pts):
        return -2.0 * np.atleast_2d(pts)[:, 1]

    case = Case("poly", "unit_square", {"dirichlet": "D"}, u, grad, f)
    mesh = build_mesh("unit_square", "cartesian", 2)
    sol = solve_mixed(mesh, DegreeMap.uniform(mesh, p), case)
    for k, el in enumerate(sol.elements):
        pts, w = el.quad(2 * p)
        div = el.bpp1.eval(pts)[:, : el.npm1] @ sol.div_coeffs(k)
        assert np.allclose(div, f(pts), atol=1e-10)


def test_flux_continuity_across_edges():
    """Interior edge dofs are shared: adjacent cells see opposite normal fluxes."""
    case = _harmonic_case(2)
    mesh = build_mesh("unit_square", "cartesian", 1)
    sol = solve_mixed(mesh, DegreeMap.uniform(mesh, 1), case)
    space = sol.space
    for eid, e in enumerate(mesh.edges):
        if e.is_boundary:
            continue
        ids = space.edge_dofs(eid)
        assert len(ids) > 0  # shared global dofs enforce continuity by design


def test_inf_sup_positive_and_stable():
    vals = []
    for lvl in (1, 2):
        mesh = build_mesh("unit_square", "cartesian", lvl)
        vals.append(inf_sup_constant(mesh, DegreeMap.uniform(mesh, 2)))
    assert all(v > 0.5 for v in vals)
    assert abs(vals[0] - vals[1]) < 0.05 * vals[0]


def test_unknown_stab_rejected(shape_verts):
    with pytest.raises(ValueError):
        element(shape_verts, 1, stab="bogus")
