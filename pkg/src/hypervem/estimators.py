"""A posteriori error estimators and reference error norms.

Three per-element estimators:

* equilibrated (``eta_eq``): misfit between the projected primal gradient and
  the projected mixed flux plus both stabilization remainders;
* residual (``eta_res``): classical hp residual estimator (kappa must be 1);
* flux (the same misfit form evaluated with a locally reconstructed,
  equilibrated flux; see flux_reconstruction.py).

Reference errors integrate against the exact solution with a high-order
sub-triangulated rule (degree 2p + ERR_QUAD_EXTRA).
"""

from __future__ import annotations

import numpy as np

from . import linalg
from .polybasis import space_dim
from .quadrature import edge_rule

ERR_QUAD_EXTRA = 6


def h1_error_primal(case, psol, extra=ERR_QUAD_EXTRA):
    """Per-element squared energy error ||kappa^1/2 (grad u - grad Pi u_h)||^2."""
    mesh = psol.mesh
    out = np.zeros(mesh.num_cells)
    for k, el in enumerate(psol.elements):
        pts, w = el.quad(2 * el.p + extra)
        g = el.proj_grad(psol.proj_coeffs(k), pts)
        ge = case.grad(pts, mesh.cell_geom(k).centroid)
        out[k] = el.kappa * np.sum(w * ((ge - g) ** 2).sum(axis=1))
    return out


def flux_error(case, melements, flux_of_cell, mesh, extra=ERR_QUAD_EXTRA):
    """Per-element squared error ||kappa^-1/2 (sigma - Pi0 sigma_h)||^2."""
    out = np.zeros(mesh.num_cells)
    for k, el in enumerate(melements):
        local = flux_of_cell(k)
        coeffs = el.Pi0 @ local
        pts, w = el.quad(2 * (el.p + 1) + extra)
        sh = el.pi0_eval(coeffs, pts)
        se = case.sigma_exact(pts, mesh.cell_geom(k).centroid)
        out[k] = (1.0 / el.kappa) * np.sum(w * ((se - sh) ** 2).sum(axis=1))
    return out


def eta_eq(psol, msol):
    """Per-element squared equilibrated estimator using the mixed solution."""
    return _eta_misfit(psol, msol.elements, msol.cell_flux)


def _eta_misfit(psol, melements, flux_of_cell):
    mesh = psol.mesh
    out = np.zeros(mesh.num_cells)
    for k in range(mesh.num_cells):
        ep = psol.elements[k]
        em = melements[k]
        u_loc = psol.cell_dof_values(k)
        s_loc = flux_of_cell(k)
        pts, w = em.quad(2 * (em.p + 1))
        gu = ep.proj_grad(psol.proj_coeffs(k), pts)
        gs = em.pi0_eval(em.Pi0 @ s_loc, pts)
        kap = ep.kappa
        mis = np.sqrt(kap) * gu + gs / np.sqrt(kap)
        out[k] = (
            np.sum(w * (mis**2).sum(axis=1))
            + u_loc @ ep.SQ @ u_loc
            + s_loc @ em.S @ s_loc
        )
    return out


def eta_res(case, psol):
    """Per-element squared hp residual estimator (requires kappa = 1)."""
    mesh = psol.mesh
    if not np.allclose(mesh.kappa, 1.0):
        raise ValueError("residual estimator is defined for kappa = 1 only")
    out = np.zeros(mesh.num_cells)
    # volume residual + stabilization
    for k, el in enumerate(psol.elements):
        coeffs = psol.proj_coeffs(k)
        deg = max(el.p - 2, 0)
        nmom = space_dim(deg)
        pts, w = el.quad(2 * el.p + 4)
        vals = el.basis.eval(pts)[:, :nmom]
        fm = (w * case.f(pts)) @ vals
        M = np.einsum("q,qa,qb->ab", w, vals, vals)
        fproj = linalg.solve_spd(M, fm, label=f"f projection, cell {k}")
        resid = vals @ fproj
        if el.p >= 2:
            lap = el.basis.laplacian_coeffs() @ coeffs
            resid = resid + el.basis.eval(pts)[:, : space_dim(el.p - 2)] @ lap
        u_loc = psol.cell_dof_values(k)
        out[k] = (el.h**2 / el.p**2) * np.sum(w * resid**2) + u_loc @ el.SQ @ u_loc
    # edge jumps: 1/2 (h_e / p_e) || [n_e . grad Pi u] ||_e^2 per incident cell
    coeffs_of = [psol.proj_coeffs(k) for k in range(mesh.num_cells)]
    for eid, e in enumerate(mesh.edges):
        if e.is_boundary and case.bc_of_tag(e.tag) == "D":
            continue
        pe = int(psol.degrees.edge[eid])
        pa, pb = mesh.points[e.a], mesh.points[e.b]
        pts, w = edge_rule(pa, pb, pe + 1)
        jump = np.zeros(pts.shape[0])
        for k in e.cells:
            el = psol.elements[k]
            jump_k = el.proj_grad(coeffs_of[k], pts) @ e.normal
            sgn = 1.0 if k == e.cells[0] else -1.0
            jump += sgn * jump_k
        if e.is_boundary:
            hint = mesh.points[mesh.cells[e.cells[0]]].mean(axis=0)
            jump -= case.g_N(pts, e.normal, hint)
        h_e = np.linalg.norm(pb - pa)
        contrib = 0.5 * (h_e / pe) * np.sum(w * jump**2)
        for k in e.cells:
            out[k] += contrib
    return out


def efficiency_indices(eta2_eq, eta2_res, err2_primal, err2_flux):
    """(I_eq, I_res) global efficiency indices."""
    I_eq = np.sqrt(eta2_eq.sum() / (err2_primal.sum() + err2_flux.sum()))
    I_res = np.sqrt(eta2_res.sum() / err2_primal.sum())
    return I_eq, I_res
