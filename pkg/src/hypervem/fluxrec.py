"""Equilibrated flux reconstruction from the primal solution.

For every mesh vertex a small mixed saddle problem is solved on its element
patch, driven by a virtual partition-of-unity function (hat-like traces,
moments of the constant 1/N_K).  Interior patches carry a zero-normal-trace
flux space and a zero-mean scalar space (one Lagrange multiplier); patches of
Dirichlet-boundary vertices leave the normal trace free on Dirichlet edges
and use the full scalar space.  Neumann patch edges carry the imposed trace
-phi_nu g_N.  Summing the patch fluxes yields sigma_rec with

    (div sigma_rec, q)_K = (f, q)_K   for all q in P_{p-1}(K),

which is checked a posteriori.  The same module provides the global variant
(one domain-wide saddle problem) used as a diagnostic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import linalg
from .mixed import MixedElement, MixedSpace
from .polybasis import space_dim
from .quadrature import gauss_lobatto_rule, gauss_rule

COMPAT_TOL = 1e-10


class CompatibilityError(RuntimeError):
    """Patch right-hand side violates the solvability condition."""


@dataclass
class FluxReconstruction:
    mesh: object
    space: MixedSpace
    elements: list
    sigma: np.ndarray
    pou2: np.ndarray  # per-vertex squared partition-of-unity misfit
    wall_time: float = 0.0

    def cell_flux(self, k):
        ids, signs = self.space.cell_flux_map(k)
        return signs * self.sigma[ids]

    def div_coeffs(self, k):
        return self.elements[k].DivMat @ self.cell_flux(k)


def pou_dofs(ep, i):
    """Primal dof vector of the partition-of-unity function of local vertex i."""
    phi = np.zeros(ep.ndof)
    phi[i] = 1.0
    nv = ep.nv
    for j, e in enumerate(ep.edges):
        gl, _ = gauss_lobatto_rule(e.degree + 1)
        t = 0.5 * (gl + 1.0)
        if j == i:  # edge from vertex i: trace 1 - t
            phi[e.trace_locs[1:-1]] = 1.0 - t[1:-1]
        elif (j + 1) % nv == i:  # edge into vertex i: trace t
            phi[e.trace_locs[1:-1]] = t[1:-1]
    if ep.nmom:
        phi[ep.mom_locs] = ep.Hfull[0, : ep.nmom] / (nv * ep.area)
    return phi


def _cell_cache(case, psol, melems):
    """Per-cell quantities shared by all patches of the reconstruction."""
    cache = []
    for k, em in enumerate(melems):
        ep = psol.elements[k]
        gu = np.zeros(em.bpp1.dim)
        gu[: ep.basis.dim] = psol.proj_coeffs(k)
        r1_base = -em.Pi0.T @ (em.Ggrad @ gu)
        pts, w = em.quad(2 * em.p + 4)
        fm = (w * case.f(pts)) @ em.bpp1.eval(pts)[:, : em.npm1]
        im = em.Mpp1[0, : em.npm1]
        cache.append({"gu": gu, "r1": r1_base, "fm": fm, "im": im, "quad": (pts, w)})
    return cache


def reconstruct_flux(case, psol, stab="drecipe"):
    """Patchwise equilibrated flux; returns a FluxReconstruction."""
    t0 = time.perf_counter()
    mesh = psol.mesh
    degrees = psol.degrees
    space = MixedSpace(mesh, degrees)
    melems = [MixedElement(mesh, k, degrees, stab) for k in range(mesh.num_cells)]
    cache = _cell_cache(case, psol, melems)
    sigma = np.zeros(space.ndof)
    pou2 = np.zeros(mesh.num_vertices)

    for nu in range(mesh.num_vertices):
        cells = mesh.vertex_patch(nu)
        if not cells:
            continue
        interior, boundary = mesh.patch_edges(nu)
        free_edges = list(interior)
        imposed = {}  # global dof -> value
        boundary_vertex = any(
            mesh.edges[eid].is_boundary and nu in (mesh.edges[eid].a, mesh.edges[eid].b)
            for eid in boundary
        )
        on_dirichlet = False
        for eid in boundary:
            e = mesh.edges[eid]
            if not e.is_boundary:
                continue
            bc = case.bc_of_tag(e.tag)
            if bc == "D":
                # Free normal trace on Dirichlet edges only for boundary
                # patches; interior patches carry zero trace on all of
                # the patch boundary.
                if boundary_vertex:
                    free_edges.append(eid)
                    on_dirichlet = True
            else:  # Neumann: impose n.sigma = -phi_nu g_N at the Gauss nodes
                pa, pb = mesh.points[e.a], mesh.points[e.b]
                x, _ = gauss_rule(degrees.edge[eid] + 1)
                t = 0.5 * (x + 1.0)
                pts = pa[None, :] + t[:, None] * (pb - pa)[None, :]
                if nu == e.a:
                    phi = 1.0 - t
                elif nu == e.b:
                    phi = t
                else:
                    phi = np.zeros_like(t)
                hint = mesh.points[mesh.cells[e.cells[0]]].mean(axis=0)
                vals = -phi * case.g_N(pts, e.normal, hint)
                for d, v in zip(space.edge_dofs(eid), vals):
                    imposed[d] = v

        free = []
        for eid in free_edges:
            free.extend(space.edge_dofs(eid))
        for k in cells:
            free.extend(space.cell_internal_dofs(k))
        free = np.array(sorted(free), dtype=int)
        g2l = {g: i for i, g in enumerate(free)}
        nfree = free.size
        nscal = sum(space_dim(degrees.cell[k] - 1) for k in cells)

        A = np.zeros((nfree, nfree))
        B = np.zeros((nscal, nfree))
        rhs_f = np.zeros(nfree)
        rhs_s = np.zeros(nscal)
        mvec = np.zeros(nscal)
        scale = 0.0
        srow = 0
        patch_vals = {}  # global dof -> value, for the pou diagnostic
        for d, v in imposed.items():
            patch_vals[d] = v
        cell_rows = []
        for k in cells:
            em = melems[k]
            ep = psol.elements[k]
            cc = cache[k]
            nv = ep.nv
            i_loc = mesh.cells[k].index(nu)
            phi = pou_dofs(ep, i_loc)
            u_loc = psol.cell_dof_values(k)
            cK = (phi @ ep.SQ @ u_loc) / ep.area

            # scalar right-hand side: -(f/N - grad Pi phi . grad Pi u - c_K, m_a)
            pts, w = cc["quad"]
            gphi = ep.proj_grad(ep.Pi @ phi, pts)
            gu_pts = ep.proj_grad(psol.proj_coeffs(k), pts)
            mg = (w * (gphi * gu_pts).sum(axis=1)) @ em.bpp1.eval(pts)[:, : em.npm1]
            r2 = -(cc["fm"] / nv - mg - cK * cc["im"])
            scale += np.abs(cc["fm"]).sum() / nv + np.abs(mg).sum() + abs(cK) * np.abs(
                cc["im"]
            ).sum()

            ids, signs = space.cell_flux_map(k)
            A_g = signs[:, None] * em.A * signs[None, :]
            B_g = em.B * signs[None, :]
            r1_g = signs * (cc["r1"] / nv)
            sel = np.array([g2l.get(g, -1) for g in ids])
            inside = sel >= 0
            cons_vals = np.array([imposed.get(g, 0.0) for g in ids])
            rows = sel[inside]
            A[np.ix_(rows, rows)] += A_g[np.ix_(inside, inside)]
            rhs_f[rows] += r1_g[inside] - A_g[np.ix_(inside, ~inside)] @ cons_vals[~inside]
            sblock = np.arange(srow, srow + em.npm1)
            B[np.ix_(sblock, rows)] += B_g[:, inside]
            rhs_s[sblock] += r2 - B_g[:, ~inside] @ cons_vals[~inside]
            mvec[sblock] = cc["im"]
            cell_rows.append((k, sblock))
            srow += em.npm1

        if on_dirichlet:
            x, _ = linalg.solve_saddle_dense(
                A, B, rhs_f, rhs_s, label=f"patch of vertex {nu}"
            )
        else:
            compat = sum(rhs_s[blk[0]] for _, blk in cell_rows)
            if abs(compat) > COMPAT_TOL * max(scale, 1e-14):
                raise CompatibilityError(
                    f"vertex {nu}: compatibility residual {compat:.3e} "
                    f"(scale {scale:.3e})"
                )
            n = nfree + nscal
            K = np.zeros((n + 1, n + 1))
            K[:nfree, :nfree] = A
            K[nfree:n, :nfree] = B
            K[:nfree, nfree:n] = B.T
            K[nfree:n, n] = mvec
            K[n, nfree:n] = mvec
            rhs = np.concatenate([rhs_f, rhs_s, [0.0]])
            sol = linalg.solve_dense(K, rhs, label=f"patch of vertex {nu}")
            x = sol[:nfree]

        sigma[free] += x
        for d, v in imposed.items():
            sigma[d] += v
        for g, v in zip(free, x):
            patch_vals[g] = v

        # partition-of-unity diagnostic on the patch
        acc = 0.0
        for k, _ in cell_rows:
            em = melems[k]
            ep = psol.elements[k]
            ids, signs = space.cell_flux_map(k)
            loc = signs * np.array([patch_vals.get(g, 0.0) for g in ids])
            pts, w = em.quad(2 * (em.p + 1))
            field = em.pi0_eval(em.Pi0 @ loc, pts)
            gu_pts = ep.proj_grad(psol.proj_coeffs(k), pts) / ep.nv
            acc += np.sum(w * ((field + gu_pts) ** 2).sum(axis=1))
        pou2[nu] = acc

    wall = time.perf_counter() - t0
    return FluxReconstruction(mesh, space, melems, sigma, pou2, wall)


def eta_flux(case, psol, rec):
    """Per-element squared flux estimator (same misfit form as eta_eq)."""
    from .estimators import _eta_misfit

    return _eta_misfit(psol, rec.elements, rec.cell_flux)


def equilibration_residual(case, rec):
    """Max relative defect of (div sigma_rec, q)_K = (f, q)_K, q in P_{p-1}."""
    worst = 0.0
    for k, em in enumerate(rec.elements):
        pts, w = em.quad(2 * em.p + 4)
        fm = (w * case.f(pts)) @ em.bpp1.eval(pts)[:, : em.npm1]
        lhs = em.Mpm1 @ rec.div_coeffs(k)
        # Relative to the data and the flux size so that f = 0 does not
        # degenerate into a 0/0 comparison.
        flux_scale = em.h * np.abs(rec.cell_flux(k)).max()
        scale = max(np.abs(fm).max(), np.abs(lhs).max(), flux_scale, 1e-14)
        worst = max(worst, np.abs(lhs - fm).max() / scale)
    return worst


def oscillation(case, rec):
    """sqrt(sum_K (h/p)^2 ||f - div sigma_rec||_K^2)."""
    total = 0.0
    for k, em in enumerate(rec.elements):
        pts, w = em.quad(2 * em.p + 6)
        dv = em.bpp1.eval(pts)[:, : em.npm1] @ rec.div_coeffs(k)
        total += (em.h / em.p) ** 2 * np.sum(w * (case.f(pts) - dv) ** 2)
    return float(np.sqrt(total))


def pou_quantity(rec):
    return float(np.sqrt(rec.pou2.sum()))


def global_flux_misfit(case, psol, stab="drecipe"):
    """Global variant: one saddle problem on the whole mesh.

    Returns (r_norm, mismatch): the L2 norm of the auxiliary scalar r and
    ||Pi0 sigma + grad Pi u||_0.  Meant for pure Dirichlet problems.
    """
    mesh = psol.mesh
    degrees = psol.degrees
    space = MixedSpace(mesh, degrees)
    melems = [MixedElement(mesh, k, degrees, stab) for k in range(mesh.num_cells)]
    cache = _cell_cache(case, psol, melems)
    nf, ns = space.ndof, space.nscal
    rows, cols, vals = [], [], []
    rhs = np.zeros(nf + ns)

    def add_block(r, c, M):
        rows.append(np.repeat(r, c.size))
        cols.append(np.tile(c, r.size))
        vals.append(M.ravel())

    for k, em in enumerate(melems):
        ids, signs = space.cell_flux_map(k)
        sdofs = nf + space.cell_scalar_dofs(k)
        add_block(ids, ids, signs[:, None] * em.A * signs[None, :])
        B_g = em.B * signs[None, :]
        add_block(sdofs, ids, B_g)
        add_block(ids, sdofs, B_g.T)
        rhs[ids] += signs * cache[k]["r1"]
        rhs[sdofs] -= cache[k]["fm"]
    K = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nf + ns, nf + ns),
    )
    x = linalg.solve_sparse(K, rhs, label="global flux misfit system")
    sigma, r = x[:nf], x[nf:]

    r_norm2 = 0.0
    mismatch2 = 0.0
    for k, em in enumerate(melems):
        rk = r[space.cell_scalar_dofs(k)]
        r_norm2 += rk @ em.Mpm1 @ rk
        ids, signs = space.cell_flux_map(k)
        loc = signs * sigma[ids]
        pts, w = em.quad(2 * (em.p + 1))
        field = em.pi0_eval(em.Pi0 @ loc, pts)
        gu = psol.elements[k].proj_grad(psol.proj_coeffs(k), pts)
        mismatch2 += np.sum(w * ((field + gu) ** 2).sum(axis=1))
    return float(np.sqrt(r_norm2)), float(np.sqrt(mismatch2))
