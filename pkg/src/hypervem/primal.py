"""Primal hp virtual element method for the diffusion problem.

Local spaces on a polygon K of degree p: traces are piecewise polynomials of
the per-edge degree, the Laplacian lies in P_{p-2}(K).  Degrees of freedom:
vertex values, values at the internal Gauss-Lobatto nodes of every edge and
scaled moments against the monomials of P_{p-2}(K).

The energy projector onto P_p(K) is computed elementwise by integration by
parts; the discrete bilinear form uses the projected-gradient consistency
term plus a stabilization on the (I - projector) complement, either the
diagonal "D-recipe" (default) or the hp scaling h^2/p^2 volume + h/p
boundary form ("theoretical").
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import linalg
from .dofmap import DegreeMap, lagrange_matrix
from .polybasis import MonomialBasis, space_dim
from .quadrature import edge_rule, gauss_lobatto_rule, gauss_rule, polygon_rule

STABILIZATIONS = ("drecipe", "theoretical")


@dataclass
class EdgeTrace:
    """Per loop-edge trace bookkeeping for one element."""

    eid: int
    direction: int  # +1 if traversed a->b
    degree: int
    length: float
    normal: np.ndarray  # outward for the element
    trace_locs: np.ndarray  # local dof ids of the p+1 Gauss-Lobatto values
    gl_points: np.ndarray  # physical Gauss-Lobatto points, traversal order
    gauss_points: np.ndarray  # physical Gauss points (degree+1 of them)
    gauss_weights: np.ndarray  # physical weights (sum to length)
    lag_at_gauss: np.ndarray  # trace Lagrange basis evaluated at Gauss points


class PrimalSpace:
    """Global dof numbering: vertices, edge internal GL values, cell moments."""

    def __init__(self, mesh, degrees):
        self.mesh = mesh
        self.degrees = degrees
        nv = mesh.num_vertices
        self.edge_offset = np.zeros(len(mesh.edges) + 1, dtype=int)
        for i, _ in enumerate(mesh.edges):
            self.edge_offset[i + 1] = self.edge_offset[i] + (degrees.edge[i] - 1)
        self.edge_base = nv
        ncell = mesh.num_cells
        self.cell_offset = np.zeros(ncell + 1, dtype=int)
        for k in range(ncell):
            self.cell_offset[k + 1] = self.cell_offset[k] + space_dim(
                degrees.cell[k] - 2
            )
        self.cell_base = self.edge_base + self.edge_offset[-1]
        self.ndof = self.cell_base + self.cell_offset[-1]

    def edge_dofs(self, eid):
        lo = self.edge_base + self.edge_offset[eid]
        return np.arange(lo, lo + self.degrees.edge[eid] - 1)

    def cell_moment_dofs(self, k):
        lo = self.cell_base + self.cell_offset[k]
        return np.arange(lo, lo + self.cell_offset[k + 1] - self.cell_offset[k])

    def cell_dofs(self, k):
        loop = self.mesh.cells[k]
        ids = list(loop)
        for eid, direction in self.mesh.cell_edges[k]:
            ed = self.edge_dofs(eid)
            ids.extend(ed if direction > 0 else ed[::-1])
        ids.extend(self.cell_moment_dofs(k))
        return np.array(ids, dtype=int)


class PrimalElement:
    """Local projectors, stabilization and stiffness for one element."""

    def __init__(self, mesh, k, degrees, stab="drecipe"):
        if stab not in STABILIZATIONS:
            raise ValueError(f"unknown stabilization '{stab}'")
        self.k = k
        self.stab = stab
        self.kappa = float(mesh.kappa[k])
        geom = mesh.cell_geom(k)
        self.area = geom.area
        self.centroid = geom.centroid
        self.h = geom.diameter
        self.p = int(degrees.cell[k])
        loop = mesh.cells[k]
        self.nv = len(loop)
        self.verts = mesh.points[loop]
        self.basis = MonomialBasis(self.centroid[0], self.centroid[1], self.h, self.p)
        self.nmom = space_dim(self.p - 2)
        self._quads = {}

        # trace structure, local dof layout
        edge_locs = []
        offset = self.nv
        per_edge_internal = []
        for eid, direction in mesh.cell_edges[k]:
            pe = int(degrees.edge[eid])
            per_edge_internal.append((pe, offset))
            offset += pe - 1
        self.nedof = offset - self.nv
        self.mom_locs = np.arange(offset, offset + self.nmom)
        self.ndof = offset + self.nmom

        self.edges = []
        for i, (eid, direction) in enumerate(mesh.cell_edges[k]):
            pe, off = per_edge_internal[i]
            a = self.verts[i]
            b = self.verts[(i + 1) % self.nv]
            length = float(np.linalg.norm(b - a))
            t = (b - a) / length
            normal = np.array([t[1], -t[0]])
            gl, _ = gauss_lobatto_rule(pe + 1)
            tloc = 0.5 * (gl + 1.0)
            gl_pts = a[None, :] + tloc[:, None] * (b - a)[None, :]
            trace_locs = np.concatenate(
                [[i], np.arange(off, off + pe - 1), [(i + 1) % self.nv]]
            ).astype(int)
            gpts, gw = edge_rule(a, b, pe + 1)
            gx, _ = gauss_rule(pe + 1)
            lag = lagrange_matrix(gl, gx)
            self.edges.append(
                EdgeTrace(eid, direction, pe, length, normal, trace_locs, gl_pts, gpts, gw, lag)
            )
        self.perimeter = sum(e.length for e in self.edges)

        self._build_projectors()
        self._build_stiffness()

    # ------------------------------------------------------------------
    def quad(self, degree):
        if degree not in self._quads:
            self._quads[degree] = polygon_rule(self.verts, degree)
        return self._quads[degree]

    def _build_projectors(self):
        npoly = self.basis.dim
        ndof = self.ndof
        kap = self.kappa

        pts, w = self.quad(max(2 * self.p - 2, 1))
        grads = self.basis.grad(pts)  # (nq, npoly, 2)
        Gt = kap * np.einsum("q,qad,qbd->ab", w, grads, grads)
        self.Gtilde = Gt

        B = np.zeros((npoly, ndof))
        if self.p >= 2:
            Lap = self.basis.laplacian_coeffs()  # (nmom, npoly)
            B[:, self.mom_locs] -= kap * self.area * Lap.T
        for e in self.edges:
            dn = self.basis.grad(e.gauss_points) @ e.normal  # (nq, npoly)
            B[:, e.trace_locs] += kap * (dn * e.gauss_weights[:, None]).T @ e.lag_at_gauss
        # constant row: boundary mean constraint
        B[0, :] = 0.0
        G = Gt.copy()
        G[0, :] = 0.0
        for e in self.edges:
            B[0, e.trace_locs] += (e.gauss_weights @ e.lag_at_gauss) / self.perimeter
            G[0, :] += (
                e.gauss_weights @ self.basis.eval(e.gauss_points)
            ) / self.perimeter
        self.Pi = linalg.solve_dense(G, B, label=f"energy projector, cell {self.k}")

        # dof matrix of the monomials
        D = np.zeros((ndof, npoly))
        D[: self.nv, :] = self.basis.eval(self.verts)
        for e in self.edges:
            vals = self.basis.eval(e.gl_points)
            D[e.trace_locs[1:-1], :] = vals[1:-1, :]
        mass_pts, mass_w = self.quad(2 * self.p)
        vals = self.basis.eval(mass_pts)
        self.Hfull = np.einsum("q,qa,qb->ab", mass_w, vals, vals)
        if self.nmom:
            D[self.mom_locs, :] = self.Hfull[: self.nmom, :] / self.area
        self.D = D

        self.H = self.Hfull[: self.nmom, : self.nmom]
        Pi0 = np.zeros((self.nmom, ndof))
        if self.nmom:
            Pi0[:, self.mom_locs] = linalg.solve_spd(
                self.H, self.area * np.eye(self.nmom), label=f"moment mass, cell {self.k}"
            )
        self.Pi0 = Pi0

    def _build_stiffness(self):
        kap = self.kappa
        self.Kc = self.Pi.T @ self.Gtilde @ self.Pi
        P = self.D @ self.Pi
        IP = np.eye(self.ndof) - P
        if self.stab == "drecipe":
            s = np.maximum(kap, np.diag(self.Kc))
            self.SQ = IP.T @ (s[:, None] * IP)
        else:
            S = np.zeros((self.ndof, self.ndof))
            if self.nmom:
                S += (self.h**2 / self.p**2) * kap * self.Pi0.T @ self.H @ self.Pi0
            for e in self.edges:
                M = e.lag_at_gauss.T @ (e.gauss_weights[:, None] * e.lag_at_gauss)
                S[np.ix_(e.trace_locs, e.trace_locs)] += (self.h / self.p) * kap * M
            self.SQ = IP.T @ S @ IP
        self.A = self.Kc + self.SQ

    # ------------------------------------------------------------------
    def load_vector(self, f):
        b = np.zeros(self.ndof)
        if self.p >= 2:
            pts, w = self.quad(2 * self.p + 4)
            fm = (w * f(pts)) @ self.basis.eval(pts)[:, : self.nmom]
            b = self.Pi0.T @ fm
        else:
            pts, w = self.quad(2 * self.p + 4)
            b[: self.nv] = (w @ f(pts)) / self.nv
        return b

    def interpolate(self, func):
        """Dof vector of a smooth function (vertex/GL values and moments)."""
        vals = np.zeros(self.ndof)
        vals[: self.nv] = func(self.verts)
        for e in self.edges:
            vals[e.trace_locs[1:-1]] = func(e.gl_points)[1:-1]
        if self.nmom:
            pts, w = self.quad(2 * self.p + 4)
            vals[self.mom_locs] = (
                (w * func(pts)) @ self.basis.eval(pts)[:, : self.nmom] / self.area
            )
        return vals

    def proj_grad(self, coeffs, pts):
        """Gradient of the projected polynomial with coefficients ``coeffs``."""
        return np.einsum("qad,a->qd", self.basis.grad(pts), coeffs)


@dataclass
class PrimalSolution:
    mesh: object
    degrees: DegreeMap
    space: PrimalSpace
    elements: list
    u: np.ndarray
    stab: str
    wall_time: float = 0.0

    def cell_dof_values(self, k):
        return self.u[self.space.cell_dofs(k)]

    def proj_coeffs(self, k):
        """P_p coefficients of the energy projection of u_h on cell k."""
        return self.elements[k].Pi @ self.cell_dof_values(k)


def dirichlet_data(mesh, space, case):
    """Constrained dof ids and values from the Dirichlet edges."""
    fixed = {}
    for eid, e in enumerate(mesh.edges):
        if not e.is_boundary or case.bc_of_tag(e.tag) != "D":
            continue
        hint = mesh.points[mesh.cells[e.cells[0]]].mean(axis=0)
        pa, pb = mesh.points[e.a], mesh.points[e.b]
        pe = int(space.degrees.edge[eid])
        gl, _ = gauss_lobatto_rule(pe + 1)
        t = 0.5 * (gl + 1.0)
        pts = pa[None, :] + t[:, None] * (pb - pa)[None, :]
        vals = case.g_D(pts, hint)
        fixed[e.a] = vals[0]
        fixed[e.b] = vals[-1]
        for j, d in enumerate(space.edge_dofs(eid)):
            fixed[d] = vals[1 + j]
    ids = np.array(sorted(fixed), dtype=int)
    return ids, np.array([fixed[i] for i in ids])


def solve_primal(mesh, degrees, case, stab="drecipe"):
    """Assemble and solve the primal problem; returns a PrimalSolution."""
    t0 = time.perf_counter()
    space = PrimalSpace(mesh, degrees)
    elements = [PrimalElement(mesh, k, degrees, stab) for k in range(mesh.num_cells)]

    rows, cols, vals = [], [], []
    rhs = np.zeros(space.ndof)
    for k, el in enumerate(elements):
        dofs = space.cell_dofs(k)
        rows.append(np.repeat(dofs, dofs.size))
        cols.append(np.tile(dofs, dofs.size))
        vals.append(el.A.ravel())
        rhs[dofs] += el.load_vector(case.f)
        for e in el.edges:
            edge = mesh.edges[e.eid]
            if edge.is_boundary and case.bc_of_tag(edge.tag) == "N":
                hint = mesh.points[mesh.cells[k]].mean(axis=0)
                g = case.g_N(e.gauss_points, e.normal, hint)
                rhs[dofs[e.trace_locs]] += e.lag_at_gauss.T @ (e.gauss_weights * g)
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.ndof, space.ndof),
    )

    fixed_ids, fixed_vals = dirichlet_data(mesh, space, case)
    u = np.zeros(space.ndof)
    u[fixed_ids] = fixed_vals
    free = np.setdiff1d(np.arange(space.ndof), fixed_ids)
    if free.size:
        rhs_f = rhs[free] - A[np.ix_(free, fixed_ids)] @ fixed_vals
        u[free] = linalg.solve_sparse(
            A[np.ix_(free, free)], rhs_f, label="primal system"
        )
    wall = time.perf_counter() - t0
    return PrimalSolution(mesh, degrees, space, elements, u, stab, wall)
