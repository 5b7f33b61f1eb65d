"""Mixed hp virtual element method for the diffusion problem.

Flux space on a polygon K of order p: normal traces are polynomials of the
per-edge degree (values at the p_e+1 Gauss nodes of each edge), divergence
and rotor lie in P_{p-1}(K).  Internal dofs are moments against the gradient
basis grad P_{p-1} and scaled rotor moments.  The scalar space is
discontinuous P_{p-1}, stored as monomial coefficients per element.

The divergence of a flux dof vector is exactly computable; the weighted L2
projection onto grad P_{p+1} follows from integration by parts.  The sign
convention is sigma ~ -kappa grad u, so the saddle problem reads

    a(sigma, tau) + b(tau, u) = -(g_D, n.tau)_GammaD
    b(sigma, v)              = -(f, v)          with b(tau, v) = -(div tau, v).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import linalg
from .dofmap import DegreeMap
from .polybasis import MonomialBasis, space_dim
from .quadrature import edge_rule, polygon_rule

STABILIZATIONS = ("drecipe", "theoretical")


@dataclass
class FluxEdge:
    eid: int
    direction: int
    degree: int
    length: float
    normal: np.ndarray  # outward for the element
    locs: np.ndarray  # local flux dof ids, traversal order
    points: np.ndarray  # Gauss nodes, traversal order
    weights: np.ndarray  # physical weights


class MixedSpace:
    """Global numbering: per-edge normal-trace values, then cell moments."""

    def __init__(self, mesh, degrees):
        self.mesh = mesh
        self.degrees = degrees
        ne = len(mesh.edges)
        self.edge_offset = np.zeros(ne + 1, dtype=int)
        for i in range(ne):
            self.edge_offset[i + 1] = self.edge_offset[i] + degrees.edge[i] + 1
        self.cell_offset = np.zeros(mesh.num_cells + 1, dtype=int)
        for k in range(mesh.num_cells):
            p = degrees.cell[k]
            nint = (space_dim(p - 1) - 1) + space_dim(p - 1)
            self.cell_offset[k + 1] = self.cell_offset[k] + nint
        self.cell_base = self.edge_offset[-1]
        self.ndof = self.cell_base + self.cell_offset[-1]
        # scalar space
        self.scal_offset = np.zeros(mesh.num_cells + 1, dtype=int)
        for k in range(mesh.num_cells):
            self.scal_offset[k + 1] = self.scal_offset[k] + space_dim(degrees.cell[k] - 1)
        self.nscal = self.scal_offset[-1]

    def edge_dofs(self, eid):
        lo = self.edge_offset[eid]
        return np.arange(lo, lo + self.degrees.edge[eid] + 1)

    def cell_internal_dofs(self, k):
        lo = self.cell_base + self.cell_offset[k]
        return np.arange(lo, lo + self.cell_offset[k + 1] - self.cell_offset[k])

    def cell_flux_map(self, k):
        """(global ids, signs) of the local flux dofs of cell k."""
        ids, signs = [], []
        for eid, direction in self.mesh.cell_edges[k]:
            ed = self.edge_dofs(eid)
            if direction > 0:
                ids.extend(ed)
                signs.extend([1.0] * ed.size)
            else:
                ids.extend(ed[::-1])
                signs.extend([-1.0] * ed.size)
        ids.extend(self.cell_internal_dofs(k))
        signs.extend([1.0] * (self.cell_offset[k + 1] - self.cell_offset[k]))
        return np.array(ids, dtype=int), np.array(signs)

    def cell_scalar_dofs(self, k):
        lo = self.scal_offset[k]
        return np.arange(lo, lo + self.scal_offset[k + 1] - self.scal_offset[k])


class MixedElement:
    """Local projector, stabilization and saddle blocks on one element."""

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
        p = self.p
        loop = mesh.cells[k]
        self.nv = len(loop)
        self.verts = mesh.points[loop]
        self.bpp1 = MonomialBasis(self.centroid[0], self.centroid[1], self.h, p + 1)
        self.npm1 = space_dim(p - 1)
        self.ngrad = self.npm1 - 1
        self._quads = {}

        # local flux layout: edge values, gradient moments, rotor moments
        self.edges = []
        off = 0
        for i, (eid, direction) in enumerate(mesh.cell_edges[k]):
            pe = int(degrees.edge[eid])
            a = self.verts[i]
            b = self.verts[(i + 1) % self.nv]
            length = float(np.linalg.norm(b - a))
            t = (b - a) / length
            normal = np.array([t[1], -t[0]])
            pts, w = edge_rule(a, b, pe + 1)
            locs = np.arange(off, off + pe + 1)
            off += pe + 1
            self.edges.append(FluxEdge(eid, direction, pe, length, normal, locs, pts, w))
        self.grad_locs = np.arange(off, off + self.ngrad)
        off += self.ngrad
        self.rot_locs = np.arange(off, off + self.npm1)
        self.nfdof = off + self.npm1

        self._build_operators()

    def quad(self, degree):
        if degree not in self._quads:
            self._quads[degree] = polygon_rule(self.verts, degree)
        return self._quads[degree]

    def _build_operators(self):
        p = self.p
        npm1, npp1 = self.npm1, self.bpp1.dim
        pts, w = self.quad(2 * p + 2)
        vals = self.bpp1.eval(pts)  # (nq, npp1)
        grads = self.bpp1.grad(pts)
        self.Mpp1 = np.einsum("q,qa,qb->ab", w, vals, vals)
        self.Mpm1 = self.Mpp1[:npm1, :npm1]
        self.Ggrad = np.einsum("q,qad,qbd->ab", w, grads, grads)

        # divergence: solve the P_{p-1} mass system against computable moments
        R = np.zeros((npm1, self.nfdof))
        for e in self.edges:
            mvals = self.bpp1.eval(e.points)[:, :npm1]  # (nq, npm1)
            R[:, e.locs] += (mvals * e.weights[:, None]).T
        for j, gl in enumerate(self.grad_locs):
            R[1 + j, gl] -= self.area
        self.DivMat = linalg.solve_spd(self.Mpm1, R, label=f"div mass, cell {self.k}")

        E = np.zeros((npm1, self.nfdof))
        for j, rl in enumerate(self.rot_locs):
            E[j, rl] = self.area / self.h
        self.RotMat = linalg.solve_spd(self.Mpm1, E, label=f"rot mass, cell {self.k}")

        # L2 projection onto grad P_{p+1}
        rhs = np.zeros((npp1 - 1, self.nfdof))
        Mx = self.Mpp1[1:, :npm1]
        rhs -= Mx @ self.DivMat
        for e in self.edges:
            mv = self.bpp1.eval(e.points)[:, 1:]
            rhs[:, e.locs] += (mv * e.weights[:, None]).T
        coeff = linalg.solve_spd(
            self.Ggrad[1:, 1:], rhs, label=f"flux projector, cell {self.k}"
        )
        self.Pi0 = np.vstack([np.zeros((1, self.nfdof)), coeff])  # potential coeffs

        # dof matrix of the gradient basis fields
        Df = np.zeros((self.nfdof, npp1))
        for e in self.edges:
            Df[e.locs, :] = self.bpp1.grad(e.points) @ e.normal
        if self.ngrad:
            Df[self.grad_locs, :] = self.Ggrad[1 : 1 + self.ngrad, :] / self.area
        self.Dflux = Df

        self.Mc = (1.0 / self.kappa) * self.Pi0.T @ self.Ggrad @ self.Pi0
        P = self.Dflux @ self.Pi0
        IP = np.eye(self.nfdof) - P
        if self.stab == "drecipe":
            s = np.maximum(self.h**2 / self.kappa, np.diag(self.Mc))
            self.S = IP.T @ (s[:, None] * IP)
        else:
            S = np.zeros((self.nfdof, self.nfdof))
            for e in self.edges:
                S[e.locs, e.locs] += self.h / self.kappa * e.weights
            S += (self.h**2 / self.kappa) * self.DivMat.T @ self.Mpm1 @ self.DivMat
            S += (self.h**2 / self.kappa) * self.RotMat.T @ self.Mpm1 @ self.RotMat
            self.S = IP.T @ S @ IP
        self.A = self.Mc + self.S
        self.B = -self.Mpm1 @ self.DivMat  # b(tau, q) rows: scalar basis

    def pi0_eval(self, coeffs, pts):
        """Evaluate the projected flux field given potential coefficients."""
        return np.einsum("qad,a->qd", self.bpp1.grad(pts), coeffs)

    def load_vector(self, f):
        """Moments -(f, m_a) for the scalar equation."""
        pts, w = self.quad(2 * self.p + 4)
        return -(w * f(pts)) @ self.bpp1.eval(pts)[:, : self.npm1]


@dataclass
class MixedSolution:
    mesh: object
    degrees: DegreeMap
    space: MixedSpace
    elements: list
    sigma: np.ndarray
    u: np.ndarray
    wall_time: float = 0.0

    def cell_flux(self, k):
        ids, signs = self.space.cell_flux_map(k)
        return signs * self.sigma[ids]

    def div_coeffs(self, k):
        return self.elements[k].DivMat @ self.cell_flux(k)

    def pi0_coeffs(self, k):
        return self.elements[k].Pi0 @ self.cell_flux(k)


def neumann_flux_values(mesh, space, case):
    """Constrained flux dofs on Neumann edges: n.sigma = -g_N at Gauss nodes."""
    ids, vals = [], []
    for eid, e in enumerate(mesh.edges):
        if not e.is_boundary or case.bc_of_tag(e.tag) != "N":
            continue
        pa, pb = mesh.points[e.a], mesh.points[e.b]
        pts, _ = edge_rule(pa, pb, space.degrees.edge[eid] + 1)
        hint = mesh.points[mesh.cells[e.cells[0]]].mean(axis=0)
        g = case.g_N(pts, e.normal, hint)
        ids.extend(space.edge_dofs(eid))
        vals.extend(-g)
    return np.array(ids, dtype=int), np.array(vals)


def solve_mixed(mesh, degrees, case, stab="drecipe"):
    """Assemble and solve the mixed saddle problem."""
    t0 = time.perf_counter()
    space = MixedSpace(mesh, degrees)
    elements = [MixedElement(mesh, k, degrees, stab) for k in range(mesh.num_cells)]

    nf, ns = space.ndof, space.nscal
    rows, cols, vals = [], [], []
    rhs = np.zeros(nf + ns)

    def add_block(r, c, M):
        rows.append(np.repeat(r, c.size))
        cols.append(np.tile(c, r.size))
        vals.append(M.ravel())

    for k, el in enumerate(elements):
        ids, signs = space.cell_flux_map(k)
        sdofs = nf + space.cell_scalar_dofs(k)
        A_loc = signs[:, None] * el.A * signs[None, :]
        B_loc = el.B * signs[None, :]
        add_block(ids, ids, A_loc)
        add_block(sdofs, ids, B_loc)
        add_block(ids, sdofs, B_loc.T)
        rhs[sdofs] += el.load_vector(case.f)
        for e in el.edges:
            edge = mesh.edges[e.eid]
            if edge.is_boundary and case.bc_of_tag(edge.tag) == "D":
                hint = mesh.points[mesh.cells[k]].mean(axis=0)
                g = case.g_D(e.points, hint)
                rhs[ids[e.locs]] -= e.weights * g
    K = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nf + ns, nf + ns),
    )

    fixed_ids, fixed_vals = neumann_flux_values(mesh, space, case)
    x = np.zeros(nf + ns)
    x[fixed_ids] = fixed_vals
    free = np.setdiff1d(np.arange(nf + ns), fixed_ids)
    rhs_f = rhs[free] - K[np.ix_(free, fixed_ids)] @ fixed_vals
    x[free] = linalg.solve_sparse(K[np.ix_(free, free)], rhs_f, label="mixed system")
    wall = time.perf_counter() - t0
    return MixedSolution(mesh, degrees, space, elements, x[:nf], x[nf:], wall)


def inf_sup_constant(mesh, degrees, stab="drecipe"):
    """Discrete inf-sup constant of b over the H(div) norm, small dense solve."""
    space = MixedSpace(mesh, degrees)
    elements = [MixedElement(mesh, k, degrees, stab) for k in range(mesh.num_cells)]
    nf, ns = space.ndof, space.nscal
    X = np.zeros((nf, nf))
    Y = np.zeros((ns, ns))
    B = np.zeros((ns, nf))
    for k, el in enumerate(elements):
        ids, signs = space.cell_flux_map(k)
        sdofs = space.cell_scalar_dofs(k)
        Xl = el.A + el.DivMat.T @ el.Mpm1 @ el.DivMat
        X[np.ix_(ids, ids)] += signs[:, None] * Xl * signs[None, :]
        Y[np.ix_(sdofs, sdofs)] += el.Mpm1
        B[np.ix_(sdofs, ids)] += el.B * signs[None, :]
    return linalg.min_generalized_singular_value(B, X, Y)
