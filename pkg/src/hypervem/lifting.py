"""Evaluation of virtual functions by local finite element lifting.

A function of the primal virtual space is known only through its degrees of
freedom: polynomial traces on the element boundary and internal moments.
This module recovers the function itself by solving, on a fine
subtriangulation of each element, the defining local problem

    Delta v = q in K,    v = trace on dK,    (1/|K|) int_K v m_a = dof_a,

where q is an unknown polynomial of degree p-2 determined together with v
by the moment constraints (for p = 1 the lift is harmonic).  Lagrange
elements of degree p+1 keep the lifting error negligible next to the
discretization error.

The lifted solution gives the true energy error |u - u_n|_{1,Omega}, the
quantity tabulated in error studies, as opposed to the computable projected
error ||grad u - grad Pi u_n||.
"""

from __future__ import annotations

import numpy as np

from . import linalg
from .dofmap import lagrange_matrix
from .quadrature import gauss_lobatto_rule, subtriangulate

_DUNAVANT_CACHE = {}


def _ref_triangle_rule(degree):
    """Quadrature on the reference triangle via the Duffy rule."""
    from .quadrature import _duffy_rule

    if degree not in _DUNAVANT_CACHE:
        _DUNAVANT_CACHE[degree] = _duffy_rule(degree)
    return _DUNAVANT_CACHE[degree]


def _lattice_nodes(k):
    """Lagrange lattice nodes of degree k on the reference triangle."""
    pts = []
    for i in range(k + 1):
        for j in range(k + 1 - i):
            pts.append((i / k, j / k))
    return np.array(pts)


_SHAPE_CACHE = {}


def _shape_basis(k):
    """Coefficients of the degree-k Lagrange basis in the monomial basis."""
    if k in _SHAPE_CACHE:
        return _SHAPE_CACHE[k]
    nodes = _lattice_nodes(k)
    exps = [(a, b) for a in range(k + 1) for b in range(k + 1 - a)]
    V = np.array([[x**a * y**b for (a, b) in exps] for x, y in nodes])
    C = np.linalg.inv(V)  # column j: monomial coefficients of shape fn j
    _SHAPE_CACHE[k] = (nodes, exps, C)
    return _SHAPE_CACHE[k]


def _eval_shapes(k, pts):
    """Values and reference gradients of the degree-k shapes at ref points."""
    _, exps, C = _shape_basis(k)
    x, y = pts[:, 0], pts[:, 1]
    V = np.stack([x**a * y**b for (a, b) in exps], axis=1)
    Gx = np.stack(
        [a * x ** max(a - 1, 0) * y**b if a else np.zeros_like(x) for (a, b) in exps],
        axis=1,
    )
    Gy = np.stack(
        [b * x**a * y ** max(b - 1, 0) if b else np.zeros_like(x) for (a, b) in exps],
        axis=1,
    )
    return V @ C, Gx @ C, Gy @ C


def _refine(tris):
    """One uniform red refinement of a list of triangles (3x2 arrays)."""
    out = []
    for t in tris:
        a, b, c = t
        ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
        out += [
            np.array([a, ab, ca]),
            np.array([ab, b, bc]),
            np.array([ca, bc, c]),
            np.array([ab, bc, ca]),
        ]
    return out


class ElementLift:
    """Degree p+1 FEM lift of the virtual functions of one element."""

    def __init__(self, element, nref=2):
        ep = element
        self.ep = ep
        k = ep.p + 1
        self.k = k
        tris = [np.asarray(t, dtype=float) for t in subtriangulate(ep.verts)]
        for _ in range(nref):
            tris = _refine(tris)
        self.tris = tris
        nodes_ref, _, _ = _shape_basis(k)

        # global node numbering by rounded coordinates
        index = {}
        coords = []
        self.conn = []
        tol = 1e-9 * ep.h
        for t in tris:
            a, b, c = t
            loc = []
            phys = a[None, :] + nodes_ref @ np.stack([b - a, c - a])
            for pxy in phys:
                key = (round(pxy[0] / tol), round(pxy[1] / tol))
                if key not in index:
                    index[key] = len(coords)
                    coords.append(pxy)
                loc.append(index[key])
            self.conn.append(np.array(loc, dtype=int))
        self.coords = np.array(coords)
        nn = len(coords)

        # classify nodes: on which boundary edge of the element loop?
        bnode = {}
        for j, e in enumerate(ep.edges):
            a = ep.verts[j]
            b = ep.verts[(j + 1) % ep.nv]
            d = b - a
            L2 = d @ d
            rel = self.coords - a
            t = (rel @ d) / L2
            off = np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0]) / np.sqrt(L2)
            on = (off < 1e-9 * ep.h) & (t > -1e-12) & (t < 1 + 1e-12)
            for idx in np.nonzero(on)[0]:
                bnode.setdefault(idx, (j, t[idx]))
        self.boundary = bnode
        self.interior = np.array(
            [i for i in range(nn) if i not in bnode], dtype=int
        )

        # assemble stiffness, moment rows and polynomial load columns
        rule = _ref_triangle_rule(2 * k + 2)
        rx, rw = rule
        S, Gx, Gy = _eval_shapes(k, rx)
        A = np.zeros((nn, nn))
        nmom = ep.nmom
        Mrows = np.zeros((nmom, nn)) if nmom else np.zeros((0, nn))
        Q = np.zeros((nn, nmom)) if nmom else np.zeros((nn, 0))
        for t, loc in zip(tris, self.conn):
            a, b, c = t
            J = np.stack([b - a, c - a], axis=1)
            det = abs(np.linalg.det(J))
            Ji = np.linalg.inv(J)
            gx = Gx * Ji[0, 0] + Gy * Ji[1, 0]
            gy = Gx * Ji[0, 1] + Gy * Ji[1, 1]
            w = rw * det
            Ae = (gx * w[:, None]).T @ gx + (gy * w[:, None]).T @ gy
            A[np.ix_(loc, loc)] += Ae
            if nmom:
                phys = a[None, :] + rx @ J.T
                mvals = ep.basis.eval(phys)[:, :nmom]
                Mrows[:, loc] += (w[:, None] * mvals).T @ S
                Q[loc, :] += (w[:, None] * S).T @ mvals
        self.A = A
        self.Mrows = Mrows / ep.area
        self.Q = Q
        self._solve_cache = {}

    # ------------------------------------------------------------------
    def lift(self, dofs):
        """Nodal values of the virtual function with the given local dofs."""
        ep = self.ep
        nn = self.coords.shape[0]
        vals = np.zeros(nn)
        # boundary values from the edge traces
        for idx, (j, t) in self.boundary.items():
            e = ep.edges[j]
            gl, _ = gauss_lobatto_rule(e.degree + 1)
            L = lagrange_matrix(0.5 * (gl + 1.0), np.array([t]))
            vals[idx] = float(L[0] @ dofs[e.trace_locs])
        ii = self.interior
        nmom = ep.nmom
        if nmom == 0:
            rhs = -self.A[np.ix_(ii, np.setdiff1d(np.arange(nn), ii))] @ vals[
                np.setdiff1d(np.arange(nn), ii)
            ]
            vals[ii] = linalg.solve_spd(self.A[np.ix_(ii, ii)], rhs, label="lift")
            return vals
        # coupled system: interior equations + moment constraints,
        # unknowns: interior values and the p-2 degree source q
        bb = np.setdiff1d(np.arange(nn), ii)
        nI = ii.size
        K = np.zeros((nI + nmom, nI + nmom))
        K[:nI, :nI] = self.A[np.ix_(ii, ii)]
        K[:nI, nI:] = self.Q[ii]  # +(q, w): Delta v = q gives (grad v, grad w) = -(q, w)
        K[nI:, :nI] = self.Mrows[:, ii]
        rhs = np.concatenate(
            [
                -self.A[np.ix_(ii, bb)] @ vals[bb],
                dofs[ep.mom_locs] - self.Mrows[:, bb] @ vals[bb],
            ]
        )
        sol = linalg.solve_dense(K, rhs, label="moment lift")
        vals[ii] = sol[:nI]
        return vals

    # ------------------------------------------------------------------
    def h1_error_sq(self, vals, grad_exact, hint=None):
        """|w - v_h|^2_{1,K} for exact gradient callback grad_exact(pts, hint)."""
        rule = _ref_triangle_rule(2 * self.k + 2)
        rx, rw = rule
        _, Gx, Gy = _eval_shapes(self.k, rx)
        total = 0.0
        for t, loc in zip(self.tris, self.conn):
            a, b, c = t
            J = np.stack([b - a, c - a], axis=1)
            det = abs(np.linalg.det(J))
            Ji = np.linalg.inv(J)
            gx = (Gx * Ji[0, 0] + Gy * Ji[1, 0]) @ vals[loc]
            gy = (Gx * Ji[0, 1] + Gy * Ji[1, 1]) @ vals[loc]
            phys = a[None, :] + rx @ J.T
            ge = grad_exact(phys, hint) if hint is not None else grad_exact(phys)
            total += np.sum(rw * det * ((ge[:, 0] - gx) ** 2 + (ge[:, 1] - gy) ** 2))
        return total


def true_h1_error(case, psol, nref=1):
    """True energy error |u - u_n|_{1,Omega} of the lifted primal solution."""
    mesh = psol.mesh
    total = 0.0
    for k, ep in enumerate(psol.elements):
        lift = ElementLift(ep, nref=nref)
        vals = lift.lift(psol.cell_dof_values(k))
        hint = mesh.cell_geom(k).centroid
        total += ep.kappa * lift.h1_error_sq(vals, case.grad, hint)
    return float(np.sqrt(total))
