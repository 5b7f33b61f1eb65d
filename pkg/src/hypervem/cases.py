"""Benchmark problems: corner/slit singularities and smooth manufactured data.

Boundary data callables receive a ``hint`` point inside the adjacent element
so that multivalued polar angles (slit domain) pick the correct branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TOL = 1e-12


def _theta(pts, hint=None, period=2.0 * np.pi):
    """Polar angle in [0, period); on the positive x axis the branch is taken
    from the hint point (above -> 0, below -> period)."""
    pts = np.atleast_2d(pts)
    th = np.arctan2(pts[:, 1], pts[:, 0])
    th = np.where(th < 0, th + 2.0 * np.pi, th)
    on_axis = (np.abs(pts[:, 1]) < TOL) & (pts[:, 0] > TOL)
    if hint is not None and hint[1] < 0:
        th = np.where(on_axis, period, th)
    else:
        th = np.where(on_axis, 0.0, th)
    return th


def _r(pts):
    pts = np.atleast_2d(pts)
    return np.hypot(pts[:, 0], pts[:, 1])


@dataclass
class Case:
    name: str
    domain: str
    bc: dict  # boundary tag -> 'D' or 'N'
    u: object = None
    grad: object = None  # grad(pts, hint=None) -> (n, 2)
    f: object = None

    def bc_of_tag(self, tag):
        return self.bc[tag]

    @property
    def has_exact(self):
        return self.grad is not None

    def g_D(self, pts, hint=None):
        return self.u(pts, hint)

    def g_N(self, pts, normal, hint=None):
        return self.grad(pts, hint) @ np.asarray(normal)

    def sigma_exact(self, pts, hint=None):
        """Exact flux sigma = -kappa grad u (kappa = 1 in all cases)."""
        return -self.grad(pts, hint)


def _corner_case(name, domain, bc, alpha, period):
    """u = r^alpha sin(alpha theta) with theta in [0, period)."""

    def u(pts, hint=None):
        r = _r(pts)
        th = _theta(pts, hint, period)
        return r**alpha * np.sin(alpha * th)

    def grad(pts, hint=None):
        pts = np.atleast_2d(pts)
        r = _r(pts)
        th = _theta(pts, hint, period)
        ra = alpha * r ** (alpha - 1.0)
        c, s = np.cos(th), np.sin(th)
        ur = ra * np.sin(alpha * th)
        ut = ra * np.cos(alpha * th)
        return np.column_stack([ur * c - ut * s, ur * s + ut * c])

    def f(pts):
        return np.zeros(np.atleast_2d(pts).shape[0])

    return Case(name, domain, bc, u, grad, f)


def make_case(name):
    if name == "tc1":
        return _corner_case(
            "tc1",
            "lshape",
            {"dirichlet": "D", "neumann": "N"},
            alpha=2.0 / 3.0,
            period=1.5 * np.pi,
        )
    if name == "tc2":
        return _corner_case(
            "tc2",
            "slit",
            {"dirichlet": "D", "slit_upper": "D", "slit_lower": "N"},
            alpha=0.25,
            period=2.0 * np.pi,
        )
    if name == "tc3":
        A = 4.0

        def u(pts, hint=None):
            pts = np.atleast_2d(pts)
            x, y = pts[:, 0], pts[:, 1]
            return A * x * (1 - x) * y * (1 - y)

        def grad(pts, hint=None):
            pts = np.atleast_2d(pts)
            x, y = pts[:, 0], pts[:, 1]
            return A * np.column_stack(
                [(1 - 2 * x) * y * (1 - y), x * (1 - x) * (1 - 2 * y)]
            )

        def f(pts):
            pts = np.atleast_2d(pts)
            x, y = pts[:, 0], pts[:, 1]
            return 2 * A * (x * (1 - x) + y * (1 - y))

        return Case("tc3", "unit_square", {"dirichlet": "D"}, u, grad, f)
    if name == "smooth":

        def u(pts, hint=None):
            pts = np.atleast_2d(pts)
            return np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])

        def grad(pts, hint=None):
            pts = np.atleast_2d(pts)
            x, y = pts[:, 0], pts[:, 1]
            return np.pi * np.column_stack(
                [np.cos(np.pi * x) * np.sin(np.pi * y),
                 np.sin(np.pi * x) * np.cos(np.pi * y)]
            )

        def f(pts):
            return 2.0 * np.pi**2 * u(pts)

        return Case("smooth", "nonconvex8", {"dirichlet": "D"}, u, grad, f)
    raise ValueError(f"unknown case '{name}'")
