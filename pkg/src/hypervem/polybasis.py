"""Scaled monomial bases on polygons.

The basis attached to an element with centroid ``(xc, yc)`` and diameter
``h`` is

    m_a(x, y) = ((x - xc) / h)^a1 * ((y - yc) / h)^a2,

ordered by total degree and, within a degree, by decreasing x-exponent:
index 1 <-> (0,0), 2 <-> (1,0), 3 <-> (0,1), 4 <-> (2,0), 5 <-> (1,1),
6 <-> (0,2), ...  (indices here are 0-based in code).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_DEGREE = 12


@lru_cache(maxsize=None)
def monomial_exponents(degree):
    """Exponent pairs of the scaled monomial basis of P_degree, graded order."""
    if degree < 0:
        return tuple()
    out = []
    for d in range(degree + 1):
        for j in range(d + 1):
            out.append((d - j, j))
    return tuple(out)


def space_dim(degree):
    """dim P_degree in 2D; 0 for negative degree."""
    if degree < 0:
        return 0
    return (degree + 1) * (degree + 2) // 2


@lru_cache(maxsize=None)
def _exponent_index(degree):
    return {a: i for i, a in enumerate(monomial_exponents(degree))}


@dataclass(frozen=True)
class MonomialBasis:
    """Scaled monomial basis of P_degree on one element."""

    xc: float
    yc: float
    h: float
    degree: int

    @property
    def dim(self):
        return space_dim(self.degree)

    @property
    def exponents(self):
        return monomial_exponents(self.degree)

    def _scaled(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return (pts[:, 0] - self.xc) / self.h, (pts[:, 1] - self.yc) / self.h

    def eval(self, pts):
        """Values of all basis functions at ``pts``; shape (npts, dim)."""
        xs, ys = self._scaled(pts)
        out = np.empty((xs.size, self.dim))
        for i, (a, b) in enumerate(self.exponents):
            out[:, i] = xs**a * ys**b
        return out

    def grad(self, pts):
        """Gradients at ``pts``; shape (npts, dim, 2)."""
        xs, ys = self._scaled(pts)
        out = np.zeros((xs.size, self.dim, 2))
        for i, (a, b) in enumerate(self.exponents):
            if a > 0:
                out[:, i, 0] = a * xs ** (a - 1) * ys**b / self.h
            if b > 0:
                out[:, i, 1] = b * xs**a * ys ** (b - 1) / self.h
        return out

    def dx_coeffs(self):
        """Matrix mapping P_degree coefficients to P_{degree-1} coefficients of d/dx."""
        return self._deriv_coeffs(axis=0)

    def dy_coeffs(self):
        return self._deriv_coeffs(axis=1)

    def _deriv_coeffs(self, axis):
        src = self.exponents
        tgt = _exponent_index(max(self.degree - 1, -1)) if self.degree >= 1 else {}
        D = np.zeros((space_dim(self.degree - 1), self.dim))
        for j, (a, b) in enumerate(src):
            if axis == 0 and a > 0:
                D[tgt[(a - 1, b)], j] = a / self.h
            if axis == 1 and b > 0:
                D[tgt[(a, b - 1)], j] = b / self.h
        return D

    def laplacian_coeffs(self):
        """Matrix mapping P_degree coefficients to P_{degree-2} coefficients of the Laplacian."""
        tgt = _exponent_index(max(self.degree - 2, -1)) if self.degree >= 2 else {}
        L = np.zeros((space_dim(self.degree - 2), self.dim))
        for j, (a, b) in enumerate(self.exponents):
            if a >= 2:
                L[tgt[(a - 2, b)], j] += a * (a - 1) / self.h**2
            if b >= 2:
                L[tgt[(a, b - 2)], j] += b * (b - 1) / self.h**2
        return L

    def antiderivative_x(self):
        """Coefficients in P_{degree+1} of the x-antiderivative of each basis function."""
        tgt = _exponent_index(self.degree + 1)
        A = np.zeros((space_dim(self.degree + 1), self.dim))
        for j, (a, b) in enumerate(self.exponents):
            A[tgt[(a + 1, b)], j] = self.h / (a + 1)
        return A

    def restrict(self, degree):
        """Same centroid/diameter basis with a different polynomial degree."""
        return MonomialBasis(self.xc, self.yc, self.h, degree)


def gradient_basis_indices(degree):
    """Indices (into P_{degree+1} exponents) of the monomials spanning G_degree.

    G_degree = grad P_{degree+1}; a basis is given by the gradients of the
    scaled monomials of degrees 1..degree+1, i.e. all P_{degree+1} monomials
    except the constant.
    """
    if degree < 0:
        return []
    return list(range(1, space_dim(degree + 1)))
