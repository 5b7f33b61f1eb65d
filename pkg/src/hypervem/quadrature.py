"""Quadrature rules: Gauss/Gauss-Lobatto on edges, sub-triangulated polygon rules.

Polygon rules are built by splitting the polygon into triangles (centroid fan
when the polygon is star shaped with respect to its centroid, ear clipping
otherwise) and mapping a tensor Duffy rule of the requested algebraic degree
onto each triangle.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg


@lru_cache(maxsize=None)
def gauss_rule(n):
    """n-point Gauss-Legendre rule on [-1, 1]; exact for degree 2n-1."""
    x, w = npleg.leggauss(n)
    return x.copy(), w.copy()


@lru_cache(maxsize=None)
def gauss_lobatto_rule(n):
    """n-point Gauss-Lobatto rule on [-1, 1] (n >= 2); exact for degree 2n-3.

    Interior nodes are the roots of P'_{n-1}; weights follow the classical
    closed form w_i = 2 / (n (n-1) P_{n-1}(x_i)^2).
    """
    if n < 2:
        raise ValueError("Gauss-Lobatto needs at least 2 nodes")
    cn = np.zeros(n)
    cn[-1] = 1.0  # Legendre series for P_{n-1}
    interior = npleg.legroots(npleg.legder(cn))
    x = np.concatenate([[-1.0], np.sort(interior), [1.0]])
    w = 2.0 / (n * (n - 1) * npleg.legval(x, cn) ** 2)
    return x, w


def edge_rule(a, b, n):
    """n-point Gauss rule along the segment a->b; returns (points, weights)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x, w = gauss_rule(n)
    t = 0.5 * (x + 1.0)
    pts = a[None, :] + t[:, None] * (b - a)[None, :]
    return pts, 0.5 * np.linalg.norm(b - a) * w


@lru_cache(maxsize=None)
def _duffy_rule(degree):
    """Rule on the reference triangle (0,0)-(1,0)-(0,1), exact for ``degree``."""
    nu = (degree + 3) // 2 + 1
    nv = (degree + 2) // 2 + 1
    xu, wu = gauss_rule(nu)
    xv, wv = gauss_rule(nv)
    u = 0.5 * (xu + 1.0)
    v = 0.5 * (xv + 1.0)
    wu = 0.5 * wu
    wv = 0.5 * wv
    U, V = np.meshgrid(u, v, indexing="ij")
    WU, WV = np.meshgrid(wu, wv, indexing="ij")
    X = U
    Y = V * (1.0 - U)
    W = WU * WV * (1.0 - U)
    return (
        np.column_stack([X.ravel(), Y.ravel()]),
        W.ravel(),
    )


def triangle_rule(v0, v1, v2, degree):
    """Quadrature exact for polynomials of ``degree`` on the triangle v0 v1 v2."""
    v0 = np.asarray(v0, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    ref_pts, ref_w = _duffy_rule(degree)
    J = np.column_stack([v1 - v0, v2 - v0])
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    pts = ref_pts @ J.T + v0[None, :]
    return pts, ref_w * abs(det)  # ref weights sum to the reference area 1/2


def polygon_area_centroid(verts):
    """Signed area and area centroid of a simple polygon."""
    v = np.asarray(verts, dtype=float)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if abs(area) < 1e-300:
        raise ValueError("degenerate polygon")
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return area, np.array([cx, cy])


def _fan_triangles(verts, center):
    tris = []
    n = len(verts)
    for i in range(n):
        tris.append((center, verts[i], verts[(i + 1) % n]))
    return tris


def _tri_signed_area(a, b, c):
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def _ear_clip(verts):
    """Triangulate a simple CCW polygon by ear clipping."""
    idx = list(range(len(verts)))
    tris = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10000:
            raise ValueError("ear clipping failed; polygon may be non-simple")
        n = len(idx)
        clipped = False
        for k in range(n):
            i0, i1, i2 = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
            a, b, c = verts[i0], verts[i1], verts[i2]
            if _tri_signed_area(a, b, c) <= 1e-14 * _poly_scale(verts) ** 2:
                continue
            # no other polygon vertex may lie inside the candidate ear
            ok = True
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                if _point_in_tri(verts[j], a, b, c):
                    ok = False
                    break
            if ok:
                tris.append((a, b, c))
                idx.pop(k)
                clipped = True
                break
        if not clipped:
            raise ValueError("ear clipping found no ear; polygon may be non-simple")
    tris.append((verts[idx[0]], verts[idx[1]], verts[idx[2]]))
    return tris


def _poly_scale(verts):
    v = np.asarray(verts, dtype=float)
    return float(np.max(v.max(axis=0) - v.min(axis=0)))


def _point_in_tri(p, a, b, c):
    tol = -1e-12 * _tri_signed_area(a, b, c)
    return (
        _tri_signed_area(a, b, p) >= tol
        and _tri_signed_area(b, c, p) >= tol
        and _tri_signed_area(c, a, p) >= tol
    )


def subtriangulate(verts):
    """Split a simple CCW polygon into triangles covering it exactly."""
    verts = [np.asarray(v, dtype=float) for v in verts]
    _, centroid = polygon_area_centroid(verts)
    fan = _fan_triangles(verts, centroid)
    areas = [_tri_signed_area(*t) for t in fan]
    total = sum(areas)
    if all(a > 1e-13 * abs(total) for a in areas):
        return fan
    return _ear_clip(verts)


def polygon_rule(verts, degree):
    """Quadrature on a simple CCW polygon exact for polynomials of ``degree``."""
    pts_all, w_all = [], []
    for tri in subtriangulate(verts):
        pts, w = triangle_rule(*tri, degree)
        pts_all.append(pts)
        w_all.append(w)
    return np.vstack(pts_all), np.concatenate(w_all)
