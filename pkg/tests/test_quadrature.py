import numpy as np
import pytest

from hypervem.quadrature import (
    edge_rule,
    gauss_lobatto_rule,
    gauss_rule,
    polygon_area_centroid,
    polygon_rule,
    subtriangulate,
    triangle_rule,
)

from conftest import SHAPES


def _exact_monomial_integral(verts, a, b, degree=60):
    """Green-theorem oracle for ∫ x^a y^b over the polygon.

    ∫∫ x^a y^b = ∮ x^{a+1} y^b / (a+1) dy, evaluated edge by edge with a
    1D Gauss rule of ample order.
    """
    total = 0.0
    n = len(verts)
    x1d, w1d = gauss_rule(degree)
    t = 0.5 * (x1d + 1.0)
    for i in range(n):
        p0, p1 = verts[i], verts[(i + 1) % n]
        x = p0[0] + t * (p1[0] - p0[0])
        y = p0[1] + t * (p1[1] - p0[1])
        dy = 0.5 * (p1[1] - p0[1])
        total += np.sum(w1d * x ** (a + 1) * y**b * dy) / (a + 1)
    return total


def test_gauss_rule_degree():
    x, w = gauss_rule(4)
    for d in range(8):
        exact = (1 - (-1) ** (d + 1)) / (d + 1)
        assert abs(np.sum(w * x**d) - exact) < 1e-13


def test_gauss_lobatto_endpoints_and_degree():
    x, w = gauss_lobatto_rule(5)
    assert x[0] == -1.0 and x[-1] == 1.0
    for d in range(2 * 5 - 3):
        exact = (1 - (-1) ** (d + 1)) / (d + 1)
        assert abs(np.sum(w * x**d) - exact) < 1e-13


def test_edge_rule_line_integral():
    a, b = np.array([0.2, 0.1]), np.array([0.9, 0.7])
    pts, w = edge_rule(a, b, 6)
    length = np.linalg.norm(b - a)
    assert abs(w.sum() - length) < 1e-13
    # integrate x*y along the segment against the parametric oracle
    t = np.linspace(0, 1, 2001)
    xy = a[None, :] + t[:, None] * (b - a)[None, :]
    oracle = np.trapezoid(xy[:, 0] * xy[:, 1], t) * length
    assert abs(np.sum(w * pts[:, 0] * pts[:, 1]) - oracle) < 1e-6


def test_triangle_rule_exact_area_and_moments():
    v = np.array([(0.0, 0.0), (2.0, 0.0), (0.5, 1.5)])
    pts, w = triangle_rule(v[0], v[1], v[2], 6)
    assert abs(w.sum() - 1.5) < 1e-13
    for a, b in [(1, 0), (2, 1), (3, 3)]:
        exact = _exact_monomial_integral(v, a, b)
        assert abs(np.sum(w * pts[:, 0] ** a * pts[:, 1] ** b) - exact) < 1e-12


@pytest.mark.parametrize("name", sorted(SHAPES))
@pytest.mark.parametrize("degree", [1, 3, 5, 8])
def test_polygon_rule_green_oracle(name, degree):
    verts = SHAPES[name]()
    pts, w = polygon_rule(verts, degree)
    assert np.all(w > 0)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            got = np.sum(w * pts[:, 0] ** a * pts[:, 1] ** b)
            exact = _exact_monomial_integral(verts, a, b)
            assert got == pytest.approx(exact, abs=1e-12, rel=1e-12)


@pytest.mark.parametrize("name", sorted(SHAPES))
def test_subtriangulate_covers_polygon(name):
    verts = SHAPES[name]()
    area, _ = polygon_area_centroid(verts)
    tris = subtriangulate(verts)
    def tri_area_of(t):
        (ax, ay), (bx, by), (cx, cy) = t
        return abs((bx - ax) * (cy - ay) - (by - ay) * (cx - ax)) / 2

    tri_area = sum(tri_area_of(np.asarray(t)) for t in tris)
    assert tri_area == pytest.approx(area, rel=1e-12)


def test_polygon_area_centroid_square():
    area, cen = polygon_area_centroid(SHAPES["square"]())
    assert area == pytest.approx(1.0)
    assert np.allclose(cen, [0.5, 0.5])
