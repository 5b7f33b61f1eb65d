import numpy as np
import pytest

from hypervem.mesh import PolyMesh


def square_verts():
    return np.array([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])


def triangle_verts():
    return np.array([(0.0, 0.0), (1.0, 0.0), (0.3, 0.8)])


def pentagon_verts():
    ang = 2 * np.pi * np.arange(5) / 5 + np.pi / 2
    return 0.5 + 0.45 * np.column_stack([np.cos(ang), np.sin(ang)])


def nonconvex_hexagon_verts():
    # L-shaped hexagon: one reentrant corner at (0.5, 0.5)
    return np.array(
        [(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.5, 0.5), (0.5, 1.0), (0.0, 1.0)]
    )


SHAPES = {
    "square": square_verts,
    "triangle": triangle_verts,
    "pentagon": pentagon_verts,
    "nonconvex_hexagon": nonconvex_hexagon_verts,
}


@pytest.fixture(params=sorted(SHAPES))
def shape_verts(request):
    return SHAPES[request.param]()


def single_cell_mesh(verts):
    return PolyMesh(np.asarray(verts, dtype=float), [list(range(len(verts)))])
