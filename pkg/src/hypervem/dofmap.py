"""Polynomial degree bookkeeping shared by the primal and mixed spaces."""

from __future__ import annotations

import numpy as np

MAX_P = 6


class DegreeError(ValueError):
    pass


class DegreeMap:
    """Per-element polynomial degrees with induced edge degrees.

    The degree of an edge is the maximum of the degrees of its incident
    elements, which keeps traces conforming across elements of different
    order.
    """

    def __init__(self, mesh, degrees):
        degrees = np.asarray(degrees, dtype=int)
        if degrees.shape == ():
            degrees = np.full(mesh.num_cells, int(degrees))
        if degrees.shape != (mesh.num_cells,):
            raise DegreeError("one degree per element required")
        if degrees.min() < 1:
            raise DegreeError("degrees must be >= 1")
        if degrees.max() > MAX_P:
            raise DegreeError(f"degrees must be <= {MAX_P}")
        self.cell = degrees.copy()
        self.edge = np.array(
            [max(degrees[c] for c in e.cells) for e in mesh.edges], dtype=int
        )

    @classmethod
    def uniform(cls, mesh, p):
        return cls(mesh, np.full(mesh.num_cells, p))


def lagrange_matrix(nodes, targets):
    """Values of the 1D Lagrange basis on ``nodes`` at ``targets``.

    Returns L with L[t, j] = ell_j(targets[t]).  Node counts are tiny
    (<= MAX_P + 2) so the direct product formula is fine.
    """
    nodes = np.asarray(nodes, dtype=float)
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    n = nodes.size
    L = np.ones((targets.size, n))
    for j in range(n):
        for m in range(n):
            if m == j:
                continue
            L[:, j] *= (targets - nodes[m]) / (nodes[j] - nodes[m])
    return L
