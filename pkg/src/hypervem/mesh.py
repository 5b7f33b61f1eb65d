"""Polygonal meshes for the hp virtual element solver.

Meshes store elements as counter-clockwise vertex loops.  Hanging nodes are
ordinary vertices that sit on a straight side of a neighbouring element; the
loop of that element simply contains the extra vertex.  "Straight sides" of
an element are the maximal collinear runs of its loop and are the entities
that adaptive refinement bisects.

The slit domain is realised topologically: vertices on the slit carry
duplicated ids for the two sides, so edge connectivity (derived purely from
the loops) is automatically correct.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .quadrature import polygon_area_centroid

COLLINEAR_TOL = 1e-10
MATCH_TOL = 1e-9

TAG_INTERIOR = "interior"
TAG_DIRICHLET = "dirichlet"
TAG_NEUMANN = "neumann"
TAG_SLIT_LOWER = "slit_lower"
TAG_SLIT_UPPER = "slit_upper"


class MeshError(ValueError):
    """Raised for malformed meshes or invalid refinement requests."""


@dataclass
class Edge:
    a: int
    b: int
    cells: tuple  # one or two incident cell ids
    tag: str
    normal: np.ndarray  # unit normal; outward for boundary edges

    @property
    def is_boundary(self):
        return len(self.cells) == 1


@dataclass
class ElementGeom:
    area: float
    centroid: np.ndarray
    diameter: float
    sides: list  # straight sides, each a list of local vertex positions


class PolyMesh:
    """Conforming polygonal mesh with derived edge connectivity."""

    def __init__(self, points, cells, domain="unit_square", kappa=None):
        self.points = np.asarray(points, dtype=float).copy()
        self.cells = [list(map(int, c)) for c in cells]
        self.domain = domain
        if kappa is None:
            kappa = np.ones(len(self.cells))
        self.kappa = np.asarray(kappa, dtype=float).copy()
        if self.kappa.shape != (len(self.cells),):
            raise MeshError("kappa must have one value per element")
        self._build_edges()
        self._geom_cache = {}

    # ------------------------------------------------------------------
    # connectivity
    # ------------------------------------------------------------------
    def _build_edges(self):
        edge_of = {}
        edges = []
        cell_edges = []
        for k, loop in enumerate(self.cells):
            if len(loop) < 3:
                raise MeshError(f"cell {k} has fewer than 3 vertices")
            entries = []
            n = len(loop)
            for i in range(n):
                a, b = loop[i], loop[(i + 1) % n]
                if a == b:
                    raise MeshError(f"cell {k} repeats vertex {a}")
                key = (min(a, b), max(a, b))
                if key in edge_of:
                    eid = edge_of[key]
                    a0, b0, cells0 = edges[eid]
                    if len(cells0) == 2:
                        raise MeshError(f"edge {key} shared by more than two cells")
                    edges[eid] = (a0, b0, cells0 + (k,))
                else:
                    eid = len(edges)
                    edge_of[key] = eid
                    edges.append((a, b, (k,)))
                direction = 1 if edges[eid][0] == a else -1
                entries.append((eid, direction))
            cell_edges.append(entries)
        self.cell_edges = cell_edges
        self.edges = []
        for eid, (a, b, cells) in enumerate(edges):
            pa, pb = self.points[a], self.points[b]
            t = pb - pa
            ln = np.linalg.norm(t)
            if ln <= 0:
                raise MeshError(f"zero-length edge {a}-{b}")
            normal = np.array([t[1], -t[0]]) / ln
            if len(cells) == 1:
                # orient boundary normals outward from the single cell
                c = self.points[self.cells[cells[0]]].mean(axis=0)
                if np.dot(normal, 0.5 * (pa + pb) - c) < 0:
                    normal = -normal
            tag = TAG_INTERIOR
            self.edges.append(Edge(a, b, cells, tag, normal))
        self._classify_boundary()

    def _classify_boundary(self):
        for e in self.edges:
            if not e.is_boundary:
                continue
            pa, pb = self.points[e.a], self.points[e.b]
            cen = self.points[self.cells[e.cells[0]]].mean(axis=0)
            e.tag = classify_boundary_edge(self.domain, pa, pb, cen)

    @property
    def num_cells(self):
        return len(self.cells)

    @property
    def num_vertices(self):
        return len(self.points)

    def edge_length(self, eid):
        e = self.edges[eid]
        return float(np.linalg.norm(self.points[e.b] - self.points[e.a]))

    def boundary_edges(self):
        return [i for i, e in enumerate(self.edges) if e.is_boundary]

    def cell_geom(self, k):
        if k not in self._geom_cache:
            verts = self.points[self.cells[k]]
            area, centroid = polygon_area_centroid(verts)
            if area <= 0:
                raise MeshError(f"cell {k} is not counter-clockwise")
            dia = _polygon_diameter(verts)
            sides = straight_sides(verts)
            self._geom_cache[k] = ElementGeom(area, centroid, dia, sides)
        return self._geom_cache[k]

    def cell_kind(self, k):
        """'square', 'triangle' (by straight-side count) or 'polygon'."""
        ns = len(self.cell_geom(k).sides)
        return {3: "triangle", 4: "square"}.get(ns, "polygon")

    def vertex_patch(self, v):
        """Ids of the cells whose loop contains vertex ``v``."""
        return [k for k, loop in enumerate(self.cells) if v in loop]

    def patch_edges(self, v):
        """Edges of the patch of ``v``: (interior-to-patch ids, boundary-of-patch ids)."""
        cells = set(self.vertex_patch(v))
        interior, boundary = [], []
        seen = set()
        for k in cells:
            for eid, _ in self.cell_edges[k]:
                if eid in seen:
                    continue
                seen.add(eid)
                e = self.edges[eid]
                if len(e.cells) == 2 and set(e.cells) <= cells:
                    interior.append(eid)
                else:
                    boundary.append(eid)
        return sorted(interior), sorted(boundary)

    # ------------------------------------------------------------------
    # validation
    # ------------------------------------------------------------------
    def validate(self, gamma=0.1, gamma_tilde=10.0, strict=True):
        """Check orientation, conformity and star-shapedness of all elements.

        Returns the list of violation messages; raises MeshError when
        ``strict`` and violations exist.  ``gamma`` bounds the kernel radius
        from below by ``gamma * h_K``; ``gamma_tilde`` bounds the ratio of
        h_K to the shortest straight side.
        """
        problems = []
        for k in range(self.num_cells):
            try:
                g = self.cell_geom(k)
            except MeshError as exc:
                problems.append(str(exc))
                continue
            verts = self.points[self.cells[k]]
            r = kernel_radius(verts)
            if r < gamma * g.diameter:
                problems.append(
                    f"cell {k}: kernel radius {r:.3e} < gamma*h = {gamma * g.diameter:.3e}"
                )
            if len(g.sides) < 3:
                problems.append(f"cell {k}: fewer than 3 straight sides")
            for side in g.sides:
                p0 = verts[side[0]]
                p1 = verts[side[-1]]
                ln = np.linalg.norm(p1 - p0)
                if ln * gamma_tilde < g.diameter:
                    problems.append(
                        f"cell {k}: straight side length {ln:.3e} < h/gamma_tilde"
                    )
        for e in self.edges:
            if len(e.cells) not in (1, 2):
                problems.append(f"edge {e.a}-{e.b} has {len(e.cells)} cells")
        if strict and problems:
            raise MeshError("; ".join(problems))
        return problems

    # ------------------------------------------------------------------
    # text serialization
    # ------------------------------------------------------------------
    def dumps(self):
        lines = ["hypervem-mesh 1", f"domain {self.domain}"]
        lines.append(f"vertices {self.num_vertices}")
        for i, (x, y) in enumerate(self.points):
            lines.append(f"{i} {x:.17g} {y:.17g}")
        lines.append(f"cells {self.num_cells}")
        for k, loop in enumerate(self.cells):
            lines.append(
                f"{k} {self.kappa[k]:.17g} {len(loop)} " + " ".join(map(str, loop))
            )
        return "\n".join(lines) + "\n"

    def dump(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("hypervem-mesh"):
            raise MeshError("not a hypervem mesh file")
        version = lines[0].split()[1]
        if version != "1":
            raise MeshError(f"unsupported mesh format version {version}")
        domain = lines[1].split()[1]
        idx = 2
        nv = int(lines[idx].split()[1])
        idx += 1
        points = np.empty((nv, 2))
        for i in range(nv):
            parts = lines[idx + i].split()
            points[int(parts[0])] = (float(parts[1]), float(parts[2]))
        idx += nv
        nc = int(lines[idx].split()[1])
        idx += 1
        cells = [None] * nc
        kappa = np.ones(nc)
        for i in range(nc):
            parts = lines[idx + i].split()
            k = int(parts[0])
            kappa[k] = float(parts[1])
            n = int(parts[2])
            cells[k] = [int(p) for p in parts[3 : 3 + n]]
        return cls(points, cells, domain=domain, kappa=kappa)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())


# ----------------------------------------------------------------------
# geometric helpers
# ----------------------------------------------------------------------
def _polygon_diameter(verts):
    v = np.asarray(verts, dtype=float)
    d2 = ((v[:, None, :] - v[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.max()))


def straight_sides(verts):
    """Maximal collinear runs of a closed CCW loop.

    Returns a list of sides, each a list of local vertex positions from one
    corner to the next (inclusive).  Collinearity uses a relative tolerance
    of COLLINEAR_TOL against the element diameter.
    """
    v = np.asarray(verts, dtype=float)
    n = len(v)
    h = _polygon_diameter(v)
    corners = []
    for i in range(n):
        u = v[i] - v[i - 1]
        w = v[(i + 1) % n] - v[i]
        cross = u[0] * w[1] - u[1] * w[0]
        if abs(cross) > COLLINEAR_TOL * h * h:
            corners.append(i)
    if len(corners) < 3:
        raise MeshError("polygon has fewer than 3 corners")
    sides = []
    m = len(corners)
    for j in range(m):
        i0, i1 = corners[j], corners[(j + 1) % m]
        run = [i0]
        i = i0
        while i != i1:
            i = (i + 1) % n
            run.append(i)
        sides.append(run)
    return sides


def kernel_radius(verts):
    """Radius of the largest disc inside the kernel of a simple polygon.

    The kernel is the intersection of the inner half planes of the edges;
    the Chebyshev radius is found by a tiny linear program.
    """
    v = np.asarray(verts, dtype=float)
    n = len(v)
    A, b = [], []
    for i in range(n):
        p, q = v[i], v[(i + 1) % n]
        t = q - p
        ln = np.linalg.norm(t)
        if ln == 0:
            continue
        nin = np.array([-t[1], t[0]]) / ln  # inner normal for CCW loops
        # require nin . x - r >= nin . p
        A.append([-nin[0], -nin[1], 1.0])
        b.append(-np.dot(nin, p))
    res = linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=np.array(A),
        b_ub=np.array(b),
        bounds=[(None, None), (None, None), (0, None)],
        method="highs",
    )
    if not res.success:
        return 0.0
    return float(res.x[2])


# ----------------------------------------------------------------------
# boundary classification per domain
# ----------------------------------------------------------------------
def classify_boundary_edge(domain, pa, pb, cell_centroid):
    mid = 0.5 * (np.asarray(pa) + np.asarray(pb))
    tol = 1e-12
    if domain in ("unit_square", "nonconvex8"):
        return TAG_DIRICHLET
    if domain == "lshape":
        # homogeneous Dirichlet on the two sides meeting the re-entrant
        # corner; Neumann on the rest of the boundary
        on_x_axis = abs(mid[1]) < tol and -tol <= mid[0] <= 1 + tol
        on_y_axis = abs(mid[0]) < tol and -1 - tol <= mid[1] <= tol
        return TAG_DIRICHLET if (on_x_axis or on_y_axis) else TAG_NEUMANN
    if domain == "slit":
        on_slit = abs(mid[1]) < tol and -tol <= mid[0] <= 1 + tol
        if on_slit:
            return TAG_SLIT_LOWER if cell_centroid[1] < 0 else TAG_SLIT_UPPER
        return TAG_DIRICHLET
    raise MeshError(f"unknown domain '{domain}'")


# ----------------------------------------------------------------------
# mesh builders
# ----------------------------------------------------------------------
def _grid(x0, x1, y0, y1, nx, ny):
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    pts = np.array([(x, y) for y in ys for x in xs])
    vid = lambda i, j: j * (nx + 1) + i
    return pts, vid


def _square_cells(nx, ny, vid, keep):
    cells = []
    for j in range(ny):
        for i in range(nx):
            if keep(i, j):
                cells.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
    return cells


def _triangle_cells(nx, ny, vid, keep):
    cells = []
    for j in range(ny):
        for i in range(nx):
            if keep(i, j):
                cells.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)])
                cells.append([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)])
    return cells


def _apply_slit(points, cells):
    """Duplicate vertices on the slit [0,1] x {0} for cells below it.

    The slit tip (0,0) stays single; interior slit vertices and the mouth
    (1,0) get one copy per side.
    """
    points = list(map(np.asarray, points))
    dup = {}
    for i in range(len(points)):
        p = points[i]
        if abs(p[1]) < 1e-12 and 1e-12 < p[0] <= 1 + 1e-12:
            dup[i] = len(points)
            points.append(p.copy())
    new_cells = []
    for loop in cells:
        cen = np.mean([points[v] for v in loop], axis=0)
        if cen[1] < 0:
            loop = [dup.get(v, v) for v in loop]
        new_cells.append(loop)
    return np.array(points), new_cells


def nonconvex8_mesh():
    """The 8-element partition of the unit square with 4 non-convex cells.

    Horizontal zig-zag interfaces at y ~ 1/4 and y ~ 3/4, a vertical cut at
    x = 1/2 and a horizontal cut at y = 1/2 through the middle band.
    """
    raw = np.array(
        [
            (0, 0), (2, 0), (4, 0),
            (0, 1), (1, 1.5), (2, 1), (3, 1.5), (4, 1),
            (0, 2), (2, 2), (4, 2),
            (0, 3), (1, 3.5), (2, 3), (3, 3.5), (4, 3),
            (0, 4), (2, 4), (4, 4),
        ],
        dtype=float,
    )
    pts = raw / 4.0
    cells = [
        [0, 1, 5, 4, 3],
        [1, 2, 7, 6, 5],
        [3, 4, 5, 9, 8],
        [5, 6, 7, 10, 9],
        [8, 9, 13, 12, 11],
        [9, 10, 15, 14, 13],
        [11, 12, 13, 17, 16],
        [13, 14, 15, 18, 17],
    ]
    return PolyMesh(pts, cells, domain="nonconvex8")


def build_mesh(domain, family, level):
    """Uniform mesh of ``domain`` at refinement ``level``.

    Families: 'cartesian' (axis-aligned squares) or 'structured_triangles'
    (each square split along the lower-left to upper-right diagonal).  The
    mesh size is 2**-level; level 0 gives unit-size cells.
    """
    if level < 0:
        raise MeshError("level must be >= 0")
    if domain == "nonconvex8":
        return nonconvex8_mesh()
    h_cells = 2**level
    if domain == "unit_square":
        pts, vid = _grid(0.0, 1.0, 0.0, 1.0, h_cells, h_cells)
        keep = lambda i, j: True
        nx = ny = h_cells
    elif domain == "lshape":
        nx = ny = 2 * h_cells
        pts, vid = _grid(-1.0, 1.0, -1.0, 1.0, nx, ny)
        # drop the quadrant x in (0,1), y in (-1,0)
        keep = lambda i, j: not (i >= h_cells and j < h_cells)
    elif domain == "slit":
        nx = ny = 2 * h_cells
        pts, vid = _grid(-1.0, 1.0, -1.0, 1.0, nx, ny)
        keep = lambda i, j: True
    else:
        raise MeshError(f"unknown domain '{domain}'")
    if family == "cartesian":
        cells = _square_cells(nx, ny, vid, keep)
    elif family == "structured_triangles":
        cells = _triangle_cells(nx, ny, vid, keep)
    else:
        raise MeshError(f"unknown family '{family}'")
    if domain == "slit":
        pts, cells = _apply_slit(pts, cells)
        used = sorted({v for loop in cells for v in loop})
        remap = {v: i for i, v in enumerate(used)}
        pts = pts[used]
        cells = [[remap[v] for v in loop] for loop in cells]
    else:
        used = sorted({v for loop in cells for v in loop})
        remap = {v: i for i, v in enumerate(used)}
        pts = pts[used]
        cells = [[remap[v] for v in loop] for loop in cells]
    return PolyMesh(pts, cells, domain=domain)


# ----------------------------------------------------------------------
# refinement
# ----------------------------------------------------------------------
def refine_elements(mesh, marked):
    """Split the marked square/triangle elements; hanging nodes stay regular.

    Geometric squares split into four quadrilaterals through the centroid and
    the straight-side midpoints; geometric triangles into four via the
    midpoints.  Returns ``(new_mesh, child_map)`` where child_map maps every
    old cell id to the list of its new cell ids (a singleton for unmarked
    cells).
    """
    marked = sorted(set(int(m) for m in marked))
    for k in marked:
        if mesh.cell_kind(k) == "polygon":
            raise MeshError(f"cell {k} is neither a geometric square nor triangle")
    points = [p.copy() for p in mesh.points]
    loops = [list(c) for c in mesh.cells]
    directed = {}
    for k, loop in enumerate(loops):
        for i in range(len(loop)):
            directed[(loop[i], loop[(i + 1) % len(loop)])] = k

    def insert_after(cell, u, m):
        loop = loops[cell]
        i = loop.index(u)
        loop.insert(i + 1, m)

    def ensure_midpoint(k):
        """Insert missing straight-side midpoints into cell k and neighbours."""
        verts = np.array([points[v] for v in loops[k]])
        sides = straight_sides(verts)
        # Snapshot vertex ids per run before any insertion: inserting a
        # midpoint shifts loop positions, so the index lists in `sides`
        # would go stale for the remaining runs.
        run_gids = [[loops[k][i] for i in run] for run in sides]
        mids = []
        for gids in run_gids:
            pA = points[gids[0]]
            pB = points[gids[-1]]
            M = 0.5 * (pA + pB)
            scale = np.linalg.norm(pB - pA)
            found = None
            for g in gids:
                if np.linalg.norm(points[g] - M) < MATCH_TOL * scale:
                    found = g
                    break
            if found is None:
                # locate the sub-edge straddling the midpoint
                for u, w in zip(gids[:-1], gids[1:]):
                    lo = np.dot(points[u] - M, pB - pA)
                    hi = np.dot(points[w] - M, pB - pA)
                    if lo < 0 < hi:
                        break
                else:
                    raise MeshError(f"cell {k}: no sub-edge contains side midpoint")
                found = len(points)
                points.append(M)
                insert_after(k, u, found)
                nb = directed.pop((w, u), None)
                directed.pop((u, w), None)
                directed[(u, found)] = k
                directed[(found, w)] = k
                if nb is not None:
                    insert_after(nb, w, found)
                    directed[(w, found)] = nb
                    directed[(found, u)] = nb
            mids.append(found)
        return mids

    for k in marked:
        ensure_midpoint(k)

    def side_runs(k):
        verts = np.array([points[v] for v in loops[k]])
        sides = straight_sides(verts)
        return [[loops[k][i] for i in run] for run in sides]

    def split_run(gids, mid):
        i = gids.index(mid)
        return gids[: i + 1], gids[i:]

    child_loops = {}
    for k in marked:
        runs = side_runs(k)
        corners = [r[0] for r in runs]
        mids = []
        for r in runs:
            pA, pB = points[r[0]], points[r[-1]]
            M = 0.5 * (pA + pB)
            scale = np.linalg.norm(pB - pA)
            mid = next(
                g for g in r if np.linalg.norm(points[g] - M) < MATCH_TOL * scale
            )
            mids.append(mid)
        ns = len(runs)
        halves = [split_run(r, m) for r, m in zip(runs, mids)]
        children = []
        if ns == 4:
            _, centroid = polygon_area_centroid([points[c] for c in corners])
            cid = len(points)
            points.append(centroid)
            for i in range(4):
                first, _ = halves[i]
                _, second = halves[(i - 1) % 4]
                # corner_i .. M_i, centroid, M_{i-1} .. corner_i
                loop = first + [cid] + second[:-1]
                children.append(loop)
        else:  # triangle
            for i in range(3):
                first, _ = halves[i]
                _, second = halves[(i - 1) % 3]
                loop = first + second[:-1]
                children.append(loop)
            children.append([mids[0], mids[1], mids[2]])
        child_loops[k] = children

    new_cells = []
    new_kappa = []
    child_map = {}
    for k, loop in enumerate(loops):
        if k in child_loops:
            ids = []
            for ch in child_loops[k]:
                ids.append(len(new_cells))
                new_cells.append(ch)
                new_kappa.append(mesh.kappa[k])
            child_map[k] = ids
        else:
            child_map[k] = [len(new_cells)]
            new_cells.append(loop)
            new_kappa.append(mesh.kappa[k])
    new_mesh = PolyMesh(np.array(points), new_cells, domain=mesh.domain, kappa=new_kappa)
    return new_mesh, child_map
