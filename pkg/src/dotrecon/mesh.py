"""Uniform P1 triangulations of axis-aligned rectangles.

Nodes are ordered row-major (index = iy*nx + ix, rows of constant y).
Every grid cell is split along its bottom-left -> top-right diagonal, so
meshes are fully deterministic and bit-reproducible.  Boundary nodes and
edges are enumerated counterclockwise starting at the bottom-left corner;
each boundary edge carries the side of the rectangle it lies on.
"""

from enum import Enum

import numpy as np


class Side(Enum):
    """The four sides of the rectangle, in counterclockwise order."""

    BOTTOM = "bottom"
    RIGHT = "right"
    TOP = "top"
    LEFT = "left"


class Mesh:
    """Triangulated rectangle with precomputed geometry.

    Attributes
    ----------
    nx, ny : int
        Node counts per side.
    rect : tuple of float
        (x0, y0, x1, y1) rectangle corners.
    nodes : ndarray, shape (n_nodes, 2)
        Node coordinates, row-major ordering.
    triangles : ndarray, shape (n_triangles, 3)
        Vertex indices, counterclockwise.
    tri_areas : ndarray, shape (n_triangles,)
        Triangle areas (all positive).
    grads : ndarray, shape (n_triangles, 3, 2)
        Constant gradients of the three P1 basis functions per triangle.
    boundary_nodes : ndarray, shape (n_boundary,)
        Global node indices, counterclockwise from the bottom-left corner.
    boundary_edges : ndarray, shape (n_edges, 2)
        Node index pairs (start, end) along the traversal.
    edge_sides : list of Side
        Side tag of each boundary edge.
    edge_lengths : ndarray, shape (n_edges,)
    boundary_weights : ndarray, shape (n_boundary,)
        Trapezoidal quadrature weight of each boundary node.
    arc_positions : ndarray, shape (n_boundary,)
        Arclength of each boundary node from the bottom-left corner,
        in [0, perimeter).
    boundary_index : ndarray, shape (n_nodes,)
        Position of each node in the boundary ordering, -1 for interior.
    lumped : ndarray, shape (n_nodes,)
        Lumped P1 mass weights (sum of adjacent triangle areas / 3).
    """

    def __init__(self, nx, ny, rect, nodes, triangles):
        self.nx = nx
        self.ny = ny
        self.rect = rect
        self.nodes = nodes
        self.triangles = triangles
        self.n_nodes = nodes.shape[0]
        self.n_triangles = triangles.shape[0]
        self._build_geometry()
        self._build_boundary()

    def _build_geometry(self):
        p0 = self.nodes[self.triangles[:, 0]]
        p1 = self.nodes[self.triangles[:, 1]]
        p2 = self.nodes[self.triangles[:, 2]]
        d1 = p1 - p0
        d2 = p2 - p0
        signed = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        if np.any(signed <= 0.0):
            raise ValueError("triangulation produced non-positive element areas")
        self.tri_areas = signed
        # grad psi_i = rot90(p_j - p_k) / (2A) for (i, j, k) cyclic
        grads = np.empty((self.n_triangles, 3, 2))
        pts = (p0, p1, p2)
        for i in range(3):
            pj = pts[(i + 1) % 3]
            pk = pts[(i + 2) % 3]
            grads[:, i, 0] = pj[:, 1] - pk[:, 1]
            grads[:, i, 1] = pk[:, 0] - pj[:, 0]
        grads /= (2.0 * signed)[:, None, None]
        self.grads = grads
        lumped = np.zeros(self.n_nodes)
        np.add.at(lumped, self.triangles.ravel(),
                  np.repeat(self.tri_areas / 3.0, 3))
        self.lumped = lumped

    def _build_boundary(self):
        nx, ny = self.nx, self.ny
        idx = lambda ix, iy: iy * nx + ix

        bnodes = []
        for ix in range(nx):
            bnodes.append(idx(ix, 0))
        for iy in range(1, ny):
            bnodes.append(idx(nx - 1, iy))
        for ix in range(nx - 2, -1, -1):
            bnodes.append(idx(ix, ny - 1))
        for iy in range(ny - 2, 0, -1):
            bnodes.append(idx(0, iy))
        self.boundary_nodes = np.asarray(bnodes, dtype=np.int64)

        edges = []
        sides = []
        for ix in range(nx - 1):
            edges.append((idx(ix, 0), idx(ix + 1, 0)))
            sides.append(Side.BOTTOM)
        for iy in range(ny - 1):
            edges.append((idx(nx - 1, iy), idx(nx - 1, iy + 1)))
            sides.append(Side.RIGHT)
        for ix in range(nx - 1, 0, -1):
            edges.append((idx(ix, ny - 1), idx(ix - 1, ny - 1)))
            sides.append(Side.TOP)
        for iy in range(ny - 1, 0, -1):
            edges.append((idx(0, iy), idx(0, iy - 1)))
            sides.append(Side.LEFT)
        self.boundary_edges = np.asarray(edges, dtype=np.int64)
        self.edge_sides = sides
        seg = self.nodes[self.boundary_edges[:, 1]] - self.nodes[self.boundary_edges[:, 0]]
        self.edge_lengths = np.hypot(seg[:, 0], seg[:, 1])

        bindex = np.full(self.n_nodes, -1, dtype=np.int64)
        bindex[self.boundary_nodes] = np.arange(len(self.boundary_nodes))
        self.boundary_index = bindex

        w = np.zeros(len(self.boundary_nodes))
        half = 0.5 * self.edge_lengths
        np.add.at(w, bindex[self.boundary_edges[:, 0]], half)
        np.add.at(w, bindex[self.boundary_edges[:, 1]], half)
        self.boundary_weights = w

        arc = np.concatenate(([0.0], np.cumsum(self.edge_lengths[:-1])))
        self.arc_positions = arc
        self.perimeter = float(np.sum(self.edge_lengths))

    @property
    def spacing(self):
        """(hx, hy) grid spacings."""
        x0, y0, x1, y1 = self.rect
        return (x1 - x0) / (self.nx - 1), (y1 - y0) / (self.ny - 1)


def build_uniform_mesh(nx, ny, rect=(0.0, 0.0, 1.0, 1.0)):
    """Build the uniform triangulation of a rectangle.

    Parameters
    ----------
    nx, ny : int
        Number of nodes per side, both >= 2.
    rect : tuple of float
        (x0, y0, x1, y1), must be non-degenerate.

    Returns
    -------
    Mesh
    """
    if nx < 2 or ny < 2:
        raise ValueError(f"need at least 2 nodes per side, got nx={nx}, ny={ny}")
    x0, y0, x1, y1 = (float(v) for v in rect)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate rectangle {rect!r}")

    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    tris = []
    for iy in range(ny - 1):
        for ix in range(nx - 1):
            bl = iy * nx + ix
            br = bl + 1
            tl = bl + nx
            tr = tl + 1
            tris.append((bl, br, tr))
            tris.append((bl, tr, tl))
    triangles = np.asarray(tris, dtype=np.int64)
    return Mesh(nx, ny, (x0, y0, x1, y1), nodes, triangles)


def boundary_edges_of(mesh, side):
    """Boundary edges on one side, ordered along the traversal."""
    keep = [i for i, s in enumerate(mesh.edge_sides) if s is side]
    return mesh.boundary_edges[keep]


def boundary_l2_inner(mesh, f, g):
    """Trapezoidal approximation of the boundary inner product of f and g.

    Both arguments are arrays of values at the boundary nodes, in boundary
    ordering.  Symmetric, bilinear, positive definite.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    nb = len(mesh.boundary_nodes)
    if f.shape != (nb,) or g.shape != (nb,):
        raise ValueError(
            f"boundary value arrays must have shape ({nb},), "
            f"got {f.shape} and {g.shape}")
    return float(np.sum(mesh.boundary_weights * f * g))


def boundary_l2_norm(mesh, f):
    """Trapezoidal boundary L2 norm."""
    return float(np.sqrt(max(boundary_l2_inner(mesh, f, f), 0.0)))
