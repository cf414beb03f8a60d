"""Ground-truth coefficient pairs, the four canonical excitations, and
synthetic measurement generation.

Phantom contrast values are 10 inside an inclusion and 1 outside for
both coefficients.  Inclusion shapes beyond that are fixed constants of
this package, recorded in each phantom's geometry metadata.
"""

from dataclasses import dataclass

import numpy as np

from . import fem, forward
from .forward import ExperimentSet
from .levelset import ContrastLevels
from .mesh import Side, build_uniform_mesh

PHANTOM_NAMES = ("single-pair", "complex-pair", "separated", "near", "overlapping")


@dataclass
class Phantom:
    """Exact two-valued coefficient pair with its generating geometry."""

    name: str
    a_true: np.ndarray
    c_true: np.ndarray
    levels: ContrastLevels
    geometry: dict


def _disk(center, radius):
    return {"shape": "disk", "center": list(center), "radius": radius}


def _lshape(x0, y0, x1, y1, thickness):
    return {"shape": "lshape", "corner": [x0, y0], "extent": [x1, y1],
            "thickness": thickness}


def _inside(shape, pts):
    if shape["shape"] == "disk":
        cx, cy = shape["center"]
        r = shape["radius"]
        return (pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2 <= r ** 2
    if shape["shape"] == "lshape":
        x0, y0 = shape["corner"]
        x1, y1 = shape["extent"]
        t = shape["thickness"]
        horiz = (pts[:, 0] >= x0) & (pts[:, 0] <= x1) \
            & (pts[:, 1] >= y0) & (pts[:, 1] <= y0 + t)
        vert = (pts[:, 0] >= x0) & (pts[:, 0] <= x0 + t) \
            & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
        return horiz | vert
    raise ValueError(f"unknown shape {shape['shape']!r}")


# Inclusion placements (all strictly inside the unit square).  Disk
# centers and radii are tuned so that on the reference 50-node grid no
# node falls on the bounding circle itself; nodes exactly on the
# interface are data-indistinguishable knife-edge cases that block
# pixel-exact recovery.
_GEOMETRIES = {
    "single-pair": {
        "a": [_disk((0.306, 0.694), 0.152)],
        "c": [_disk((0.694, 0.306), 0.152)],
    },
    "complex-pair": {
        "a": [_disk((0.65, 0.65), 0.15)],
        "c": [_lshape(0.25, 0.25, 0.75, 0.75, 0.15)],
    },
    "separated": {
        "a": [_disk((0.306, 0.694), 0.152)],
        "c": [_disk((0.694, 0.306), 0.152)],
    },
    "near": {
        "a": [_disk((0.4, 0.6), 0.13)],
        "c": [_disk((0.6, 0.4), 0.13)],
    },
    "overlapping": {
        "a": [_disk((0.45, 0.55), 0.18)],
        "c": [_disk((0.55, 0.45), 0.18)],
    },
}


def region_mask(mesh, shapes):
    """Nodal mask of the union of inclusion shapes."""
    mask = np.zeros(mesh.n_nodes, dtype=bool)
    for shape in shapes:
        mask |= _inside(shape, mesh.nodes)
    return mask


def make_phantom(name, mesh, levels=None):
    """Build one of the named ground-truth coefficient pairs."""
    if name not in _GEOMETRIES:
        raise ValueError(
            f"unknown phantom {name!r}; choose from {', '.join(PHANTOM_NAMES)}")
    if levels is None:
        levels = ContrastLevels(a1=10.0, a2=1.0, c1=10.0, c2=1.0)
    geom = _GEOMETRIES[name]
    a_mask = region_mask(mesh, geom["a"])
    c_mask = region_mask(mesh, geom["c"])
    a_true = np.where(a_mask, levels.a1, levels.a2)
    c_true = np.where(c_mask, levels.c1, levels.c2)
    return Phantom(name=name, a_true=a_true, c_true=c_true,
                   levels=levels, geometry=geom)


def make_excitations(mesh):
    """The four canonical excitations: unit flux on the middle half of
    each side (bottom, right, top, left), zero elsewhere.

    Values are assigned at boundary nodes: 1 strictly inside the middle
    segment, 1/2 exactly at its endpoints, 0 outside.
    """
    x0, y0, x1, y1 = mesh.rect
    spans = {
        Side.BOTTOM: (0, x0, x1),
        Side.RIGHT: (1, y0, y1),
        Side.TOP: (0, x0, x1),
        Side.LEFT: (1, y0, y1),
    }
    bpts = mesh.nodes[mesh.boundary_nodes]
    side_of_node = _node_sides(mesh)
    out = []
    for side in (Side.BOTTOM, Side.RIGHT, Side.TOP, Side.LEFT):
        axis, lo, hi = spans[side]
        q1 = lo + 0.25 * (hi - lo)
        q3 = lo + 0.75 * (hi - lo)
        t = bpts[:, axis]
        g = np.zeros(len(bpts))
        on_side = side_of_node[side]
        g[on_side & (t > q1) & (t < q3)] = 1.0
        g[on_side & ((t == q1) | (t == q3))] = 0.5
        out.append(g)
    return out


def _node_sides(mesh):
    """Boolean masks, per side, over boundary nodes touched by that side."""
    nb = len(mesh.boundary_nodes)
    masks = {side: np.zeros(nb, dtype=bool) for side in Side}
    for (i, j), side in zip(mesh.boundary_edges, mesh.edge_sides):
        masks[side][mesh.boundary_index[i]] = True
        masks[side][mesh.boundary_index[j]] = True
    return masks


def synthesize_data(phantom, mesh, refine=1, delta=0.0, seed=0, settings=None):
    """Generate an ExperimentSet for a phantom.

    The forward problems are solved on a mesh refined by the integer
    factor `refine` (with the phantom geometry re-sampled there) and the
    traces restricted to the working mesh's boundary nodes; noise of
    exact norm delta is then added per experiment with derived seeds.
    """
    if refine < 1 or int(refine) != refine:
        raise ValueError("refine must be a positive integer")
    if settings is None:
        settings = fem.SolverSettings(method="direct")

    if refine == 1:
        fine, fine_phantom = mesh, phantom
        restrict = np.arange(len(mesh.boundary_nodes))
    else:
        fine = build_uniform_mesh(refine * (mesh.nx - 1) + 1,
                                  refine * (mesh.ny - 1) + 1, mesh.rect)
        fine_phantom = make_phantom(phantom.name, fine, phantom.levels)
        restrict = _boundary_restriction(mesh, fine)

    gs_fine = make_excitations(fine)
    gs_work = make_excitations(mesh)
    system = fem.assemble_system(fine, fine_phantom.a_true, fine_phantom.c_true)
    measurements = []
    for m, g in enumerate(gs_fine):
        _, h = forward.forward_solve(fine, fine_phantom.a_true,
                                     fine_phantom.c_true, g, settings,
                                     system=system)
        h = h[restrict]
        measurements.append(forward.add_noise(mesh, h, delta, seed + m))
    return ExperimentSet(excitations=gs_work, measurements=measurements,
                         delta=delta)


def _boundary_restriction(coarse, fine):
    """Indices of fine boundary nodes located at the coarse boundary nodes."""
    fine_pts = fine.nodes[fine.boundary_nodes]
    coarse_pts = coarse.nodes[coarse.boundary_nodes]
    hx, hy = fine.spacing
    tol = 1e-9 * max(hx, hy)
    idx = np.empty(len(coarse_pts), dtype=np.int64)
    for k, p in enumerate(coarse_pts):
        d = np.abs(fine_pts - p).sum(axis=1)
        j = int(np.argmin(d))
        if d[j] > tol:
            raise ValueError("refined mesh boundary does not nest the working mesh")
        idx[k] = j
    return idx
