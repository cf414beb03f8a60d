import numpy as np
import pytest

from dotrecon.mesh import (Side, boundary_edges_of, boundary_l2_inner,
                           build_uniform_mesh)


def test_counts_paper_grid():
    mesh = build_uniform_mesh(50, 50)
    assert mesh.n_nodes == 2500
    assert mesh.n_triangles == 4802


def test_counts_smallest():
    mesh = build_uniform_mesh(2, 2)
    assert mesh.n_nodes == 4
    assert mesh.n_triangles == 2


def test_counts_rectangular():
    mesh = build_uniform_mesh(3, 2)
    assert mesh.n_nodes == 6
    assert mesh.n_triangles == 4
    assert mesh.tri_areas.sum() == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("nx,ny", [(1, 5), (5, 1), (0, 0)])
def test_rejects_too_few_nodes(nx, ny):
    with pytest.raises(ValueError):
        build_uniform_mesh(nx, ny)


def test_rejects_degenerate_rectangle():
    with pytest.raises(ValueError):
        build_uniform_mesh(5, 5, rect=(0.0, 0.0, 0.0, 1.0))


@pytest.mark.parametrize("nx,ny,rect", [
    (50, 50, (0.0, 0.0, 1.0, 1.0)),
    (7, 11, (0.0, 0.0, 2.0, 0.5)),
    (13, 5, (-1.0, 2.0, 3.0, 4.0)),
])
def test_area_partition(nx, ny, rect):
    mesh = build_uniform_mesh(nx, ny, rect)
    x0, y0, x1, y1 = rect
    exact = (x1 - x0) * (y1 - y0)
    assert mesh.tri_areas.sum() == pytest.approx(exact, rel=1e-12)
    assert np.all(mesh.tri_areas > 0)


def test_edge_consistency():
    # every boundary edge in exactly one triangle, interior edges in two
    mesh = build_uniform_mesh(9, 7)
    counts = {}
    for tri in mesh.triangles:
        for i in range(3):
            e = tuple(sorted((tri[i], tri[(i + 1) % 3])))
            counts[e] = counts.get(e, 0) + 1
    boundary = {tuple(sorted(e)) for e in mesh.boundary_edges}
    for e, n in counts.items():
        assert n == (1 if e in boundary else 2)
    assert boundary <= set(counts)


def test_boundary_traversal_closed():
    mesh = build_uniform_mesh(6, 9)
    edges = mesh.boundary_edges
    # consecutive edges chain tail-to-head and close the loop
    for k in range(len(edges)):
        assert edges[k][1] == edges[(k + 1) % len(edges)][0]
    assert len(mesh.boundary_nodes) == len(set(mesh.boundary_nodes))
    assert mesh.boundary_nodes[0] == 0  # bottom-left corner first


def test_every_edge_has_one_side():
    mesh = build_uniform_mesh(8, 8)
    assert len(mesh.edge_sides) == len(mesh.boundary_edges)
    for side in Side:
        edges = boundary_edges_of(mesh, side)
        assert len(edges) == 7


def test_side_edges_uniform_spacing():
    mesh = build_uniform_mesh(50, 50)
    bottom = boundary_edges_of(mesh, Side.BOTTOM)
    assert len(bottom) == 49
    lengths = np.linalg.norm(mesh.nodes[bottom[:, 1]] - mesh.nodes[bottom[:, 0]],
                             axis=1)
    assert np.allclose(lengths, 1.0 / 49.0)


def test_side_lengths_sum_to_perimeter():
    mesh = build_uniform_mesh(2, 2)
    left = boundary_edges_of(mesh, Side.LEFT)
    assert len(left) == 1
    total = 0.0
    for side in Side:
        edges = boundary_edges_of(mesh, side)
        total += np.linalg.norm(mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]],
                                axis=1).sum()
    assert total == pytest.approx(4.0, rel=1e-12)


def test_boundary_inner_constants():
    mesh = build_uniform_mesh(50, 50)
    ones = np.ones(len(mesh.boundary_nodes))
    assert boundary_l2_inner(mesh, ones, ones) == pytest.approx(4.0, rel=1e-12)
    assert boundary_l2_inner(mesh, ones, 0 * ones) == 0.0


def test_boundary_inner_bottom_indicator():
    # hand-computed trapezoid values for the nodal indicator of the
    # bottom side on the 50-node grid (h = 1/49):
    #   excluding corners: 47 interior edges + 2 half-edges = 48 h
    #   including corners: adds the half-edges on left/right = 1 + h
    mesh = build_uniform_mesh(50, 50)
    h = 1.0 / 49.0
    pts = mesh.nodes[mesh.boundary_nodes]
    on_bottom = pts[:, 1] == 0.0
    corners = (pts[:, 0] == 0.0) | (pts[:, 0] == 1.0)

    inner = (on_bottom & ~corners).astype(float)
    assert boundary_l2_inner(mesh, inner, inner) == pytest.approx(48.0 * h, rel=1e-12)

    full = on_bottom.astype(float)
    assert boundary_l2_inner(mesh, full, full) == pytest.approx(1.0 + h, rel=1e-12)
    # both variants sit within one mesh cell of the exact segment length 1
    assert abs(boundary_l2_inner(mesh, inner, inner) - 1.0) <= 2.0 * h
    assert abs(boundary_l2_inner(mesh, full, full) - 1.0) <= 2.0 * h


def test_boundary_inner_symmetric_bilinear_positive():
    mesh = build_uniform_mesh(11, 13)
    rng = np.random.default_rng(3)
    nb = len(mesh.boundary_nodes)
    f, g, w = rng.normal(size=(3, nb))
    assert boundary_l2_inner(mesh, f, g) == pytest.approx(
        boundary_l2_inner(mesh, g, f), rel=1e-12)
    lhs = boundary_l2_inner(mesh, 2.0 * f + 3.0 * w, g)
    rhs = 2.0 * boundary_l2_inner(mesh, f, g) + 3.0 * boundary_l2_inner(mesh, w, g)
    assert lhs == pytest.approx(rhs, rel=1e-12)
    assert boundary_l2_inner(mesh, f, f) > 0.0


def test_boundary_inner_rejects_size_mismatch():
    mesh = build_uniform_mesh(5, 5)
    with pytest.raises(ValueError):
        boundary_l2_inner(mesh, np.ones(3), np.ones(3))


def test_arc_positions_monotone_within_perimeter():
    mesh = build_uniform_mesh(12, 9, rect=(0.0, 0.0, 2.0, 1.0))
    arc = mesh.arc_positions
    assert arc[0] == 0.0
    assert np.all(np.diff(arc) > 0)
    assert arc[-1] < mesh.perimeter
