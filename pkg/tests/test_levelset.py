import numpy as np
import pytest

from dotrecon.levelset import (ContrastLevels, LevelSetPair, classify,
                               curvature_term, heaviside_eps,
                               heaviside_eps_prime, init_paraboloid,
                               levelset_from_mask, perimeter_estimate,
                               project_sharp, project_smooth)
from dotrecon.mesh import build_uniform_mesh

LEVELS = ContrastLevels(10.0, 1.0, 10.0, 1.0)


def pair(mesh, phi_a, phi_c, eps=0.1):
    return LevelSetPair(phi_a=phi_a, phi_c=phi_c, levels=LEVELS, eps=eps)


def test_heaviside_branches():
    assert heaviside_eps(0.5, 0.1) == 1.0
    assert heaviside_eps(-0.05, 0.1) == 0.5
    assert heaviside_eps(-0.2, 0.1) == 0.0
    assert heaviside_eps(0.0, 0.1) == 1.0
    assert heaviside_eps(-0.1, 0.1) == 0.0


def test_heaviside_monotone_range():
    t = np.linspace(-1, 1, 2001)
    h = heaviside_eps(t, 0.3)
    assert np.all(np.diff(h) >= 0)
    assert h.min() == 0.0 and h.max() == 1.0
    # agrees with the sharp step outside (-eps, 0)
    outside = (t <= -0.3) | (t >= 0.0)
    sharp = (t >= 0.0).astype(float)
    assert np.all(h[outside] == sharp[outside])


def test_heaviside_prime_branches():
    assert heaviside_eps_prime(-0.05, 0.1) == pytest.approx(10.0)
    assert heaviside_eps_prime(0.3, 0.1) == 0.0
    assert heaviside_eps_prime(-0.1, 0.1) == 0.0  # open interval
    assert heaviside_eps_prime(0.0, 0.1) == 0.0


@pytest.mark.parametrize("fn", [heaviside_eps, heaviside_eps_prime])
def test_heaviside_rejects_bad_eps(fn):
    with pytest.raises(ValueError):
        fn(0.1, 0.0)


def test_project_sharp_constant_regions():
    mesh = build_uniform_mesh(6, 6)
    n = mesh.n_nodes
    ls = pair(mesh, np.full(n, 0.3), np.full(n, -0.2))
    a, c = project_sharp(ls)
    assert np.all(a == 10.0)
    assert np.all(c == 1.0)


def test_project_sharp_disk_and_scale_invariance():
    mesh = build_uniform_mesh(30, 30)
    phi = init_paraboloid(mesh, (0.5, 0.5), 0.25)
    ls = pair(mesh, phi, phi)
    a, _ = project_sharp(ls)
    inside = np.hypot(mesh.nodes[:, 0] - 0.5, mesh.nodes[:, 1] - 0.5) <= 0.25
    assert np.all(a[inside] == 10.0)
    assert np.all(a[~inside] == 1.0)
    for lam in (0.5, 3.0, 100.0):
        scaled = pair(mesh, lam * phi, lam * phi)
        a2, c2 = project_sharp(scaled)
        assert np.array_equal(a2, a)


def test_project_smooth_blend_and_agreement():
    mesh = build_uniform_mesh(5, 5)
    n = mesh.n_nodes
    half = pair(mesh, np.full(n, -0.05), np.full(n, -0.05))
    a, c = project_smooth(half)
    assert np.allclose(a, 5.5)
    assert np.allclose(c, 5.5)
    # outside the band, smooth and sharp projections agree exactly
    for val in (0.2, -0.4):
        ls = pair(mesh, np.full(n, val), np.full(n, val))
        assert np.array_equal(project_smooth(ls)[0], project_sharp(ls)[0])
        assert np.array_equal(project_smooth(ls)[1], project_sharp(ls)[1])


def test_project_smooth_stays_in_hull():
    mesh = build_uniform_mesh(12, 12)
    rng = np.random.default_rng(1)
    ls = pair(mesh, rng.normal(size=mesh.n_nodes), rng.normal(size=mesh.n_nodes))
    a, c = project_smooth(ls)
    assert np.all((a >= 1.0) & (a <= 10.0))
    assert np.all((c >= 1.0) & (c <= 10.0))
    a_s, c_s = project_sharp(ls)
    assert set(np.unique(a_s)) <= {1.0, 10.0}
    assert set(np.unique(c_s)) <= {1.0, 10.0}


def test_classify_half_level():
    mesh = build_uniform_mesh(5, 5)
    n = mesh.n_nodes
    ls = pair(mesh, np.full(n, -0.04), np.full(n, -0.06))
    a, c = classify(ls)
    assert np.all(a == 10.0)  # H_eps = 0.6 >= 1/2
    assert np.all(c == 1.0)   # H_eps = 0.4 < 1/2


def test_levels_validation():
    with pytest.raises(ValueError):
        ContrastLevels(1.0, 1.0, 10.0, 1.0)
    with pytest.raises(ValueError):
        ContrastLevels(10.0, -1.0, 10.0, 1.0)


def test_curvature_zero_cases():
    mesh = build_uniform_mesh(20, 20)
    const = np.full(mesh.n_nodes, 0.7)
    assert np.allclose(curvature_term(mesh, const, 0.1), 0.0)
    # affine level set whose band misses every node
    affine = 2.0 + mesh.nodes[:, 0]
    assert np.allclose(curvature_term(mesh, affine, 0.1), 0.0)
    with pytest.raises(ValueError):
        curvature_term(mesh, const, 0.1, eta=0.0)


def test_curvature_circle_refinement():
    # signed distance to a circle: the normalized-gradient divergence is
    # -1/r inside the band, so the term is (1/eps) * (-1/r)
    R, eps = 0.3, 0.1
    for n, tol in ((65, 0.05), (129, 0.02)):
        mesh = build_uniform_mesh(n, n)
        d = np.hypot(mesh.nodes[:, 0] - 0.5, mesh.nodes[:, 1] - 0.5)
        phi = R - d
        curv = curvature_term(mesh, phi, eps)
        band = (phi > -0.8 * eps) & (phi < -0.2 * eps)
        expected = (1.0 / eps) * (-1.0 / d[band])
        rel = np.abs(curv[band] - expected) / np.abs(expected)
        assert np.median(rel) <= tol
        assert np.percentile(rel, 90) <= 0.2


def test_perimeter_constant_is_zero():
    mesh = build_uniform_mesh(16, 16)
    assert perimeter_estimate(mesh, np.full(mesh.n_nodes, 2.0), 0.1) == 0.0


def test_perimeter_circle_refinement():
    # coarea: int |grad H_eps| -> length of the half-level contour
    R = 0.25
    rels = []
    for n, eps in ((81, 0.05), (161, 0.025)):
        mesh = build_uniform_mesh(n, n)
        d = np.hypot(mesh.nodes[:, 0] - 0.5, mesh.nodes[:, 1] - 0.5)
        est = perimeter_estimate(mesh, R - d, eps)
        # the band lies outside radius R; its middle circle has radius R + eps/2
        assert est == pytest.approx(2 * np.pi * (R + eps / 2), rel=0.02)
        rels.append(abs(est - 2 * np.pi * R) / (2 * np.pi * R))
    assert rels[1] <= 0.10
    assert rels[1] < rels[0]


def test_perimeter_scaling_regression():
    # frozen sweep values; estimate must not grow while the shrinking
    # transition band stays mesh-resolved (lambda = 2 here)
    mesh = build_uniform_mesh(81, 81)
    d = np.hypot(mesh.nodes[:, 0] - 0.5, mesh.nodes[:, 1] - 0.5)
    phi = 0.25 - d
    vals = [perimeter_estimate(mesh, lam * phi, 0.05) for lam in (1.0, 2.0, 4.0)]
    assert vals[1] <= vals[0]
    frozen = [1.7591, 1.7105, 1.7239]
    for got, want in zip(vals, frozen):
        assert got == pytest.approx(want, abs=2e-4)


def test_paraboloid_values_and_area():
    # odd node count puts a node exactly at the center
    mesh49 = build_uniform_mesh(49, 49)
    phi49 = init_paraboloid(mesh49, (0.5, 0.5), 0.2)
    center_idx = np.argmin(np.abs(mesh49.nodes - [0.5, 0.5]).sum(axis=1))
    assert np.allclose(mesh49.nodes[center_idx], [0.5, 0.5])
    assert phi49[center_idx] == pytest.approx(0.04, abs=1e-12)
    assert phi49[0] == pytest.approx(0.04 - 0.5, abs=1e-12)

    mesh = build_uniform_mesh(50, 50)
    phi = init_paraboloid(mesh, (0.5, 0.5), 0.2)
    # nodal area of {phi >= 0} vs the disk area, within a boundary layer
    cell = (1.0 / 49.0) ** 2
    nodal_area = np.sum(phi >= 0.0) * cell
    bound = 1.5 * (2 * np.pi * 0.2 / 49.0 + 4 * cell)
    assert abs(nodal_area - np.pi * 0.04) <= bound
    # radius beyond the domain diagonal makes phi positive everywhere
    assert np.all(init_paraboloid(mesh, (0.5, 0.5), 2.0) >= 0.0)
    with pytest.raises(ValueError):
        init_paraboloid(mesh, (0.5, 0.5), 0.0)


def test_levelset_from_mask_projects_exactly():
    mesh = build_uniform_mesh(25, 25)
    mask = mesh.nodes[:, 0] > 0.6
    phi = levelset_from_mask(mask)
    ls = pair(mesh, phi, phi, eps=0.1)
    a_sharp, _ = project_sharp(ls)
    a_smooth, _ = project_smooth(ls)
    assert np.array_equal(a_sharp, a_smooth)
    assert np.all(a_sharp[mask] == 10.0)
    assert np.all(a_sharp[~mask] == 1.0)
