"""Built-in oracle suite: manufactured-solution convergence, adjoint
consistency against finite differences, and reciprocity/compatibility
identities.

These checks are independent of the code paths they validate: expected
values come from closed-form solutions, central finite differences of
the actual misfit, and exact discrete identities.  The acceptance tests
reuse them.
"""

import numpy as np

from . import fem, forward, gradient, phantoms
from .levelset import ContrastLevels, LevelSetPair, init_paraboloid, project_smooth
from .mesh import boundary_l2_inner, build_uniform_mesh
from .reconstruct import IterationConfig, evaluate


def quadrature_errors(mesh, u_h, exact, exact_grad):
    """True L2 and H1-seminorm errors vs a closed-form solution.

    Integrates (u_h - u)^2 and |grad u_h - grad u|^2 by the 3-point
    edge-midpoint rule, with the exact solution evaluated at the
    quadrature points (nodal comparison would be superconvergent and
    hide the H1 rate).
    """
    u_h = np.asarray(u_h, dtype=float)
    tris = mesh.triangles
    pts = mesh.nodes[tris]          # (nt, 3, 2)
    uv = u_h[tris]                  # (nt, 3)
    gu_h = np.einsum("tjd,tj->td", mesh.grads, uv)
    err_l2 = 0.0
    err_h1 = 0.0
    w = mesh.tri_areas / 3.0
    for j in range(3):
        k = (j + 1) % 3
        mid = 0.5 * (pts[:, j] + pts[:, k])
        u_mid = 0.5 * (uv[:, j] + uv[:, k])
        err_l2 += np.sum(w * (u_mid - exact(mid[:, 0], mid[:, 1])) ** 2)
        ge = exact_grad(mid[:, 0], mid[:, 1])
        err_h1 += np.sum(w * ((gu_h[:, 0] - ge[0]) ** 2
                              + (gu_h[:, 1] - ge[1]) ** 2))
    return float(np.sqrt(err_l2)), float(np.sqrt(err_h1))


def manufactured_errors(n, settings=None):
    """L2 and H1-seminorm errors for u = cos(pi x) cos(pi y).

    With a = c = 1 the source (2 pi^2 + 1) u reproduces u with zero
    Neumann flux on the unit square, because the normal derivative
    vanishes on all four sides.
    """
    if settings is None:
        settings = fem.SolverSettings(method="direct")
    mesh = build_uniform_mesh(n, n)

    def exact(x, y):
        return np.cos(np.pi * x) * np.cos(np.pi * y)

    def exact_grad(x, y):
        return (-np.pi * np.sin(np.pi * x) * np.cos(np.pi * y),
                -np.pi * np.cos(np.pi * x) * np.sin(np.pi * y))

    f = (2.0 * np.pi ** 2 + 1.0) * exact(mesh.nodes[:, 0], mesh.nodes[:, 1])
    ones = np.ones(mesh.n_nodes)
    system = fem.assemble_system(mesh, ones, ones)
    u = fem.solve_spd(system, fem.assemble_source_load(mesh, f), settings)
    return quadrature_errors(mesh, u, exact, exact_grad)


def check_manufactured(sizes=(17, 33, 65)):
    """Convergence orders across a halving mesh sequence."""
    errs = [manufactured_errors(n) for n in sizes]
    orders_l2 = [np.log2(errs[k][0] / errs[k + 1][0]) for k in range(len(errs) - 1)]
    orders_h1 = [np.log2(errs[k][1] / errs[k + 1][1]) for k in range(len(errs) - 1)]
    ok = all(abs(p - 2.0) <= 0.2 for p in orders_l2) \
        and all(abs(p - 1.0) <= 0.2 for p in orders_h1)
    detail = (f"L2 orders {['%.3f' % p for p in orders_l2]}, "
              f"H1 orders {['%.3f' % p for p in orders_h1]}")
    return ok, detail


def _band_interior_nodes(mesh, phi, eps):
    """Nodes strictly inside the Heaviside band whose whole patch is too."""
    inner = (phi > -0.9 * eps) & (phi < -0.1 * eps)
    in_band = (phi > -eps) & (phi < 0.0)
    neighbor_ok = np.ones(mesh.n_nodes, dtype=bool)
    tris = mesh.triangles
    tri_all_band = in_band[tris].all(axis=1)
    for j in range(3):
        np.logical_and.at(neighbor_ok, tris[:, j], tri_all_band)
    return inner & neighbor_ok


def adjoint_test_problem(n=25, eps=0.1):
    """A misfit landscape with a nonzero residual for the gradient check.

    Data come from the single-pair phantom; the evaluation point is a
    deliberately wrong pair of paraboloid level sets.
    """
    mesh = build_uniform_mesh(n, n)
    levels = ContrastLevels(10.0, 1.0, 10.0, 1.0)
    phantom = phantoms.make_phantom("single-pair", mesh, levels)
    experiments = phantoms.synthesize_data(phantom, mesh)
    ls = LevelSetPair(
        phi_a=init_paraboloid(mesh, (0.42, 0.62), 0.24),
        phi_c=init_paraboloid(mesh, (0.6, 0.42), 0.26),
        levels=levels, eps=eps)
    config = IterationConfig(alpha_a=1.0, alpha_c=1.0)
    return mesh, ls, experiments, config


def random_band_direction(mesh, phi, eps, rng):
    """Random direction supported on band-interior nodes.

    Amplitudes are bounded away from zero so the directional derivative
    cannot degenerate and relative errors stay well-scaled.
    """
    nodes = np.flatnonzero(_band_interior_nodes(mesh, phi, eps))
    if len(nodes) == 0:
        raise ValueError("level set has no band-interior nodes")
    v = np.zeros(mesh.n_nodes)
    v[nodes] = rng.uniform(0.2, 1.0, size=len(nodes))
    return v


def predicted_directional_derivative(mesh, ls, experiments, config, v, which):
    """Assembled-gradient prediction of d/dt misfit(phi + t v).

    The data part of the update right-hand side is paired with the
    direction in a mass inner product; the factor 2 comes from
    differentiating the squared residual norms.  The diffusion part
    pairs with the lumped mass (the area-weighted recovery makes that
    identity exact); the absorption part pairs with the consistent mass
    matrix, which matches the trilinear quadrature of the c-mass term.
    """
    ev = evaluate(mesh, ls, experiments, config)
    sum_da = np.zeros(mesh.n_nodes)
    sum_dc = np.zeros(mesh.n_nodes)
    for u, r in zip(ev.u_list, ev.r_list):
        w = gradient.adjoint_solve(mesh, ev.a, ev.c, r, config.settings,
                                   system=ev.system)
        da, dc = gradient.shape_derivative_fields(mesh, u, w)
        sum_da += da
        sum_dc += dc
    terms = gradient.assemble_L(mesh, ls, sum_da, sum_dc, 1.0, 0.0, 0.0,
                                config.eta)
    if which == "a":
        return 2.0 * float(np.sum(mesh.lumped * terms.data_part_a * v))
    return 2.0 * float(v @ (fem.unit_mass(mesh) @ terms.data_part_c))


def fd_directional_derivative(mesh, ls, experiments, config, v, which, step):
    """Central finite difference with a 3-point Richardson sweep."""
    def misfit_at(t):
        shifted = ls.copy()
        if which == "a":
            shifted.phi_a = ls.phi_a + t * v
        else:
            shifted.phi_c = ls.phi_c + t * v
        return evaluate(mesh, shifted, experiments, config).misfit

    diffs = []
    for h in (step, step / 2.0, step / 4.0):
        diffs.append((misfit_at(h) - misfit_at(-h)) / (2.0 * h))
    r1 = (4.0 * diffs[1] - diffs[0]) / 3.0
    r2 = (4.0 * diffs[2] - diffs[1]) / 3.0
    return (16.0 * r2 - r1) / 15.0


def safe_fd_step(ls, v, which, margin=0.05):
    """Step small enough that no node crosses a Heaviside kink."""
    phi = ls.phi_a if which == "a" else ls.phi_c
    active = np.abs(v) > 0
    if not np.any(active):
        return margin * ls.eps
    # distance of active nodes to the nearest kink (0 or -eps)
    dist = np.minimum(np.abs(phi[active]), np.abs(phi[active] + ls.eps))
    return margin * float(np.min(dist) / np.max(np.abs(v[active])))


def check_adjoint(n=25, n_directions=5, seed=2024, rel_tol=1e-3):
    """Directional-derivative match for both level sets."""
    mesh, ls, experiments, config = adjoint_test_problem(n)
    rng = np.random.default_rng(seed)
    overall = 0.0
    details = []
    for which in ("c", "a"):
        phi = ls.phi_c if which == "c" else ls.phi_a
        worst = 0.0
        for _ in range(n_directions):
            v = random_band_direction(mesh, phi, ls.eps, rng)
            pred = predicted_directional_derivative(
                mesh, ls, experiments, config, v, which)
            step = safe_fd_step(ls, v, which)
            ref = fd_directional_derivative(
                mesh, ls, experiments, config, v, which, step)
            rel = abs(pred - ref) / max(abs(ref), 1e-300)
            worst = max(worst, rel)
        overall = max(overall, worst)
        details.append(f"{which}: worst rel err {worst:.2e}")
    return overall <= rel_tol, "; ".join(details)


def random_admissible_pair(mesh, rng):
    """Smooth coefficient pair strictly inside the admissible box."""
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    a = 1.5 + 0.6 * np.sin(np.pi * (x + rng.uniform(0, 1))) \
        * np.cos(np.pi * (y + rng.uniform(0, 1)))
    c = 2.0 + 0.8 * np.cos(np.pi * (2 * x + rng.uniform(0, 1))) \
        * np.sin(np.pi * (y + rng.uniform(0, 1)))
    return a, c


def check_reciprocity(n=50, n_pairs=3, seed=11, tol=1e-8):
    """Neumann-to-Dirichlet symmetry and the zero-source compatibility
    identity, for random admissible pairs and the four excitations."""
    mesh = build_uniform_mesh(n, n)
    gs = phantoms.make_excitations(mesh)
    settings = fem.SolverSettings(method="direct")
    rng = np.random.default_rng(seed)
    worst_rec = 0.0
    worst_comp = 0.0
    for _ in range(n_pairs):
        a, c = random_admissible_pair(mesh, rng)
        system = fem.assemble_system(mesh, a, c)
        mass_c = fem.mass_matrix(mesh, c)
        traces = []
        for g in gs:
            b = fem.assemble_neumann_load(mesh, g)
            u = fem.solve_spd(system, b, settings)
            traces.append(fem.trace(mesh, u))
            comp = abs(float(np.ones(mesh.n_nodes) @ (mass_c @ u)) - float(b.sum()))
            worst_comp = max(worst_comp, comp / max(1.0, abs(float(b.sum()))))
        for m in range(len(gs)):
            for k in range(m + 1, len(gs)):
                lhs = boundary_l2_inner(mesh, gs[m], traces[k])
                rhs = boundary_l2_inner(mesh, gs[k], traces[m])
                scale = max(abs(lhs), abs(rhs), 1e-30)
                worst_rec = max(worst_rec, abs(lhs - rhs) / scale)
    ok = worst_rec <= tol and worst_comp <= tol
    return ok, (f"reciprocity worst rel {worst_rec:.2e}, "
                f"compatibility worst rel {worst_comp:.2e}")


def run_all(verbose=True):
    """Run the full oracle suite; returns True when everything passes."""
    checks = [
        ("manufactured solution convergence", check_manufactured),
        ("adjoint directional derivative", check_adjoint),
        ("reciprocity and compatibility", check_reciprocity),
    ]
    all_ok = True
    for name, fn in checks:
        ok, detail = fn()
        all_ok &= ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return all_ok
