"""Parameter-to-measurement maps, data misfit, noise model, and the
numerical probes of the forward map's continuity properties."""

from dataclasses import dataclass, field

import numpy as np

from . import fem
from .fem import SolverSettings
from .mesh import boundary_l2_inner, boundary_l2_norm


@dataclass
class ParameterBox:
    """Known admissibility bounds for the coefficient pair."""

    a_lo: float = 0.5
    a_hi: float = 20.0
    c_lo: float = 0.5
    c_hi: float = 20.0

    def __post_init__(self):
        if not (0 < self.a_lo <= self.a_hi and 0 < self.c_lo <= self.c_hi):
            raise ValueError("parameter box must satisfy 0 < lo <= hi")

    def as_tuple(self):
        return (self.a_lo, self.a_hi, self.c_lo, self.c_hi)

    def contains(self, a, c):
        return (np.all(a >= self.a_lo) and np.all(a <= self.a_hi)
                and np.all(c >= self.c_lo) and np.all(c <= self.c_hi))


@dataclass
class ExperimentSet:
    """The available boundary experiments: fluxes g_m, data h_m, noise level."""

    excitations: list
    measurements: list
    delta: float = 0.0

    def __post_init__(self):
        if len(self.excitations) < 1:
            raise ValueError("need at least one experiment")
        if len(self.excitations) != len(self.measurements):
            raise ValueError("excitations and measurements must pair up")
        if self.delta < 0:
            raise ValueError("noise level must be nonnegative")

    def __len__(self):
        return len(self.excitations)


def forward_solve(mesh, a, c, g, settings=None, box=None, system=None):
    """Solve the forward problem for one excitation.

    Returns (u, h) where u is the nodal solution and h its boundary
    trace.  A pre-assembled system for the same (a, c) may be passed to
    avoid reassembly.
    """
    if system is None:
        system = fem.assemble_system(
            mesh, a, c, box=box.as_tuple() if box is not None else None)
    b = fem.assemble_neumann_load(mesh, g)
    u = fem.solve_spd(system, b, settings)
    return u, fem.trace(mesh, u)


def residuals(mesh, a, c, experiments, settings=None, box=None, system=None):
    """Boundary residuals trace(u_m) - h_m for every experiment.

    The forward solutions u_m are returned alongside for reuse in the
    gradient assembly; all experiments share one assembled system.
    """
    if system is None:
        system = fem.assemble_system(
            mesh, a, c, box=box.as_tuple() if box is not None else None)
    r_list, u_list = [], []
    for g, h in zip(experiments.excitations, experiments.measurements):
        u, hu = forward_solve(mesh, a, c, g, settings, system=system)
        r_list.append(hu - np.asarray(h, dtype=float))
        u_list.append(u)
    return r_list, u_list


def misfit(mesh, r_list):
    """Sum of squared boundary L2 norms of the residuals."""
    return float(sum(boundary_l2_inner(mesh, r, r) for r in r_list))


def add_noise(mesh, h, delta, seed):
    """Perturb boundary data by noise of exact L2(Gamma) norm delta.

    The perturbation is uniform(-1, 1) per boundary node, rescaled so
    its trapezoidal boundary norm equals delta; deterministic per seed.
    """
    if delta < 0:
        raise ValueError("noise level must be nonnegative")
    h = np.asarray(h, dtype=float)
    if delta == 0.0:
        return h.copy()
    rng = np.random.default_rng(seed)
    e = rng.uniform(-1.0, 1.0, size=h.shape)
    norm = boundary_l2_norm(mesh, e)
    if norm == 0.0:
        raise ValueError("cannot scale noise on a zero-length boundary")
    return h + (delta / norm) * e


def holder_probe(mesh, base, perturbed, g, exponent_s, settings=None, box=None):
    """Continuity probe of the parameter-to-solution map.

    Returns (lhs, rhs_core) with lhs the discrete H1 norm of the
    solution difference and rhs_core the (L1 + L1) coefficient distance
    raised to 1/s.  The caller checks lhs <= C * rhs_core over a family
    of perturbations.
    """
    if not exponent_s > 2:
        raise ValueError("exponent_s must exceed 2")
    a, c = base
    a_p, c_p = perturbed
    if box is not None:
        if not (box.contains(a, c) and box.contains(a_p, c_p)):
            raise ValueError("coefficient pair violates the parameter box")
    u, _ = forward_solve(mesh, a, c, g, settings, box=box)
    u_p, _ = forward_solve(mesh, a_p, c_p, g, settings, box=box)
    lhs = fem.h1_norm(mesh, u - u_p)
    dist = fem.l1_norm(mesh, np.asarray(a) - np.asarray(a_p)) \
        + fem.l1_norm(mesh, np.asarray(c) - np.asarray(c_p))
    return lhs, dist ** (1.0 / exponent_s)


def lemma_interpolation_check(mesh, field, bound_M, s):
    """Ls vs L1 interpolation inequality for a bounded field.

    Returns (lhs, rhs) = (||field||_Ls, M^((s-1)/s) ||field||_L1^(1/s));
    the inequality lhs <= rhs holds with equality for indicator fields.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    field = np.asarray(field, dtype=float)
    if np.any(np.abs(field) > bound_M * (1 + 1e-12)):
        raise ValueError("field exceeds the stated bound M")
    lhs = fem.ls_norm(mesh, field, s)
    rhs = bound_M ** ((s - 1.0) / s) * fem.l1_norm(mesh, field) ** (1.0 / s)
    return lhs, rhs
