"""Adjoint solves and assembly of the level-set update equations.

The misfit gradient with respect to each coefficient is the adjoint
product of the forward and adjoint solutions.  Linearizing the weak form
gives, for perturbations (da, dc) of the coefficients,

    <dF g, r>  =  - integral da grad(u).grad(w)  -  integral dc u w,

with w solving the same PDE with the residual r as Neumann flux.  Both
products carry a minus sign; the diffusion one is implemented as
-grad(u).grad(w) accordingly (descent on the misfit requires it, and the
finite-difference acceptance check enforces it).
"""

import weakref
from dataclasses import dataclass

import numpy as np

from . import fem
from .levelset import curvature_term, heaviside_eps_prime


@dataclass
class GradientTerms:
    """Right-hand sides of the level-set update equations.

    data_part_* are the pure misfit contributions (before the curvature
    penalty), kept separately so the adjoint consistency of the data
    term can be tested on its own.
    """

    L_a: np.ndarray
    L_c: np.ndarray
    data_part_a: np.ndarray
    data_part_c: np.ndarray


def adjoint_solve(mesh, a, c, r_m, settings=None, system=None):
    """Solve the adjoint problem: same PDE with Neumann flux r_m.

    Passing the system assembled for the forward solves reuses its
    factorization/preconditioner.
    """
    if system is None:
        system = fem.assemble_system(mesh, a, c)
    b = fem.assemble_neumann_load(mesh, r_m)
    return fem.solve_spd(system, b, settings)


def shape_derivative_fields(mesh, u_m, w_m):
    """Adjoint products of one experiment as nodal fields.

    Returns (da, dc) with da the area-weighted nodal recovery of
    -grad(u).grad(w) (element-constant) and dc = -u*w nodally.
    """
    u_m = np.asarray(u_m, dtype=float)
    w_m = np.asarray(w_m, dtype=float)
    gu = np.einsum("tjd,tj->td", mesh.grads, u_m[mesh.triangles])
    gw = np.einsum("tjd,tj->td", mesh.grads, w_m[mesh.triangles])
    prod = -(gu[:, 0] * gw[:, 0] + gu[:, 1] * gw[:, 1])
    contrib = (mesh.tri_areas / 3.0) * prod
    da = np.zeros(mesh.n_nodes)
    np.add.at(da, mesh.triangles.ravel(), np.repeat(contrib, 3))
    da /= mesh.lumped
    dc = -(u_m * w_m)
    return da, dc


def assemble_L(mesh, ls, sum_da, sum_dc, alpha, beta_a=0.0, beta_c=0.0, eta=1e-8):
    """Assemble the update right-hand sides for both level sets.

    sum_da and sum_dc are the adjoint-product fields summed over all
    experiments.  The curvature penalty enters with weight alpha*beta
    and is skipped entirely when beta vanishes.
    """
    lv = ls.levels
    data_a = (lv.a1 - lv.a2) * heaviside_eps_prime(ls.phi_a, ls.eps) * sum_da
    data_c = (lv.c1 - lv.c2) * heaviside_eps_prime(ls.phi_c, ls.eps) * sum_dc
    L_a = data_a
    L_c = data_c
    if beta_a:
        L_a = data_a - alpha * beta_a * curvature_term(mesh, ls.phi_a, ls.eps, eta)
    if beta_c:
        L_c = data_c - alpha * beta_c * curvature_term(mesh, ls.phi_c, ls.eps, eta)
    return GradientTerms(L_a=L_a, L_c=L_c, data_part_a=data_a, data_part_c=data_c)


# The update operator (Laplacian - I) with zero Neumann flux is fixed per
# mesh; cache its assembled system (and thus its factorization).
_smoothing_cache = weakref.WeakKeyDictionary()


def smoothing_system(mesh):
    sys_ = _smoothing_cache.get(mesh)
    if sys_ is None:
        sys_ = fem.SpdSystem(fem.unit_stiffness(mesh) + fem.unit_mass(mesh), mesh)
        _smoothing_cache[mesh] = sys_
    return sys_


def update_solve(mesh, L, settings=None):
    """Level-set increment: solve (Laplacian - I) dphi = L, zero flux.

    Weakly this is the SPD system (K + M) dphi = -load(L), so a constant
    L = kappa yields dphi = -kappa.
    """
    L = np.asarray(L, dtype=float)
    if not np.all(np.isfinite(L)):
        raise ValueError("update right-hand side contains non-finite values")
    rhs = -fem.assemble_source_load(mesh, L)
    return fem.solve_spd(smoothing_system(mesh), rhs, settings)


def apply_update(phi, dphi, alpha):
    """Level-set step phi + dphi/alpha."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return np.asarray(phi, dtype=float) + np.asarray(dphi, dtype=float) / alpha
