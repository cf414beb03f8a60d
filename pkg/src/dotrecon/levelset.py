"""Level-set representation of two-valued coefficient pairs.

A level-set function phi marks the region {phi >= 0} as carrying the
first contrast value.  The smoothed Heaviside ramps linearly on
[-eps, 0], so only nodes inside that band feel gradient updates.
"""

from dataclasses import dataclass

import numpy as np

from . import fem


@dataclass
class ContrastLevels:
    """The two admissible values of each coefficient."""

    a1: float
    a2: float
    c1: float
    c2: float

    def __post_init__(self):
        for name in ("a1", "a2", "c1", "c2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"level {name} must be positive")
        if self.a1 == self.a2 or self.c1 == self.c2:
            raise ValueError("contrast levels must be distinct per coefficient")


@dataclass
class LevelSetPair:
    """Pair of nodal level-set functions with their levels and smoothing width."""

    phi_a: np.ndarray
    phi_c: np.ndarray
    levels: ContrastLevels
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not (np.all(np.isfinite(self.phi_a)) and np.all(np.isfinite(self.phi_c))):
            raise ValueError("level-set fields must be finite")

    def copy(self):
        return LevelSetPair(self.phi_a.copy(), self.phi_c.copy(),
                            self.levels, self.eps)


def heaviside_eps(t, eps):
    """Smoothed Heaviside: 0 below -eps, 1 + t/eps on [-eps, 0], 1 above 0."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 0.0, 1.0, np.where(t < -eps, 0.0, 1.0 + t / eps))
    return float(out) if out.ndim == 0 else out


def heaviside_eps_prime(t, eps):
    """Derivative of the ramp: 1/eps on the open interval (-eps, 0), else 0."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    t = np.asarray(t, dtype=float)
    out = np.where((t > -eps) & (t < 0.0), 1.0 / eps, 0.0)
    return float(out) if out.ndim == 0 else out


def _sharp(t):
    # region 1 is {phi >= 0}, so the sharp step takes the value 1 at t = 0
    t = np.asarray(t, dtype=float)
    return np.where(t >= 0.0, 1.0, 0.0)


def project_sharp(ls):
    """Two-valued coefficient pair (a, c) from the sign of the level sets."""
    ha = _sharp(ls.phi_a)
    hc = _sharp(ls.phi_c)
    lv = ls.levels
    return (lv.a2 + (lv.a1 - lv.a2) * ha,
            lv.c2 + (lv.c1 - lv.c2) * hc)


def project_smooth(ls):
    """Smoothed coefficient pair; values lie in the hull of the levels."""
    ha = heaviside_eps(ls.phi_a, ls.eps)
    hc = heaviside_eps(ls.phi_c, ls.eps)
    lv = ls.levels
    return (lv.a1 * ha + lv.a2 * (1.0 - ha),
            lv.c1 * hc + lv.c2 * (1.0 - hc))


def classify(ls):
    """Two-valued reconstruction from a smoothed iterate.

    Thresholds the ramp at its half level (phi >= -eps/2).  The ramp is
    one-sided, so the data constrain its midpoint rather than the zero
    contour; thresholding at zero would systematically misattribute the
    half-band ring along a converged interface.
    """
    ha = heaviside_eps(ls.phi_a, ls.eps) >= 0.5
    hc = heaviside_eps(ls.phi_c, ls.eps) >= 0.5
    lv = ls.levels
    return (np.where(ha, lv.a1, lv.a2), np.where(hc, lv.c1, lv.c2))


def _heaviside_gradients(mesh, phi, eps):
    """Element-wise gradient of the P1 interpolant of H_eps(phi)."""
    hval = heaviside_eps(np.asarray(phi, dtype=float), eps)
    return np.einsum("tjd,tj->td", mesh.grads, hval[mesh.triangles])


def curvature_term(mesh, phi, eps, eta=1e-8):
    """Nodal curvature term H'_eps(phi) * div(grad H / |grad H|).

    The divergence is computed variationally (integration by parts with
    zero boundary flux, lumped-mass inversion); eta floors the gradient
    norm where grad H vanishes.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    grad_h = _heaviside_gradients(mesh, phi, eps)
    norm = np.sqrt(grad_h[:, 0] ** 2 + grad_h[:, 1] ** 2 + eta ** 2)
    v = grad_h / norm[:, None]
    # weak divergence: integral div(v) psi_i = -integral v . grad(psi_i)
    contrib = -np.einsum("tjd,td->tj", mesh.grads, v) * mesh.tri_areas[:, None]
    rhs = np.zeros(mesh.n_nodes)
    np.add.at(rhs, mesh.triangles.ravel(), contrib.ravel())
    div = rhs / mesh.lumped
    return heaviside_eps_prime(np.asarray(phi, dtype=float), eps) * div


def perimeter_estimate(mesh, phi, eps):
    """Total variation of H_eps(phi): integral of |grad H_eps(phi)|."""
    grad_h = _heaviside_gradients(mesh, phi, eps)
    return float(np.sum(mesh.tri_areas * np.hypot(grad_h[:, 0], grad_h[:, 1])))


def init_paraboloid(mesh, center, radius):
    """Paraboloid level set radius^2 - |x - center|^2, positive on the disk."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    d = mesh.nodes - np.asarray(center, dtype=float)
    return radius ** 2 - (d[:, 0] ** 2 + d[:, 1] ** 2)


def levelset_from_mask(mask):
    """A +/-1 level set whose sharp projection marks `mask` as region 1.

    All values sit outside the smoothing band for any eps < 1, so the
    smooth and sharp projections agree exactly; used to encode exactly
    known coefficients.
    """
    mask = np.asarray(mask)
    return np.where(mask, 1.0, -1.0)


def init_shallow_background(mesh, eps, depth=0.9):
    """Near-background level set kept inside the smoothing band.

    phi = -depth*eps everywhere, so the projected coefficient is close
    to the second level value while every node still feels gradient
    updates; a coefficient "frozen at the background" with phi <= -eps
    could never start moving once unfrozen.
    """
    if not 0.0 < depth < 1.0:
        raise ValueError("depth must lie in (0, 1)")
    return np.full(mesh.n_nodes, -depth * eps)


def perimeter_weighted(mesh, ls, beta_a, beta_c):
    """beta-weighted total variation of both level sets (the BV part of R_eps)."""
    val = 0.0
    if beta_a:
        val += beta_a * perimeter_estimate(mesh, ls.phi_a, ls.eps)
    if beta_c:
        val += beta_c * perimeter_estimate(mesh, ls.phi_c, ls.eps)
    return val


def h1_distance_sq(mesh, phi, phi0):
    """Squared H1 distance between two level-set functions."""
    return fem.h1_norm(mesh, np.asarray(phi) - np.asarray(phi0)) ** 2
