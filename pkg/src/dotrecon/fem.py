"""P1 Galerkin assembly and SPD solvers for -div(a grad u) + c u = f.

Coefficients are stored nodally and interpolated P1 inside elements.
Element integrals use the 3-point edge-midpoint rule (exact for
quadratics); Neumann loads use edge-wise trapezoid quadrature, matching
the weights of :func:`dotrecon.mesh.boundary_l2_inner` so that discrete
duality identities hold exactly.
"""

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    """Linear solver failed (non-convergence or breakdown)."""


@dataclass
class SolverSettings:
    """Linear solver selection.

    method is "cg" (Jacobi-preconditioned conjugate gradient) or
    "direct" (sparse LU, cached on the system).  max_iter=None means
    10 * n_nodes for CG.
    """

    method: str = "cg"
    rel_tol: float = 1e-10
    max_iter: int | None = None

    def __post_init__(self):
        if self.method not in ("cg", "direct"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


class SpdSystem:
    """Assembled symmetric positive definite system.

    Holds the sparse matrix and lazily caches a Jacobi preconditioner
    and an LU factorization, so repeated solves with different right
    hand sides (the forward/adjoint pairs of one iteration) reuse work.
    """

    def __init__(self, matrix, mesh):
        self.matrix = matrix
        self.mesh = mesh
        self._lu = None
        self._jacobi = None

    @property
    def lu(self):
        if self._lu is None:
            try:
                self._lu = spla.splu(self.matrix.tocsc())
            except RuntimeError as exc:  # singular factorization
                raise SolverError(f"sparse LU factorization failed: {exc}") from exc
        return self._lu

    @property
    def jacobi(self):
        if self._jacobi is None:
            d = self.matrix.diagonal()
            if np.any(d <= 0):
                raise SolverError("non-positive diagonal; system is not SPD")
            self._jacobi = spla.LinearOperator(
                self.matrix.shape, matvec=lambda x, inv=1.0 / d: inv * x)
        return self._jacobi


def _validate_coefficient(mesh, field, name, lo=None, hi=None):
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_nodes,):
        raise ValueError(f"{name} must have one value per node, got shape {field.shape}")
    if not np.all(np.isfinite(field)):
        raise ValueError(f"{name} contains non-finite values")
    if lo is None:
        if np.any(field <= 0):
            raise ValueError(f"{name} must be strictly positive at every node")
    else:
        if np.any(field < lo) or np.any(field > hi):
            raise ValueError(f"{name} violates the admissible box [{lo}, {hi}]")
    return field


def stiffness_matrix(mesh, a):
    """Sparse matrix of integral a grad(psi_i).grad(psi_j) with P1 a."""
    tris = mesh.triangles
    a_mean = np.asarray(a)[tris].mean(axis=1)  # exact integral of P1 a per element
    coeff = a_mean * mesh.tri_areas
    # local(j,k) = coeff * grad_j . grad_k
    local = np.einsum("tjd,tkd->tjk", mesh.grads, mesh.grads) * coeff[:, None, None]
    return _scatter(mesh, local)


def mass_matrix(mesh, c):
    """Sparse matrix of integral c psi_i psi_j, 3-point edge-midpoint rule."""
    tris = mesh.triangles
    cv = np.asarray(c)[tris]  # (nt, 3)
    A = mesh.tri_areas
    local = np.empty((mesh.n_triangles, 3, 3))
    for j in range(3):
        for k in range(3):
            if j == k:
                k1, k2 = (j + 1) % 3, (j + 2) % 3
                local[:, j, j] = (A / 24.0) * (2.0 * cv[:, j] + cv[:, k1] + cv[:, k2])
            else:
                local[:, j, k] = (A / 24.0) * (cv[:, j] + cv[:, k])
    return _scatter(mesh, local)


def _scatter(mesh, local):
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)),
                        shape=(mesh.n_nodes, mesh.n_nodes))
    return mat.tocsr()


def assemble_system(mesh, a, c, box=None):
    """Assemble K(a) + M(c) as an :class:`SpdSystem`.

    Rejects non-finite or non-positive coefficient fields; when a
    (a_lo, a_hi, c_lo, c_hi) box is given, enforces it nodally.
    """
    if box is None:
        a = _validate_coefficient(mesh, a, "a")
        c = _validate_coefficient(mesh, c, "c")
    else:
        a_lo, a_hi, c_lo, c_hi = box
        a = _validate_coefficient(mesh, a, "a", a_lo, a_hi)
        c = _validate_coefficient(mesh, c, "c", c_lo, c_hi)
    return SpdSystem(stiffness_matrix(mesh, a) + mass_matrix(mesh, c), mesh)


def assemble_neumann_load(mesh, g):
    """Load vector of the boundary flux g (edge trapezoid rule).

    g holds values at the boundary nodes in boundary ordering; the
    result has one entry per mesh node and vanishes at interior nodes.
    """
    g = np.asarray(g, dtype=float)
    nb = len(mesh.boundary_nodes)
    if g.shape != (nb,):
        raise ValueError(f"boundary data must have shape ({nb},), got {g.shape}")
    b = np.zeros(mesh.n_nodes)
    b[mesh.boundary_nodes] = mesh.boundary_weights * g
    return b


def assemble_source_load(mesh, f):
    """Load vector of a volumetric P1 source f (one value per node)."""
    f = np.asarray(f, dtype=float)
    if f.shape != (mesh.n_nodes,):
        raise ValueError(f"source must have one value per node, got shape {f.shape}")
    return unit_mass(mesh) @ f


def solve_spd(system, rhs, settings=None):
    """Solve system.matrix @ u = rhs.

    CG stops at relative residual settings.rel_tol and raises
    :class:`SolverError` on non-convergence (reporting the achieved
    residual); the direct method reuses the cached LU factorization.
    """
    if settings is None:
        settings = SolverSettings()
    rhs = np.asarray(rhs, dtype=float)
    if not np.all(np.isfinite(rhs)):
        raise ValueError("right-hand side contains non-finite values")
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros_like(rhs)

    if settings.method == "direct":
        u = system.lu.solve(rhs)
        if not np.all(np.isfinite(u)):
            raise SolverError("direct solve produced non-finite values")
        return u

    maxiter = settings.max_iter or 10 * system.matrix.shape[0]
    u, info = spla.cg(system.matrix, rhs, rtol=settings.rel_tol, atol=0.0,
                      maxiter=maxiter, M=system.jacobi)
    res = np.linalg.norm(system.matrix @ u - rhs) / bnorm
    if info != 0 or res > settings.rel_tol * 10.0:
        raise SolverError(
            f"CG did not converge within {maxiter} iterations "
            f"(achieved relative residual {res:.3e}, target {settings.rel_tol:.1e})")
    return u


def trace(mesh, u):
    """Boundary values of a nodal field, in boundary traversal order."""
    return np.asarray(u)[mesh.boundary_nodes]


# Unit-coefficient matrices are mesh geometry; cache them per mesh so the
# iteration driver and the norm helpers never reassemble them.
_unit_cache = weakref.WeakKeyDictionary()


def _unit(mesh):
    entry = _unit_cache.get(mesh)
    if entry is None:
        ones = np.ones(mesh.n_nodes)
        entry = (stiffness_matrix(mesh, ones), mass_matrix(mesh, ones))
        _unit_cache[mesh] = entry
    return entry


def unit_stiffness(mesh):
    return _unit(mesh)[0]


def unit_mass(mesh):
    return _unit(mesh)[1]


def l1_norm(mesh, f):
    """Discrete L1(Omega) norm via lumped mass weights."""
    return float(np.sum(mesh.lumped * np.abs(f)))


def l2_norm(mesh, f):
    """Discrete L2(Omega) norm via the consistent P1 mass matrix."""
    f = np.asarray(f, dtype=float)
    return float(np.sqrt(max(f @ (unit_mass(mesh) @ f), 0.0)))


def h1_norm(mesh, f):
    """Discrete H1(Omega) norm (unit-coefficient stiffness + mass)."""
    f = np.asarray(f, dtype=float)
    val = f @ (unit_stiffness(mesh) @ f) + f @ (unit_mass(mesh) @ f)
    return float(np.sqrt(max(val, 0.0)))


def h1_seminorm(mesh, f):
    """Discrete H1 seminorm (unit-coefficient stiffness energy)."""
    f = np.asarray(f, dtype=float)
    return float(np.sqrt(max(f @ (unit_stiffness(mesh) @ f), 0.0)))


def ls_norm(mesh, f, s):
    """Discrete Ls(Omega) norm via lumped weights, s >= 1."""
    return float(np.sum(mesh.lumped * np.abs(f) ** s) ** (1.0 / s))
