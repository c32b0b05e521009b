"""Solution of the constrained coupled cell problems and the quotient-space norm."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import assemble_rhs_full, assemble_system
from .mesh import PeriodicFESpace, gradient_and_value_at_quadrature, prolong

DIRECT_MAX_DIM = 100_000


class SolverError(RuntimeError):
    pass


@dataclass
class CellSolution:
    """Cell solution at one macro point, one row per direction.

    ``vectors[i]`` stacks (N1^i, N2^i) on ``space``. For corrected points the
    rows hold only the correction; the full function is the correction plus
    the weighted parents listed in ``parents``.
    """

    x: tuple
    space: PeriodicFESpace
    vectors: np.ndarray
    provenance: str = "anchor"
    parents: tuple = ()
    residual_norm: float = 0.0
    means: np.ndarray = field(default=None)

    @property
    def level_solved(self):
        return self.space.level

    def pair(self, i):
        return self.vectors[i]


class ConstrainedSolver:
    """Factor the bordered system once and solve for several right-hand sides.

    Solutions satisfy ``int (u1 + u2) = 0``. Above ``direct_max`` unknowns the
    solver switches to Jacobi-preconditioned CG on the singular operator and
    fixes the free constant afterwards.
    """

    def __init__(self, system, tol=1e-10, direct_max=DIRECT_MAX_DIM, maxiter=20_000):
        self.system = system
        self.tol = tol
        self.maxiter = maxiter
        self.K = system.K
        self.g = system.g
        self._knorm = None
        self.method = "direct" if self.K.shape[0] <= direct_max else "cg"
        if self.method == "direct":
            try:
                self._lu = spla.splu(system.bordered())
            except RuntimeError as exc:
                raise SolverError(f"bordered system is singular: {exc}") from None
        else:
            d = self.K.diagonal()
            self._precond = sp.diags(1.0 / d)

    @property
    def knorm(self):
        if self._knorm is None:
            self._knorm = float(abs(self.K).sum(axis=1).max())
        return self._knorm

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        # K is singular with kernel span{(1, 1)}: rhs must be orthogonal to it
        kernel_part = abs(rhs.sum()) / np.sqrt(rhs.size)
        if kernel_part > self.tol * self.knorm:
            raise SolverError(f"right-hand side is not orthogonal to constants "
                              f"(component {kernel_part:.3e})")
        if self.method == "direct":
            u = self._lu.solve(np.append(rhs, 0.0))[:-1]
        else:
            u, info = spla.cg(self.K, rhs - rhs.mean(), rtol=self.tol * 1e-2, atol=0.0,
                              maxiter=self.maxiter, M=self._precond)
            if info != 0:
                raise SolverError(f"CG did not converge within {self.maxiter} iterations")
            u -= (self.g @ u) / self.g.sum()
        res = self.relative_residual(u, rhs)
        if res > self.tol:
            raise SolverError(f"relative residual {res:.3e} exceeds tolerance {self.tol:.1e}")
        return u

    def relative_residual(self, u, rhs):
        """Normwise backward error ``|K u - b| / (|K| |u| + |b|)`` on the range of K.

        The kernel component of ``b`` is dropped first, so right-hand sides
        that vanish up to round-off (transverse laminate directions) are
        judged on the same footing as regular ones.
        """
        b = rhs - rhs.mean()
        r = np.linalg.norm(self.K @ u - b)
        denom = self.knorm * np.linalg.norm(u) + np.linalg.norm(b)
        return float(r / denom) if denom > 0 else float(r)


def solve_constrained(system, rhs, tol=1e-10, direct_max=DIRECT_MAX_DIM):
    return ConstrainedSolver(system, tol=tol, direct_max=direct_max).solve(rhs)


def cell_means(space, vectors):
    m = space.integrals
    v = np.atleast_2d(vectors)
    return v[:, : space.dim] @ m + v[:, space.dim:] @ m


def solve_full(space, model, x, tol=1e-10, direct_max=DIRECT_MAX_DIM, d=2):
    """Galerkin solve of the cell problem at ``x`` on ``space`` for every direction."""
    system = assemble_system(space, model, x)
    solver = ConstrainedSolver(system, tol=tol, direct_max=direct_max)
    rows, res = [], 0.0
    for i in range(d):
        rhs = assemble_rhs_full(space, model, x, i)
        u = solver.solve(rhs)
        res = max(res, solver.relative_residual(u, rhs))
        rows.append(u)
    vectors = np.array(rows)
    return CellSolution(x=tuple(np.atleast_1d(x).tolist()), space=space, vectors=vectors,
                        provenance="anchor", residual_norm=res,
                        means=cell_means(space, vectors))


def energy_norm(space_a, pair_a, space_b=None, pair_b=None):
    """|||(phi1, phi2)||| = ||grad phi1|| + ||grad phi2|| + ||phi1 - phi2||.

    With a second pair, returns the norm of the difference computed on the
    finer of the two spaces.
    """
    pair_a = np.asarray(pair_a, dtype=float).reshape(2, -1)
    space = space_a
    diff = pair_a
    if pair_b is not None:
        if space_b is None:
            space_b = space_a
        if space_a.base_n != space_b.base_n:
            raise ValueError("spaces are not nested")
        space = space_a if space_a.level >= space_b.level else space_b
        pair_b = np.asarray(pair_b, dtype=float).reshape(2, -1)
        diff = prolong(pair_a, space_a, space) - prolong(pair_b, space_b, space)
    # quadrature rather than v'Av: no cancellation for (near) constant fields
    w = space.quad_weights[None, :]
    v1, g1 = gradient_and_value_at_quadrature(space, diff[0])
    v2, g2 = gradient_and_value_at_quadrature(space, diff[1])
    return float(np.sqrt(np.sum(np.sum(g1 ** 2, axis=-1) * w))
                 + np.sqrt(np.sum(np.sum(g2 ** 2, axis=-1) * w))
                 + np.sqrt(np.sum((v1 - v2) ** 2 * w)))
