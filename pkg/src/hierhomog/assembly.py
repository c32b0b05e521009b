"""Assembly of the coupled two-continuum cell operator and its right-hand sides."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .mesh import (PeriodicFESpace, assemble_load, assemble_scalar,
                   gradient_and_value_at_quadrature, prolong, prolongation_matrix)


class CoefficientError(ValueError):
    """A coefficient is not strictly positive at some quadrature point."""


class ParentTerm(NamedTuple):
    """A previously computed cell solution used to correct a nearby point.

    ``vector`` stacks (N1, N2) for one direction, length ``2 * space.dim``.
    """

    x: tuple
    weight: float
    vector: np.ndarray
    space: PeriodicFESpace


@dataclass
class CoupledSystem:
    """Blocks of B(x; ., .) on one space plus the mean-zero constraint.

    The full operator is ``K = [[A1 + MQ, -MQ], [-MQ, A2 + MQ]]``; the
    constraint row ``g`` integrates ``u1 + u2`` over the cell.
    """

    space: PeriodicFESpace
    x: tuple
    A1: sp.csr_matrix
    A2: sp.csr_matrix
    MQ: sp.csr_matrix

    @property
    def K(self):
        return sp.bmat([[self.A1 + self.MQ, -self.MQ],
                        [-self.MQ, self.A2 + self.MQ]], format="csr")

    @property
    def g(self):
        m = self.space.integrals
        return np.concatenate([m, m])

    def bordered(self):
        """Symmetric saddle matrix ``[[K, g], [g^T, 0]]`` in CSC format."""
        g = sp.csr_matrix(self.g[:, None])
        return sp.bmat([[self.K, g], [g.T, None]], format="csc")


def _coefficients_at_quadrature(space, model, x, names, check=True):
    y = space.quad_points
    out = [model.evaluate(name, x, y) for name in names]
    if check:
        for name, val in zip(names, out):
            if np.any(val <= 0):
                raise CoefficientError(f"{name} is not positive at x={tuple(np.atleast_1d(x))}")
    return out


def assemble_system(space, model, x):
    k1, k2, q = _coefficients_at_quadrature(space, model, x, ("K1", "K2", "Q"))
    return CoupledSystem(
        space=space, x=tuple(np.atleast_1d(x)),
        A1=assemble_scalar(space, k1, "stiffness"),
        A2=assemble_scalar(space, k2, "stiffness"),
        MQ=assemble_scalar(space, q, "mass"),
    )


def _unit_flux(space, coef, i):
    flux = np.zeros(coef.shape + (2,))
    flux[..., i] = coef
    return flux


def assemble_rhs_full(space, model, x, i):
    """Right-hand side ``-int kappa_k e^i . grad(phi_k)`` for both continua."""
    if i not in (0, 1):
        raise ValueError(f"direction {i} out of range")
    k1, k2 = _coefficients_at_quadrature(space, model, x, ("K1", "K2"))
    b1 = -assemble_load(space, flux=_unit_flux(space, k1, i))
    b2 = -assemble_load(space, flux=_unit_flux(space, k2, i))
    return np.concatenate([b1, b2])


def assemble_rhs_correction(space, model, x, parents: Sequence[ParentTerm], i,
                            weight_tol=1e-12, quadrature="finest"):
    """Right-hand side of the correction problem at ``x`` tested against ``space``.

    Integrals run on the quadrature of the finest space involved (parents are
    never coarser than ``space``); the result is restricted to ``space`` through
    the transpose of the exact embedding.
    """
    if not parents:
        raise ValueError("at least one parent solution is required")
    total = sum(p.weight for p in parents)
    if abs(total - 1.0) > weight_tol:
        raise ValueError(f"parent weights sum to {total}, not 1")
    for p in parents:
        if p.vector is None:
            raise ValueError(f"missing solution for parent {p.x}")
        if p.space.base_n != space.base_n or p.space.level < space.level:
            raise ValueError("parent solutions must live on a space at least as fine as the target")

    if quadrature == "target":
        return _rhs_correction_on_target(space, model, x, parents, i)
    if quadrature != "finest":
        raise ValueError(f"unknown quadrature mode {quadrature!r}")
    fine = max((p.space for p in parents), key=lambda s: s.level)
    fine = PeriodicFESpace(fine.base_n, fine.level, space.quad_order)
    k1, k2, q = _coefficients_at_quadrature(fine, model, x, ("K1", "K2", "Q"), check=False)

    flux1 = np.zeros(k1.shape + (2,))
    flux2 = np.zeros_like(flux1)
    source = np.zeros_like(k1)
    for p in parents:
        v = prolong(np.asarray(p.vector).reshape(2, -1), p.space, fine)
        n1, g1 = gradient_and_value_at_quadrature(fine, v[0])
        n2, g2 = gradient_and_value_at_quadrature(fine, v[1])
        pk1, pk2, pq = _coefficients_at_quadrature(fine, model, p.x, ("K1", "K2", "Q"),
                                                   check=False)
        g1 = g1.copy()
        g2 = g2.copy()
        g1[..., i] += 1.0
        g2[..., i] += 1.0
        flux1 -= p.weight * (k1 - pk1)[..., None] * g1
        flux2 -= p.weight * (k2 - pk2)[..., None] * g2
        source += p.weight * (pq - q) * (n1 - n2)

    b1 = assemble_load(fine, flux=flux1, source=source)
    b2 = assemble_load(fine, flux=flux2, source=-source)
    if fine.level == space.level:
        return np.concatenate([b1, b2])
    R = prolongation_matrix(space.base_n, space.level, fine.level).T
    return np.concatenate([R @ b1, R @ b2])


def _rhs_correction_on_target(space, model, x, parents, i):
    # parents sampled pointwise at the target quadrature points
    y = space.quad_points
    flat = y.reshape(-1, 2)
    k1, k2, q = _coefficients_at_quadrature(space, model, x, ("K1", "K2", "Q"), check=False)
    flux1 = np.zeros(k1.shape + (2,))
    flux2 = np.zeros_like(flux1)
    source = np.zeros_like(k1)
    for p in parents:
        v = np.asarray(p.vector).reshape(2, -1)
        n1, g1 = p.space.evaluate(v[0], flat, gradient=True)
        n2, g2 = p.space.evaluate(v[1], flat, gradient=True)
        g1 = g1.reshape(flux1.shape)
        g2 = g2.reshape(flux1.shape)
        g1[..., i] += 1.0
        g2[..., i] += 1.0
        pk1, pk2, pq = _coefficients_at_quadrature(space, model, p.x, ("K1", "K2", "Q"),
                                                   check=False)
        flux1 -= p.weight * (k1 - pk1)[..., None] * g1
        flux2 -= p.weight * (k2 - pk2)[..., None] * g2
        source += p.weight * (pq - q) * (n1 - n2).reshape(k1.shape)
    b1 = assemble_load(space, flux=flux1, source=source)
    b2 = assemble_load(space, flux=flux2, source=-source)
    return np.concatenate([b1, b2])
