"""Homogenized permeability tensors from cell solutions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import gradient_and_value_at_quadrature, prolong


@dataclass
class EffectiveTensors:
    x: tuple
    k1_star: np.ndarray
    k2_star: np.ndarray
    c11_avg: float
    c22_avg: float
    q_avg: float = 1.0

    @property
    def total(self):
        return self.k1_star + self.k2_star


def effective_tensor(space, model, x, vectors, solution_space=None, q_avg=1.0):
    """kappa*_k[i, j] = int_Y kappa_k (delta_ij + d N_k^j / d y_i) dy.

    ``vectors`` has one row (N1^j, N2^j) per direction ``j`` living on
    ``solution_space`` (defaults to ``space``); quadrature runs on ``space``,
    which must be at least as fine.
    """
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    d = 2
    if vectors.shape[0] != d:
        raise ValueError(f"expected {d} directions, got {vectors.shape[0]}")
    solution_space = solution_space or space
    if solution_space.level != space.level:
        vectors = prolong(vectors.reshape(2 * d, -1), solution_space, space).reshape(d, -1)
    y = space.quad_points
    w = space.quad_weights
    k1 = model.evaluate("K1", x, y)
    k2 = model.evaluate("K2", x, y)
    stars = []
    for kappa, block in ((k1, 0), (k2, 1)):
        kstar = np.empty((d, d))
        for j in range(d):
            _, grad = gradient_and_value_at_quadrature(
                space, vectors[j, block * space.dim:(block + 1) * space.dim])
            for i in range(d):
                integrand = kappa * ((i == j) + grad[..., i])
                kstar[i, j] = np.sum(integrand * w[None, :])
        stars.append(kstar)
    c11 = float(np.sum(model.evaluate("C11", x, y) * w[None, :]))
    c22 = float(np.sum(model.evaluate("C22", x, y) * w[None, :]))
    return EffectiveTensors(x=tuple(np.atleast_1d(x).tolist()), k1_star=stars[0],
                            k2_star=stars[1], c11_avg=c11, c22_avg=c22, q_avg=q_avg)


def sym2_eigenvalues(m):
    """Closed-form eigenvalues (ascending) of a symmetric 2x2 matrix."""
    a, b, c = m[0, 0], 0.5 * (m[0, 1] + m[1, 0]), m[1, 1]
    mean = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    return mean - rad, mean + rad


def check_structure(t: EffectiveTensors):
    s = t.total
    asym = float(np.max(np.abs(s - s.T)))
    return {"asymmetry": asym, "min_eig_sum": float(sym2_eigenvalues(s)[0])}
