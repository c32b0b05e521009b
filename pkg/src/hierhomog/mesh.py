"""Nested periodic Q1 finite element spaces on the unit cell."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp

DEFAULT_MAX_DOFS = 4_000_000

# reference square [0, 1]^2, corners ordered (0,0), (1,0), (1,1), (0,1)
_CORNERS = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])


def gauss_rule(order):
    """Tensor Gauss-Legendre rule on [0, 1]^2: points (nq, 2), weights (nq,)."""
    t, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    pts = np.array([(a, b) for b in t for a in t])
    wts = np.array([wa * wb for wb in w for wa in w])
    return pts, wts


def q1_shape(ref_pts):
    """Bilinear shape values (nq, 4) and reference gradients (nq, 4, 2)."""
    s, t = ref_pts[:, 0], ref_pts[:, 1]
    vals = np.stack([(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t], axis=1)
    grads = np.empty((len(ref_pts), 4, 2))
    grads[:, :, 0] = np.stack([-(1 - t), 1 - t, t, -t], axis=1)
    grads[:, :, 1] = np.stack([-(1 - s), -s, s, 1 - s], axis=1)
    return vals, grads


@dataclass(frozen=True)
class PeriodicFESpace:
    """Q1 space on a uniform ``n x n`` periodic grid of the unit cell.

    Node ``(i, j)`` sits at ``(i/n, j/n)`` and carries DOF ``i + n*j``; nodes on
    the faces ``y_k = 1`` are identified with those on ``y_k = 0``.
    """

    base_n: int
    level: int
    quad_order: int = 3

    @property
    def n(self):
        return self.base_n * 2 ** self.level

    @property
    def dim(self):
        return self.n * self.n

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def n_elements(self):
        return self.n * self.n

    @cached_property
    def element_dofs(self):
        """(n_elements, 4) periodic DOF indices; element ``ei + n*ej``."""
        n = self.n
        ei, ej = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
        ei, ej = ei.ravel(), ej.ravel()
        cols = [((ei + ci) % n) + n * ((ej + cj) % n) for ci, cj in _CORNERS]
        return np.stack(cols, axis=1)

    @cached_property
    def element_origins(self):
        n = self.n
        ei, ej = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
        return np.stack([ei.ravel(), ej.ravel()], axis=1) / n

    @cached_property
    def _reference(self):
        ref_pts, ref_w = gauss_rule(self.quad_order)
        vals, grads = q1_shape(ref_pts)
        return ref_pts, ref_w, vals, grads

    @property
    def shape_values(self):
        """(nq, 4) shape values at the quadrature points of one element."""
        return self._reference[2]

    @property
    def shape_gradients(self):
        """(nq, 4, 2) physical shape gradients (identical on every element)."""
        return self._reference[3] / self.h

    @property
    def quad_weights(self):
        """(nq,) physical weights of one element."""
        return self._reference[1] * self.h ** 2

    @cached_property
    def quad_points(self):
        """(n_elements, nq, 2) physical quadrature points."""
        ref_pts = self._reference[0]
        return self.element_origins[:, None, :] + self.h * ref_pts[None, :, :]

    def node_coords(self):
        n = self.n
        i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
        return np.stack([i.ravel(), j.ravel()], axis=1) / n

    def interpolate(self, func):
        """Nodal interpolant of a Y-periodic ``func(y) -> array``."""
        return np.asarray(func(self.node_coords()), dtype=float)

    def evaluate(self, v, points, gradient=False):
        """Values of the FE function ``v`` at arbitrary cell points (m, 2).

        With ``gradient=True`` also returns the (m, 2) gradients; points on an
        element face take the gradient of the element above/right of them.
        """
        v = np.asarray(v, dtype=float)
        pts = np.mod(np.asarray(points, dtype=float), 1.0) * self.n
        cell = np.minimum(np.floor(pts).astype(int), self.n - 1)
        loc = pts - cell
        vals, grads = q1_shape(loc)
        n = self.n
        dofs = np.stack([((cell[:, 0] + ci) % n) + n * ((cell[:, 1] + cj) % n)
                         for ci, cj in _CORNERS], axis=1)
        local = v[dofs]
        out = np.sum(vals * local, axis=1)
        if not gradient:
            return out
        return out, np.einsum("ma,mad->md", local, grads) * n

    @cached_property
    def mass_matrix(self):
        """Unit-weight mass matrix."""
        return assemble_scalar(self, np.ones((self.n_elements, len(self.quad_weights))),
                               kind="mass")

    @cached_property
    def laplace_matrix(self):
        """Unit-coefficient stiffness matrix."""
        return assemble_scalar(self, np.ones((self.n_elements, len(self.quad_weights))),
                               kind="stiffness")

    @cached_property
    def integrals(self):
        """Integral of every basis function over Y (h^2 on a uniform grid)."""
        w = self.quad_weights
        local = (self.shape_values * w[:, None]).sum(axis=0)
        out = np.zeros(self.dim)
        np.add.at(out, self.element_dofs, np.broadcast_to(local, self.element_dofs.shape))
        return out


def assemble_scalar(space, weight, kind):
    """Assemble a weighted stiffness or mass matrix.

    ``weight`` holds the coefficient at every quadrature point, shape
    ``(n_elements, nq)``.
    """
    w = weight * space.quad_weights[None, :]
    if kind == "stiffness":
        g = space.shape_gradients
        local = np.einsum("eq,qad,qbd->eab", w, g, g)
    elif kind == "mass":
        b = space.shape_values
        local = np.einsum("eq,qa,qb->eab", w, b, b)
    else:
        raise ValueError(f"unknown matrix kind {kind!r}")
    dofs = space.element_dofs
    rows = np.repeat(dofs, 4, axis=1).ravel()
    cols = np.tile(dofs, (1, 4)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(space.dim, space.dim))
    return mat.tocsr()


def assemble_load(space, flux=None, source=None):
    """Load vector ``int flux . grad(phi) + source * phi`` over Y.

    ``flux`` has shape (n_elements, nq, 2), ``source`` (n_elements, nq).
    """
    w = space.quad_weights
    local = np.zeros((space.n_elements, 4))
    if flux is not None:
        local += np.einsum("eqd,qad,q->ea", flux, space.shape_gradients, w)
    if source is not None:
        local += np.einsum("eq,qa,q->ea", source, space.shape_values, w)
    out = np.zeros(space.dim)
    np.add.at(out, space.element_dofs, local)
    return out


def build_space(base_n, level, L, quad_order=3, max_dofs=DEFAULT_MAX_DOFS):
    """Level ``level`` of the hierarchy V_0 in ... in V_L with ``base_n * 2**level`` cells per side."""
    if base_n < 2:
        raise ValueError("base_n must be at least 2")
    if not 0 <= level <= L:
        raise ValueError(f"level {level} outside [0, {L}]")
    space = PeriodicFESpace(base_n, level, quad_order)
    if space.dim > max_dofs:
        raise OverflowError(f"space with {space.dim} DOFs exceeds budget {max_dofs}")
    return space


@lru_cache(maxsize=None)
def _prolong_1d(n_coarse):
    rows, cols, vals = [], [], []
    for i in range(2 * n_coarse):
        if i % 2 == 0:
            rows.append(i), cols.append(i // 2), vals.append(1.0)
        else:
            for c in ((i - 1) // 2, ((i + 1) // 2) % n_coarse):
                rows.append(i), cols.append(c), vals.append(0.5)
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * n_coarse, n_coarse))


@lru_cache(maxsize=None)
def prolongation_matrix(base_n, level_from, level_to):
    """Sparse embedding matrix V_{level_from} -> V_{level_to}."""
    if level_from > level_to:
        raise ValueError("prolongation requires level_from <= level_to")
    n = base_n * 2 ** level_from
    P = sp.identity(n * n, format="csr")
    for _ in range(level_to - level_from):
        p1 = _prolong_1d(n)
        P = sp.kron(p1, p1, format="csr") @ P
        n *= 2
    return P


def prolong(v, space_k, space_m):
    """Represent the function ``v`` of ``space_k`` exactly in the finer ``space_m``."""
    if space_k.base_n != space_m.base_n or space_k.level > space_m.level:
        raise ValueError("spaces are not nested")
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != space_k.dim:
        raise ValueError(f"vector length {v.shape[-1]} != dim {space_k.dim}")
    if space_k.level == space_m.level:
        return v.copy()
    P = prolongation_matrix(space_k.base_n, space_k.level, space_m.level)
    return (P @ v.T).T


def local_values_at_quadrature(space, local):
    """Values (ne, nq) and gradients (ne, nq, 2) from per-element corner values (ne, 4)."""
    vals = local @ space.shape_values.T
    grads = np.einsum("ea,qad->eqd", local, space.shape_gradients)
    return vals, grads


def gradient_and_value_at_quadrature(space, v):
    """Values and gradients of the FE function ``v`` at every quadrature point."""
    v = np.asarray(v, dtype=float)
    if v.shape != (space.dim,):
        raise ValueError(f"expected vector of length {space.dim}, got shape {v.shape}")
    return local_values_at_quadrature(space, v[space.element_dofs])


def nodal_grid_values_at_quadrature(space, grid_values):
    """Same as :func:`gradient_and_value_at_quadrature` for values on the
    unidentified ``(n+1) x (n+1)`` node grid, indexed ``[i, j]``.

    Useful for non-periodic functions such as ``y1``.
    """
    g = np.asarray(grid_values, dtype=float)
    n = space.n
    if g.shape != (n + 1, n + 1):
        raise ValueError(f"expected grid of shape {(n + 1, n + 1)}")
    ei, ej = (space.element_origins * n).round().astype(int).T
    local = np.stack([g[ei + ci, ej + cj] for ci, cj in _CORNERS], axis=1)
    return local_values_at_quadrature(space, local)
