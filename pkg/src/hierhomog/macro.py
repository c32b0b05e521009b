"""Implicit Euler solver for the homogenized macroscale equation.

    (<C11> + <C22>) du/dt = div((kappa1* + kappa2*) grad u) + 2 q   in Omega,
    u = 0 on the boundary,
    u(0) = (<C11> g1 + <C22> g2) / (<C11> + <C22>).

Effective quantities come from a network of macro points and are interpolated
piecewise linearly (1-D network along x1) or bilinearly (2-D tensor network).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RegularGridInterpolator

from .effective import sym2_eigenvalues
from .mesh import gauss_rule, q1_shape

log = logging.getLogger(__name__)


@dataclass
class EffectiveNetwork:
    """Effective data sampled at macro points.

    ``points`` is (n, 1) or (n, 2); ``conductivity`` is (n, 2, 2) holding
    kappa1* + kappa2*; ``c11``/``c22`` are (n,) cell-averaged porosities.
    """

    points: np.ndarray
    conductivity: np.ndarray
    c11: np.ndarray
    c22: np.ndarray

    @classmethod
    def from_tensors(cls, tensors):
        """Build from a mapping point -> EffectiveTensors."""
        pts = sorted(tensors)
        return cls(points=np.array(pts, dtype=float).reshape(len(pts), -1),
                   conductivity=np.array([tensors[p].total for p in pts]),
                   c11=np.array([tensors[p].c11_avg for p in pts]),
                   c22=np.array([tensors[p].c22_avg for p in pts]))

    @classmethod
    def constant(cls, conductivity, c11=1.0, c22=1.0):
        pts = np.array([[0.0], [1.0]])
        cond = np.array([conductivity, conductivity], dtype=float)
        return cls(points=pts, conductivity=cond, c11=np.full(2, c11), c22=np.full(2, c22))

    def _values(self):
        return np.concatenate([self.conductivity.reshape(len(self.points), 4),
                               self.c11[:, None], self.c22[:, None]], axis=1)

    def interpolate(self, x):
        """Interpolate at macro points ``x`` (m, 2): conductivity (m, 2, 2), c11, c22."""
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        out = interpolate_network(self.points, self._values(), x[:, : self.points.shape[1]])
        return out[:, :4].reshape(-1, 2, 2), out[:, 4], out[:, 5]


def interpolate_network(points, values, x):
    """Piecewise (bi)linear interpolation of ``values`` (n, k) given at ``points``.

    ``points`` is (n, 1) or a full tensor grid (n, 2); ``x`` is (m, dim).
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    x = np.asarray(x, dtype=float).reshape(-1, points.shape[1])
    if points.shape[1] == 1:
        order = np.argsort(points[:, 0])
        xs = points[order, 0]
        return np.stack([np.interp(x[:, 0], xs, values[order, k])
                         for k in range(values.shape[1])], axis=1)
    axes = [np.unique(points[:, k]) for k in range(2)]
    if len(axes[0]) * len(axes[1]) != len(points):
        raise ValueError("a 2-D network must be a full tensor grid")
    grid = np.empty((len(axes[0]), len(axes[1]), values.shape[1]))
    grid[np.searchsorted(axes[0], points[:, 0]), np.searchsorted(axes[1], points[:, 1])] = values
    return RegularGridInterpolator(axes, grid)(x)


def initial_condition(g1, g2, c11, c22):
    """Capacity-weighted average of the two initial states."""
    c11 = np.asarray(c11, dtype=float)
    c22 = np.asarray(c22, dtype=float)
    denom = c11 + c22
    if np.any(denom <= 0):
        raise ValueError("capacities must be positive")
    return (c11 * np.asarray(g1, dtype=float) + c22 * np.asarray(g2, dtype=float)) / denom


@dataclass
class MacroProblem:
    n: int
    M: sp.csr_matrix  # capacity-weighted mass, interior DOFs
    K: sp.csr_matrix  # conductivity stiffness, interior DOFs
    F: np.ndarray  # load 2 q, interior DOFs
    interior: np.ndarray
    nodes: np.ndarray  # (n+1)^2 x 2 node coordinates
    u0: np.ndarray  # full nodal initial field
    dt: float
    T_end: float
    _lu: object = field(default=None, repr=False)

    def restrict(self, u):
        return np.asarray(u)[self.interior]

    def extend(self, ui):
        u = np.zeros(len(self.nodes))
        u[self.interior] = ui
        return u

    def energy(self, u):
        ui = self.restrict(u)
        return 0.5 * float(ui @ (self.M @ ui))


def _macro_grid(n):
    t = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(t, t, indexing="xy")
    nodes = np.stack([xx.ravel(), yy.ravel()], axis=1)
    ei, ej = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    ei, ej = ei.ravel(), ej.ravel()
    corners = ((0, 0), (1, 0), (1, 1), (0, 1))
    conn = np.stack([(ei + a) + (n + 1) * (ej + b) for a, b in corners], axis=1)
    origins = np.stack([ei, ej], axis=1) / n
    return nodes, conn, origins


def _scatter(conn, local, size):
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(size, size)).tocsr()


def _field(spec, nodes):
    if callable(spec):
        return np.asarray(spec(nodes), dtype=float)
    return np.full(len(nodes), float(spec))


def build_macro_problem(network, n=32, dt=1e-3, T_end=0.0, q=0.0, g1=0.0, g2=0.0,
                        quad_order=2):
    """Assemble the homogenized problem on a uniform ``n x n`` grid of [0, 1]^2.

    ``q``, ``g1`` and ``g2`` are constants or callables of the (m, 2) node array;
    ``q`` is a function of x only, so its cell average is itself.
    """
    nodes, conn, origins = _macro_grid(n)
    h = 1.0 / n
    ref, w = gauss_rule(quad_order)
    vals, grads = q1_shape(ref)
    grads = grads / h
    w = w * h * h
    xq = (origins[:, None, :] + h * ref[None, :, :]).reshape(-1, 2)
    cond, c11, c22 = network.interpolate(xq)
    ne, nq = len(conn), len(w)
    cond = cond.reshape(ne, nq, 2, 2)
    cap = (c11 + c22).reshape(ne, nq)
    if np.any(cap <= 0):
        raise ValueError("capacity must be positive")
    sym = 0.5 * (cond + np.swapaxes(cond, -1, -2))
    min_eig = sym2_eigenvalues(sym.reshape(-1, 2, 2).transpose(1, 2, 0))[0]
    if np.any(min_eig <= 0):
        raise ValueError("conductivity is not positive definite")

    k_local = np.einsum("eqij,qai,qbj,q->eab", cond, grads, grads, w)
    m_local = np.einsum("eq,qa,qb,q->eab", cap, vals, vals, w)
    size = len(nodes)
    K = _scatter(conn, k_local, size)
    M = _scatter(conn, m_local, size)
    qv = _field(q, xq).reshape(ne, nq)
    f_local = np.einsum("eq,qa,q->ea", 2.0 * qv, vals, w)
    F = np.zeros(size)
    np.add.at(F, conn, f_local)

    on_boundary = np.any((nodes < 1e-12) | (nodes > 1 - 1e-12), axis=1)
    interior = np.flatnonzero(~on_boundary)
    _, n11, n22 = network.interpolate(nodes)
    u0 = initial_condition(_field(g1, nodes), _field(g2, nodes), n11, n22)
    u0[on_boundary] = 0.0
    return MacroProblem(n=n, M=M[interior][:, interior].tocsr(),
                        K=K[interior][:, interior].tocsr(), F=F[interior],
                        interior=interior, nodes=nodes, u0=u0, dt=dt, T_end=T_end)


def step(problem, u):
    """One implicit Euler step: (M + dt K) u+ = M u + dt F."""
    if problem._lu is None:
        problem._lu = spla.splu((problem.M + problem.dt * problem.K).tocsc())
    ui = problem.restrict(u)
    rhs = problem.M @ ui + problem.dt * problem.F
    return problem.extend(problem._lu.solve(rhs))


def solve_homogenized(problem, snapshot_times=None):
    """March to ``T_end`` and return ``[(t, u), ...]`` at the requested times.

    The initial field is always the first entry; requested times are rounded
    to the nearest step.
    """
    n_steps = int(round(problem.T_end / problem.dt)) if problem.T_end > 0 else 0
    if snapshot_times is None:
        wanted = {n_steps}
    else:
        wanted = {int(round(t / problem.dt)) for t in snapshot_times}
    u = problem.u0.copy()
    out = [(0.0, u.copy())]
    for k in range(1, n_steps + 1):
        u = step(problem, u)
        if k in wanted:
            out.append((k * problem.dt, u.copy()))
    return out


def steady_state(problem):
    """Solution of the stationary problem K u = F."""
    return problem.extend(spla.spsolve(problem.K.tocsc(), problem.F))


def l2_norm(problem, u):
    """Discrete L2 norm with the unit (not capacity-weighted) Q1 mass matrix."""
    n = problem.n
    nodes, conn, _ = _macro_grid(n)
    ref, w = gauss_rule(2)
    vals, _ = q1_shape(ref)
    w = w / n ** 2
    local = np.einsum("qa,qb,q->ab", vals, vals, w)
    M = _scatter(conn, np.broadcast_to(local, (len(conn), 4, 4)).copy(), len(nodes))
    u = np.asarray(u)
    return float(np.sqrt(u @ (M @ u)))
