"""Nested macro grids T_0 in ... in T_L and their disjoint level sets S_l.

Points are tracked internally as integer offsets on the finest lattice
(spacing ``H / 2**L``) so set operations are exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MacroHierarchy:
    domain: tuple
    macro_dim: int
    H: float
    L: int
    counts: tuple  # finest-lattice cells per axis
    levels: tuple = field(repr=False)  # per level: tuple of integer index tuples, sorted

    @property
    def finest_spacing(self):
        return self.H / 2 ** self.L

    def coords(self, idx):
        return tuple(float(lo + k * self.finest_spacing)
                     for (lo, _), k in zip(self.domain, idx))

    def level_points(self, l):
        """Coordinates of S_l as an array of shape (|S_l|, macro_dim)."""
        return np.array([self.coords(i) for i in self.levels[l]]).reshape(-1, self.macro_dim)

    def points(self):
        """All points of T_L ordered by level, then lexicographically."""
        return [self.coords(i) for lvl in self.levels for i in lvl]

    def level_of_index(self, idx):
        for l in range(self.L + 1):
            step = 2 ** (self.L - l)
            if all(k % step == 0 for k in idx):
                return l
        raise ValueError(f"{idx} is not a lattice index")

    def index_of(self, x, tol=1e-9):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.size != self.macro_dim:
            raise ValueError(f"expected a {self.macro_dim}-D macro point")
        idx = []
        for (lo, _), xk, n in zip(self.domain, x, self.counts):
            t = (xk - lo) / self.finest_spacing
            k = int(round(t))
            if abs(t - k) > tol or not 0 <= k <= n:
                raise ValueError(f"{tuple(x)} is not a node of the finest macro grid")
            idx.append(k)
        return tuple(idx)

    def level_of(self, x):
        return self.level_of_index(self.index_of(x))

    def space_level(self, l):
        """FE level used for points of S_l."""
        return self.L - l

    def embed(self, x):
        out = np.zeros(2)
        out[: self.macro_dim] = np.atleast_1d(x)
        return tuple(out)

    def to_dict(self):
        return {
            "domain": [list(b) for b in self.domain],
            "macro_dim": self.macro_dim,
            "H": self.H,
            "L": self.L,
            "levels": [[list(self.coords(i)) for i in lvl] for lvl in self.levels],
        }


def build_hierarchy(domain=((0.0, 1.0),), macro_dim=1, H=0.5, L=3):
    domain = tuple((float(lo), float(hi)) for lo, hi in domain)
    if len(domain) != macro_dim:
        raise ValueError("domain must have one interval per macro dimension")
    if L < 0:
        raise ValueError("L must be non-negative")
    if H <= 0:
        raise ValueError("H must be positive")
    counts = []
    for lo, hi in domain:
        ratio = (hi - lo) / H
        if hi <= lo or abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError(f"H={H} does not divide the interval [{lo}, {hi}]")
        counts.append(int(round(ratio)) * 2 ** L)

    by_level = [[] for _ in range(L + 1)]
    for idx in itertools.product(*(range(n + 1) for n in counts)):
        for l in range(L + 1):
            step = 2 ** (L - l)
            if all(k % step == 0 for k in idx):
                by_level[l].append(idx)
                break
    levels = tuple(tuple(sorted(lvl)) for lvl in by_level)
    return MacroHierarchy(domain=domain, macro_dim=macro_dim, H=float(H), L=L,
                          counts=tuple(counts), levels=levels)


TIE_BREAKS = ("coarsest", "lexicographic")


def _enclosing_corners(h, idx, l):
    """Corners of the T_{l-1} cell containing ``idx`` with multilinear weights.

    Every point of the lower levels lies on T_{l-1}, and the nearest one is
    always such a corner.
    """
    step = 2 ** (h.L - l + 1)
    per_axis = []
    for k in idx:
        lo = (k // step) * step
        t = (k - lo) / step
        per_axis.append([(lo, 1.0 - t)] if t == 0 else [(lo, 1.0 - t), (lo + step, t)])
    corners = []
    for combo in itertools.product(*per_axis):
        corners.append((tuple(c[0] for c in combo), float(np.prod([c[1] for c in combo]))))
    return corners


def select_parents(h, x, l, n_points=1, tie_break="coarsest"):
    """Parents and weights used to interpolate a solution at ``x`` in S_l.

    ``n_points=1`` returns the nearest point of the lower levels. Equidistant
    candidates are resolved by ``tie_break``: ``"coarsest"`` prefers the one
    from the lowest level (fewest stacked corrections), then the
    lexicographically smallest; ``"lexicographic"`` looks at coordinates only.

    ``n_points=2**macro_dim`` returns the corners of the enclosing T_{l-1}
    cell with multilinear weights, dropping corners of zero weight.
    """
    idx = h.index_of(x)
    if l < 1 or h.level_of_index(idx) != l:
        raise ValueError(f"{tuple(np.atleast_1d(x))} is not a point of S_{l}")
    corners = _enclosing_corners(h, idx, l)
    if n_points == 1:
        if tie_break not in TIE_BREAKS:
            raise ValueError(f"tie_break must be one of {TIE_BREAKS}")

        def key(j):
            dist = sum((a - b) ** 2 for a, b in zip(idx, j))
            if tie_break == "coarsest":
                return dist, h.level_of_index(j), j
            return dist, j

        best = min((c for c, _ in corners), key=key)
        return [(h.coords(best), 1.0)]
    if n_points != 2 ** h.macro_dim:
        raise ValueError(f"n_points must be 1 or {2 ** h.macro_dim}")
    return sorted((h.coords(c), w) for c, w in corners if w > 0.0)


def parent_distance_ratio(h, x, parents):
    """Max-norm distance to the farthest parent divided by H 2^{-l}."""
    l = h.level_of(x)
    x = np.atleast_1d(x)
    d = max(float(np.max(np.abs(x - np.atleast_1d(p)))) for p, _ in parents)
    return d / (h.H * 2.0 ** -l)
