"""Locally periodic coefficient fields on macro domain x unit cell.

Every model evaluates ``K1``, ``K2``, ``Q``, ``C11`` and ``C22`` at a macro
point ``x`` (embedded in 2-D) and an array of cell points ``y`` of shape
``(..., 2)``. Models are immutable and safe to share between threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

FIELDS = ("K1", "K2", "Q", "C11", "C22")
TWO_PI = 2.0 * np.pi


def embed_point(x, dim=2):
    """Pad a macro point with zeros up to ``dim`` coordinates."""
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if x.size > dim:
        raise ValueError(f"macro point {tuple(x)} has more than {dim} coordinates")
    out = np.zeros(dim)
    out[: x.size] = x
    return out


def _check_field(name):
    if name not in FIELDS:
        raise ValueError(f"unknown field {name!r}; expected one of {FIELDS}")


class CoefficientModel:
    """Base class. Subclasses implement ``_evaluate`` for K1, K2 and Q."""

    c11 = 1.0
    c22 = 1.0

    def evaluate(self, name, x, y):
        _check_field(name)
        x = embed_point(x)
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != 2:
            raise ValueError("cell points must have a trailing dimension of 2")
        if name == "C11":
            return np.full(y.shape[:-1], float(self.c11))
        if name == "C22":
            return np.full(y.shape[:-1], float(self.c22))
        return self._evaluate(name, x, y)

    def _evaluate(self, name, x, y):  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def coercivity(self):
        """Lower bound ``c`` with K1, K2, Q >= c on the whole domain."""
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


def eval(model, name, x, y):  # noqa: A001 - mirrors the operation name
    """Evaluate ``name`` of ``model`` at macro point ``x`` and cell points ``y``."""
    return model.evaluate(name, x, y)


@dataclass(frozen=True)
class Paper4(CoefficientModel):
    """Trigonometric family depending linearly on ``x1`` through ``a``.

    kappa1 = (2 - a x1) cos(2 pi y1) sin(2 pi y2) + 3
    kappa2 = (2 - a x1) sin(2 pi y1) cos(2 pi y2) + 3
    Q      = (1 + a x1) sin(2 pi y1) sin(2 pi y2) + 3
    """

    a: float = 1.0
    c11: float = 1.0
    c22: float = 1.0
    x_range: tuple = (0.0, 1.0)

    def _evaluate(self, name, x, y):
        s1, c1 = np.sin(TWO_PI * y[..., 0]), np.cos(TWO_PI * y[..., 0])
        s2, c2 = np.sin(TWO_PI * y[..., 1]), np.cos(TWO_PI * y[..., 1])
        x1 = x[0]
        if name == "K1":
            return (2.0 - self.a * x1) * c1 * s2 + 3.0
        if name == "K2":
            return (2.0 - self.a * x1) * s1 * c2 + 3.0
        return (1.0 + self.a * x1) * s1 * s2 + 3.0

    @property
    def coercivity(self):
        lo, hi = self.x_range
        amp_k = max(abs(2.0 - self.a * lo), abs(2.0 - self.a * hi))
        amp_q = max(abs(1.0 + self.a * lo), abs(1.0 + self.a * hi))
        return 3.0 - max(amp_k, amp_q)

    def to_dict(self):
        return {"kind": "paper4", "a": self.a, "c11": self.c11, "c22": self.c22}


@dataclass(frozen=True)
class Constant(CoefficientModel):
    k1: float = 1.0
    k2: float = 1.0
    q: float = 1.0
    c11: float = 1.0
    c22: float = 1.0

    def _evaluate(self, name, x, y):
        value = {"K1": self.k1, "K2": self.k2, "Q": self.q}[name]
        return np.full(y.shape[:-1], float(value))

    @property
    def coercivity(self):
        return min(self.k1, self.k2, self.q)

    def to_dict(self):
        return {"kind": "constant", "k1": self.k1, "k2": self.k2, "q": self.q,
                "c11": self.c11, "c22": self.c22}


# Laminate profiles: 1-periodic, strictly positive, varying in one cell axis.
LAMINATE_PROFILES = {
    "cos_y1": (0, lambda t: 2.0 + np.cos(TWO_PI * t), 1.0),
    "cos_y2": (1, lambda t: 2.0 + np.cos(TWO_PI * t), 1.0),
}


@dataclass(frozen=True)
class Laminate(CoefficientModel):
    """Layered medium with kappa1 = kappa2 = profile(y_axis) and constant Q."""

    profile: str = "cos_y1"
    q: float = 1.0
    c11: float = 1.0
    c22: float = 1.0

    def __post_init__(self):
        if self.profile not in LAMINATE_PROFILES:
            raise ValueError(f"unknown laminate profile {self.profile!r}")

    def _evaluate(self, name, x, y):
        if name == "Q":
            return np.full(y.shape[:-1], float(self.q))
        axis, func, _ = LAMINATE_PROFILES[self.profile]
        return func(y[..., axis])

    @property
    def coercivity(self):
        return min(LAMINATE_PROFILES[self.profile][2], self.q)

    def to_dict(self):
        return {"kind": "laminate", "profile": self.profile, "q": self.q,
                "c11": self.c11, "c22": self.c22}


@dataclass(frozen=True, eq=False)
class Tabulated(CoefficientModel):
    """Samples on a uniform lattice in ``x1`` and a periodic lattice in ``y``.

    ``values[name]`` has shape ``(len(x_grid), ny, ny)`` with cell samples at
    ``y = (i/ny, j/ny)``; evaluation is trilinear and wraps periodically in y.
    """

    x_grid: np.ndarray
    values: dict
    c11: float = 1.0
    c22: float = 1.0
    _interp: dict = field(init=False, repr=False)

    def __post_init__(self):
        x_grid = np.asarray(self.x_grid, dtype=float)
        if x_grid.ndim != 1 or x_grid.size < 2 or np.any(np.diff(x_grid) <= 0):
            raise ValueError("x_grid must be strictly increasing with >= 2 entries")
        interp = {}
        for name in ("K1", "K2", "Q"):
            v = np.asarray(self.values[name], dtype=float)
            if v.ndim != 3 or v.shape[0] != x_grid.size or v.shape[1] != v.shape[2]:
                raise ValueError(f"samples for {name} must have shape (nx, ny, ny)")
            if np.any(v <= 0):
                raise ValueError(f"samples for {name} must be positive")
            ny = v.shape[1]
            closed = np.concatenate([v, v[:, :1, :]], axis=1)
            closed = np.concatenate([closed, closed[:, :, :1]], axis=2)
            yg = np.linspace(0.0, 1.0, ny + 1)
            interp[name] = RegularGridInterpolator((x_grid, yg, yg), closed)
        object.__setattr__(self, "x_grid", x_grid)
        object.__setattr__(self, "_interp", interp)

    def _evaluate(self, name, x, y):
        lo, hi = self.x_grid[0], self.x_grid[-1]
        if not lo - 1e-14 <= x[0] <= hi + 1e-14:
            raise ValueError(f"x1={x[0]} lies outside the sampled range [{lo}, {hi}]")
        yw = np.mod(y, 1.0)
        pts = np.empty(y.shape[:-1] + (3,))
        pts[..., 0] = np.clip(x[0], lo, hi)
        pts[..., 1:] = yw
        return self._interp[name](pts.reshape(-1, 3)).reshape(y.shape[:-1])

    @property
    def coercivity(self):
        # multilinear interpolation never undershoots the smallest sample
        return float(min(np.min(self._interp[n].values) for n in ("K1", "K2", "Q")))

    def to_dict(self):
        return {"kind": "tabulated", "x_grid": self.x_grid.tolist(),
                "values": {k: np.asarray(v).tolist() for k, v in self.values.items()},
                "c11": self.c11, "c22": self.c22}


def model_from_dict(spec):
    """Build a model from its JSON description, e.g. ``{"kind": "paper4", "a": 1}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    builders = {"paper4": Paper4, "constant": Constant, "laminate": Laminate,
                "tabulated": Tabulated}
    if kind not in builders:
        raise ValueError(f"unknown model kind {kind!r}")
    try:
        return builders[kind](**spec)
    except TypeError as exc:
        raise ValueError(f"bad parameters for model {kind!r}: {exc}") from None


def lipschitz_estimate(model, x_samples=17, y_samples=32, macro_box=((0.0, 1.0), (0.0, 1.0))):
    """Sampled estimate of the macro Lipschitz constant of K1, K2 and Q.

    Takes the largest difference quotient ``max_y |f(x, y) - f(x', y)| / |x - x'|``
    over neighbouring pairs of a uniform x lattice. This is an estimate, not a bound.
    """
    t = np.arange(y_samples) / y_samples
    y = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1)
    axes = [np.linspace(lo, hi, x_samples) for lo, hi in macro_box]
    cache = {}

    def values(idx):
        if idx not in cache:
            x = np.array([axes[k][i] for k, i in enumerate(idx)])
            cache[idx] = [model.evaluate(n, x, y) for n in ("K1", "K2", "Q")]
        return cache[idx]

    best = 0.0
    for idx in itertools.product(range(x_samples), repeat=len(axes)):
        for k in range(len(axes)):
            if idx[k] + 1 >= x_samples:
                continue
            nb = idx[:k] + (idx[k] + 1,) + idx[k + 1:]
            dist = axes[k][idx[k] + 1] - axes[k][idx[k]]
            for fa, fb in zip(values(idx), values(nb)):
                best = max(best, float(np.max(np.abs(fa - fb))) / dist)
    return best
