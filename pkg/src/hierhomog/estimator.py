"""scikit-learn style wrapper: fit the effective tensors once, then map macro points."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .coeff import CoefficientModel, model_from_dict
from .driver import dof_budget, full_reference_solve, full_tensors, hierarchical_solve
from .hierarchy import TIE_BREAKS, build_hierarchy
from .macro import interpolate_network

KSTAR_COLUMNS = tuple(f"{name}_{i}{j}" for name in ("k1", "k2") for i in range(2)
                      for j in range(2))


class HierarchicalHomogenizer(TransformerMixin, BaseEstimator):
    """Effective two-continuum conductivities over a macro domain.

    ``fit`` solves the cell problems on the nested macro grids (or on every
    point with the finest mesh when ``strategy="full"``). ``transform`` maps
    macro points of shape (n, macro_dim) to the (n, 8) array of interpolated
    kappa1* and kappa2* entries, row-major, in the order of ``KSTAR_COLUMNS``.

    Parameters
    ----------
    model : CoefficientModel or dict
        Coefficient fields, or their JSON description.
    base_n, L, quad_order : int
        Coarsest cell mesh size, number of levels and Gauss order.
    domain : sequence of (lo, hi)
        Macro box; its length sets the macro dimension.
    H : float
        Spacing of the coarsest macro grid.
    interp_points : int
        1 or 2**macro_dim parents per corrected point.
    strategy : {"hier", "full"}
    tie_break : {"coarsest", "lexicographic"}
    n_jobs : int
        Worker threads per level.
    """

    def __init__(self, model=None, base_n=2, L=3, domain=((0.0, 1.0),), H=0.5,
                 interp_points=1, strategy="hier", tie_break="coarsest", quad_order=3,
                 n_jobs=1):
        self.model = model
        self.base_n = base_n
        self.L = L
        self.domain = domain
        self.H = H
        self.interp_points = interp_points
        self.strategy = strategy
        self.tie_break = tie_break
        self.quad_order = quad_order
        self.n_jobs = n_jobs

    def _validate_params(self):
        if self.model is None:
            raise ValueError("a coefficient model is required")
        model = self.model if isinstance(self.model, CoefficientModel) else model_from_dict(self.model)
        if self.strategy not in ("hier", "full"):
            raise ValueError(f"strategy must be 'hier' or 'full', got {self.strategy!r}")
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(f"tie_break must be one of {TIE_BREAKS}")
        if int(self.base_n) < 2 or int(self.L) < 0 or int(self.n_jobs) < 1:
            raise ValueError("base_n >= 2, L >= 0 and n_jobs >= 1 are required")
        return model

    def fit(self, X=None, y=None):
        """Build the macro hierarchy and solve its cell problems. ``X`` and ``y`` are ignored."""
        model = self._validate_params()
        domain = tuple(tuple(b) for b in self.domain)
        h = build_hierarchy(domain, len(domain), self.H, self.L)
        if self.interp_points not in (1, 2 ** h.macro_dim):
            raise ValueError(f"interp_points must be 1 or {2 ** h.macro_dim}")
        if self.strategy == "hier":
            run = hierarchical_solve(model, h, self.base_n, self.L, self.interp_points,
                                     self.quad_order, workers=self.n_jobs,
                                     tie_break=self.tie_break)
            self.tensors_ = run.tensors
            self.solutions_ = run.solutions
        else:
            full = full_reference_solve(model, h.points(), self.base_n, self.L,
                                        self.quad_order, workers=self.n_jobs, embed=h.embed)
            self.tensors_ = full_tensors(model, full, embed=h.embed, workers=self.n_jobs)
            self.solutions_ = full
        self.model_ = model
        self.hierarchy_ = h
        self.dof_ledger_ = dof_budget(h, self.base_n, self.L)
        self.points_ = np.array(sorted(self.tensors_), dtype=float).reshape(-1, h.macro_dim)
        self.kstar_ = np.array([np.concatenate([self.tensors_[p].k1_star.ravel(),
                                                self.tensors_[p].k2_star.ravel()])
                                for p in sorted(self.tensors_)])
        self.n_features_in_ = h.macro_dim
        return self

    def transform(self, X):
        check_is_fitted(self, "kstar_")
        X = check_array(X, dtype=float, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        lo = np.array([b[0] for b in self.hierarchy_.domain])
        hi = np.array([b[1] for b in self.hierarchy_.domain])
        if np.any(X < lo - 1e-12) or np.any(X > hi + 1e-12):
            raise ValueError("macro points must lie inside the fitted domain")
        return interpolate_network(self.points_, self.kstar_, np.clip(X, lo, hi))

    def get_feature_names_out(self, input_features=None):
        return np.array(KSTAR_COLUMNS, dtype=object)
