"""Hierarchical and full solves of the cell problems over a macro hierarchy."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import ParentTerm, assemble_rhs_correction, assemble_system
from .cell_solver import CellSolution, ConstrainedSolver, cell_means, energy_norm, solve_full
from .effective import effective_tensor
from .hierarchy import select_parents
from .mesh import build_space, prolong

log = logging.getLogger(__name__)

D = 2  # cell dimension


def _parallel_map(func, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


@dataclass
class HierRunResult:
    hierarchy: object
    model: object
    base_n: int
    L: int
    quad_order: int
    interp_points: int
    tie_break: str = "coarsest"
    solutions: dict = field(default_factory=dict)
    dof_ledger: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    tensors: dict = field(default_factory=dict)

    @property
    def finest_space(self):
        return build_space(self.base_n, self.L, self.L, self.quad_order)

    def resolve(self, x, level=None):
        """Full (d, 2*dim) representation of the solution at ``x`` on ``level``.

        Corrections and parents are prolonged on the fly; nothing is stored.
        """
        level = self.L if level is None else level
        sol = self.solutions[tuple(x)]
        target = build_space(self.base_n, level, self.L, self.quad_order)
        if sol.space.level > level:
            raise ValueError("cannot resolve onto a space coarser than the stored one")
        out = prolong(sol.vectors.reshape(2 * D, -1), sol.space, target).reshape(D, -1)
        for px, w in sol.parents:
            out = out + w * self.resolve(px, level)
        return out

    def points(self):
        return list(self.solutions)


def hierarchical_solve(model, hierarchy, base_n, L, interp_points=1, quad_order=3,
                       workers=1, tol=1e-10, tie_break="coarsest", rhs_quadrature="finest"):
    """Anchors on V_L, then level by level corrections on V_{L-l}.

    A point of S_l stores only its correction; its full solution is the
    correction plus the weighted parent solutions (see ``HierRunResult.resolve``).
    """
    if hierarchy.L != L:
        raise ValueError(f"hierarchy has {hierarchy.L} levels, expected L={L}")
    result = HierRunResult(hierarchy=hierarchy, model=model, base_n=base_n, L=L,
                           quad_order=quad_order, interp_points=interp_points,
                           tie_break=tie_break)
    finest = result.finest_space
    t_start = time.perf_counter()

    def anchor(idx):
        x = hierarchy.coords(idx)
        return x, solve_full(finest, model, hierarchy.embed(x), tol=tol)

    for x, sol in _parallel_map(anchor, list(hierarchy.levels[0]), workers):
        sol.x = x
        result.solutions[x] = sol
    result.timings["anchors"] = time.perf_counter() - t_start

    for l in range(1, L + 1):
        t0 = time.perf_counter()
        space = build_space(base_n, hierarchy.space_level(l), L, quad_order)

        def correct(idx, l=l, space=space):
            x = hierarchy.coords(idx)
            parents = select_parents(hierarchy, x, l, interp_points, tie_break)
            resolved = [(px, w, result.resolve(px)) for px, w in parents]
            xe = hierarchy.embed(x)
            solver = ConstrainedSolver(assemble_system(space, model, xe), tol=tol)
            rows, res = [], 0.0
            for i in range(D):
                terms = [ParentTerm(hierarchy.embed(px), w, v[i], finest)
                         for px, w, v in resolved]
                rhs = assemble_rhs_correction(space, model, xe, terms, i,
                                              quadrature=rhs_quadrature)
                u = solver.solve(rhs)
                res = max(res, solver.relative_residual(u, rhs))
                rows.append(u)
            vectors = np.array(rows)
            parent_means = sum(w * result.solutions[px].means for px, w in parents)
            return x, CellSolution(x=x, space=space, vectors=vectors, provenance="corrected",
                                   parents=tuple(parents), residual_norm=res,
                                   means=parent_means + cell_means(space, vectors))

        # points within a level only read lower levels, so they may run concurrently
        for x, sol in _parallel_map(correct, list(hierarchy.levels[l]), workers):
            result.solutions[x] = sol
        result.timings[f"level_{l}"] = time.perf_counter() - t0
        log.debug("level %d: %d corrections on n=%d", l, len(hierarchy.levels[l]), space.n)

    t0 = time.perf_counter()
    result.tensors = compute_tensors(result, workers=workers)
    result.timings["tensors"] = time.perf_counter() - t0
    result.dof_ledger = dof_budget(hierarchy, base_n, L)["levels"]
    return result


def compute_tensors(result, workers=1):
    finest = result.finest_space
    h = result.hierarchy

    def one(x):
        return x, effective_tensor(finest, result.model, h.embed(x), result.resolve(x))

    return dict(_parallel_map(one, list(result.solutions), workers))


def full_reference_solve(model, points, base_n, L, quad_order=3, workers=1, tol=1e-10,
                         embed=None):
    """Solve every cell problem on the finest space V_L."""
    finest = build_space(base_n, L, L, quad_order)
    embed = embed or (lambda x: x)

    def one(x):
        x = tuple(x)
        sol = solve_full(finest, model, embed(x), tol=tol)
        sol.x = x
        return x, sol

    return dict(_parallel_map(one, [tuple(p) for p in points], workers))


def full_tensors(model, full, embed=None, workers=1):
    embed = embed or (lambda x: x)

    def one(item):
        x, sol = item
        return x, effective_tensor(sol.space, model, embed(x), sol.vectors)

    return dict(_parallel_map(one, list(full.items()), workers))


def relative_error_percent(full_value, hier_value):
    """100 |full - hier| / |full|."""
    return 100.0 * abs(full_value - hier_value) / abs(full_value)


def compare(hier, full, full_kstar=None):
    """Per-point percentage errors of the diagonal kappa* entries and energy-norm
    differences of the cell solutions, plus per-level summaries."""
    if set(hier.solutions) != set(full):
        raise ValueError("hierarchical and full runs cover different point sets")
    h = hier.hierarchy
    if full_kstar is None:
        full_kstar = full_tensors(hier.model, full, embed=h.embed)
    finest = hier.finest_space
    rows = []
    for x in hier.solutions:
        th, tf = hier.tensors[x], full_kstar[x]
        resolved = hier.resolve(x)
        row = {"x": x, "level": h.level_of(x)}
        for name in ("k1_star", "k2_star"):
            a, b = getattr(tf, name), getattr(th, name)
            for i in range(D):
                row[f"err_{name[:2]}_{i}{i}"] = relative_error_percent(a[i, i], b[i, i])
            row[f"abs_err_{name[:2]}_offdiag"] = float(max(abs(a[0, 1] - b[0, 1]),
                                                           abs(a[1, 0] - b[1, 0])))
        for i in range(D):
            row[f"energy_err_{i}"] = energy_norm(finest, resolved[i], finest,
                                                 full[x].vectors[i])
        rows.append(row)

    summary = {}
    keys = [k for k in rows[0] if k not in ("x", "level")] if rows else []
    for l in range(h.L + 1):
        sel = [r for r in rows if r["level"] == l]
        if sel:
            summary[l] = {k: {"max": max(r[k] for r in sel),
                              "mean": float(np.mean([r[k] for r in sel]))} for k in keys}
    return {"points": rows, "summary": summary}


def dof_budget(hierarchy, base_n, L):
    """Exact DOF counts per level for the hierarchical and full strategies.

    ``*_per_field`` counts one field for one direction; ``*_per_direction``
    counts both continua of one cell problem.
    """
    if hierarchy.L != L:
        raise ValueError("hierarchy depth does not match L")
    levels = []
    for l, pts in enumerate(hierarchy.levels):
        dim = (base_n * 2 ** (L - l)) ** 2
        levels.append({"level": l, "points": len(pts), "space_level": L - l,
                       "space_dim": dim, "dofs_per_field": len(pts) * dim,
                       "dofs_per_direction": len(pts) * 2 * dim})
    finest_dim = (base_n * 2 ** L) ** 2
    n_points = sum(len(p) for p in hierarchy.levels)
    hier_pf = sum(r["dofs_per_field"] for r in levels)
    full_pf = n_points * finest_dim
    return {"levels": levels, "hier_per_field": hier_pf, "full_per_field": full_pf,
            "hier_per_direction": hier_pf * 2, "full_per_direction": full_pf * 2}
