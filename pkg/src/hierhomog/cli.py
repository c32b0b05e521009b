"""Command line entry point: ``hierhomog {solve,budget,simulate,check}``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time

import numpy as np

from . import __version__
from .assembly import CoefficientError, assemble_system
from .cell_solver import SolverError
from .coeff import FIELDS, model_from_dict
from .driver import (compare, dof_budget, full_reference_solve, full_tensors,
                     hierarchical_solve)
from .effective import check_structure
from .hierarchy import build_hierarchy, parent_distance_ratio, select_parents
from .macro import EffectiveNetwork, build_macro_problem, l2_norm, solve_homogenized
from .mesh import build_space
from .report import (ConfigError, check_config, field_function, fmt, load_config, load_solutions,
                     resolve_output_dir, save_solutions, write_errors_csv, write_json,
                     write_kstar_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVE = 3
EXIT_IO = 4
EXIT_CHECK = 5


def _hierarchy(cfg):
    return build_hierarchy(tuple(map(tuple, cfg.domain)), cfg.macro_dim, cfg.H, cfg.L)


def _apply_overrides(cfg, args):
    changes = {}
    for name in ("mode", "workers"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    if getattr(args, "interp", None) is not None:
        changes["interp_points"] = 1 if args.interp == 1 else 2 ** cfg.macro_dim
    if getattr(args, "reproducible", False):
        changes["reproducible"] = True
    # results never depend on the worker count: points are collected in sorted order
    return dataclasses.replace(cfg, **changes)


def _manifest(cfg, hierarchy, budget, timings, extra=None):
    parents = {}
    for l in range(1, hierarchy.L + 1):
        for x in map(tuple, hierarchy.level_points(l)):
            parents[",".join(fmt(c) for c in x)] = [
                {"x": list(p), "weight": w}
                for p, w in select_parents(hierarchy, x, l, cfg.interp_points, cfg.tie_break)]
    config = cfg.to_dict()
    if cfg.reproducible:
        # the worker count cannot change any result, so it is left out of
        # reproducible manifests to keep them identical across worker counts
        config.pop("workers")
    out = {
        "version": __version__,
        "config": config,
        "hierarchy": hierarchy.to_dict(),
        "parents": parents,
        "space_assignment": {str(l): {"fe_level": hierarchy.space_level(l),
                                      "n": cfg.base_n * 2 ** hierarchy.space_level(l)}
                             for l in range(hierarchy.L + 1)},
        "dof_ledger": budget,
        "timings": None if cfg.reproducible else timings,
    }
    if extra:
        out.update(extra)
    return out


def execute(cfg, cache=None):
    """Run the requested strategies; returns a dict of in-memory results."""
    model = model_from_dict(cfg.model)
    hierarchy = _hierarchy(cfg)
    timings = {}
    out = {"model": model, "hierarchy": hierarchy, "timings": timings}
    if cfg.mode in ("hier", "both"):
        t0 = time.perf_counter()
        hier = hierarchical_solve(model, hierarchy, cfg.base_n, cfg.L, cfg.interp_points,
                                  cfg.quad_order, workers=cfg.workers,
                                  tie_break=cfg.tie_break)
        timings["hierarchical"] = time.perf_counter() - t0
        timings["hierarchical_phases"] = hier.timings
        out["hier"] = hier
    if cfg.mode in ("full", "both"):
        t0 = time.perf_counter()
        full = None
        if cache:
            full = load_solutions(cache, cfg.base_n, cfg.L, cfg.quad_order, cfg.model)
        if full is None or set(full) != set(hierarchy.points()):
            full = full_reference_solve(model, hierarchy.points(), cfg.base_n, cfg.L,
                                        cfg.quad_order, workers=cfg.workers,
                                        embed=hierarchy.embed)
            if cache:
                save_solutions(cache, full, cfg.base_n, cfg.L, cfg.quad_order, cfg.model)
        out["full"] = full
        out["full_kstar"] = full_tensors(model, full, embed=hierarchy.embed,
                                         workers=cfg.workers)
        timings["full"] = time.perf_counter() - t0
    if cfg.mode == "both":
        out["report"] = compare(out["hier"], out["full"], out["full_kstar"])
    return out


def _write_solve_outputs(cfg, res, outdir, paper_format=False):
    outdir.mkdir(parents=True, exist_ok=True)
    h = res["hierarchy"]
    files = []
    if "hier" in res:
        write_kstar_csv(outdir / "kstar_hier.csv", res["hier"].tensors, h)
        files.append("kstar_hier.csv")
    if "full_kstar" in res:
        write_kstar_csv(outdir / "kstar_full.csv", res["full_kstar"], h)
        files.append("kstar_full.csv")
    if "report" in res:
        write_errors_csv(outdir / "errors.csv", res["report"], h)
        files.append("errors.csv")
    budget = dof_budget(h, cfg.base_n, cfg.L)
    extra = {"outputs": files}
    if "report" in res:
        extra["error_summary"] = {str(k): v for k, v in res["report"]["summary"].items()}
    write_json(outdir / "manifest.json", _manifest(cfg, h, budget, res["timings"], extra))
    _print_table(res, paper_format)
    return files


def _print_table(res, paper_format):
    h = res["hierarchy"]
    hier = res.get("hier")
    full = res.get("full_kstar")
    errs = {r["x"]: r for r in res["report"]["points"]} if "report" in res else {}
    cols = ["x", "level"]
    if full:
        cols += ["k1_11 full", "k2_11 full"]
    if hier:
        cols += ["k1_11 hier", "k2_11 hier"]
    if errs:
        cols += ["err1 %", "err2 %"]
    print("\t".join(cols))
    for x in sorted(h.points()):
        row = [",".join(fmt(c, paper_format) for c in x), str(h.level_of(x))]
        if full:
            row += [fmt(full[x].k1_star[0, 0], paper_format), fmt(full[x].k2_star[0, 0], paper_format)]
        if hier:
            t = hier.tensors[x]
            row += [fmt(t.k1_star[0, 0], paper_format), fmt(t.k2_star[0, 0], paper_format)]
        if errs:
            row += [fmt(errs[x]["err_k1_00"], paper_format), fmt(errs[x]["err_k2_00"], paper_format)]
        print("\t".join(row))


def cmd_solve(cfg, args):
    outdir = resolve_output_dir(cfg, args.output)
    res = execute(cfg, cache=args.cache)
    _write_solve_outputs(cfg, res, outdir, args.paper_format)
    return EXIT_OK


def cmd_budget(cfg, args):
    h = _hierarchy(cfg)
    b = dof_budget(h, cfg.base_n, cfg.L)
    print("level\tpoints\tfe_level\tspace_dim\tdofs_per_field")
    for r in b["levels"]:
        print(f"{r['level']}\t{r['points']}\t{r['space_level']}\t{r['space_dim']}\t"
              f"{r['dofs_per_field']}")
    print(f"hierarchical {b['hier_per_field']} vs full {b['full_per_field']} "
          f"per field per direction")
    return EXIT_OK


def cmd_simulate(cfg, args):
    if cfg.macro_solver is None:
        raise ConfigError("simulate needs a 'macro_solver' block in the config")
    outdir = resolve_output_dir(cfg, args.output)
    res = execute(cfg, cache=args.cache)
    _write_solve_outputs(cfg, res, outdir, args.paper_format)
    ms = cfg.macro_solver
    snapdir = outdir / "snapshots"
    snapdir.mkdir(parents=True, exist_ok=True)
    trajectories = {}
    sources = {"hier": res["hier"].tensors if "hier" in res else None,
               "full": res.get("full_kstar")}
    manifest = {"dt": ms.dt, "T_end": ms.T_end, "n": ms.n, "snapshots": {}}
    for name, tensors in sources.items():
        if tensors is None:
            continue
        network = EffectiveNetwork.from_tensors(tensors)
        problem = build_macro_problem(network, n=ms.n, dt=ms.dt, T_end=ms.T_end,
                                      q=field_function(ms.q), g1=field_function(ms.g1),
                                      g2=field_function(ms.g2))
        traj = solve_homogenized(problem, ms.snapshots or None)
        trajectories[name] = (problem, traj)
        files = []
        for k, (t, u) in enumerate(traj):
            fname = f"{name}_{k:04d}.csv"
            with open(snapdir / fname, "w") as fh:
                fh.write("x1,x2,u\n")
                for (a, b), v in zip(problem.nodes, u):
                    fh.write(f"{fmt(a)},{fmt(b)},{fmt(v)}\n")
            files.append({"t": t, "file": f"snapshots/{fname}"})
        manifest["snapshots"][name] = files
    if len(trajectories) == 2:
        (p, th), (_, tf) = trajectories["hier"], trajectories["full"]
        uh, uf = th[-1][1], tf[-1][1]
        denom = l2_norm(p, uf)
        manifest["final_relative_l2_difference"] = (l2_norm(p, uh - uf) / denom
                                                    if denom > 0 else 0.0)
    write_json(outdir / "trajectory.json", manifest)
    return EXIT_OK


def cmd_check(cfg, args):
    """Invariant suite on the configured model and hierarchy."""
    model = model_from_dict(cfg.model)
    h = _hierarchy(cfg)
    rng = np.random.default_rng(0)
    results = []

    def record(name, ok, detail):
        results.append(ok)
        print(f"{'PASS' if ok else 'FAIL'}\t{name}\t{detail}")

    c = model.coercivity
    xs = rng.uniform(0, 1, size=(200, 2))
    ys = rng.uniform(0, 1, size=(200, 50, 2))
    low = min(float(np.min(model.evaluate(f, x, y))) for f in ("K1", "K2", "Q")
              for x, y in zip(xs, ys))
    record("positivity", low >= c > 0, f"min={low:.6g} c={c:.6g}")
    t = rng.uniform(0, 1, 100)
    per = 0.0
    for f in FIELDS:
        for x in xs[:10]:
            a = model.evaluate(f, x, np.stack([np.zeros_like(t), t], 1))
            b = model.evaluate(f, x, np.stack([np.ones_like(t), t], 1))
            a2 = model.evaluate(f, x, np.stack([t, np.zeros_like(t)], 1))
            b2 = model.evaluate(f, x, np.stack([t, np.ones_like(t)], 1))
            per = max(per, float(np.max(np.abs(a - b))), float(np.max(np.abs(a2 - b2))))
    record("periodicity", per <= 1e-12, f"max jump={per:.3g}")

    space = build_space(cfg.base_n, min(cfg.L, 1), cfg.L, cfg.quad_order)
    sys_ = assemble_system(space, model, h.embed(h.points()[0]))
    K = sys_.K
    sym = float(abs(K - K.T).max()) if K.nnz else 0.0
    ker = float(np.max(np.abs(K @ np.ones(K.shape[0]))))
    record("operator symmetry", sym <= 1e-12 * abs(K).max(), f"max|K-K^T|={sym:.3g}")
    record("operator kernel", ker <= 1e-10 * abs(K).max(), f"max|K 1|={ker:.3g}")

    worst = max(parent_distance_ratio(h, x, select_parents(h, x, l, cfg.interp_points,
                                                           cfg.tie_break))
                for l in range(1, h.L + 1) for x in map(tuple, h.level_points(l)))
    record("parent distance", worst <= 1 + 1e-12, f"max ratio={worst:.3g}")

    hier = hierarchical_solve(model, h, cfg.base_n, cfg.L, cfg.interp_points, cfg.quad_order,
                              workers=cfg.workers, tie_break=cfg.tie_break)
    asym, eig = 0.0, np.inf
    for x, t in hier.tensors.items():
        s = check_structure(t)
        asym = max(asym, s["asymmetry"] / np.abs(t.total).max())
        eig = min(eig, s["min_eig_sum"])
    record("kappa* symmetry", asym <= 1e-8, f"max relative asymmetry={asym:.3g}")
    record("kappa* positive definite", eig > 0, f"min eigenvalue={eig:.6g}")
    return EXIT_OK if all(results) else EXIT_CHECK


def build_parser():
    p = argparse.ArgumentParser(prog="hierhomog", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, solving=True):
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--workers", type=int, help="worker threads per level")
        if solving:
            sp.add_argument("--mode", choices=["hier", "full", "both"])
            sp.add_argument("--interp", type=int, choices=[1, 2, 4],
                            help="1-point or multi-point (2 in 1-D, 4 in 2-D) interpolation")
            sp.add_argument("--output", help="output directory")
            sp.add_argument("--reproducible", action="store_true",
                            help="bitwise-stable outputs (omits wall-clock timings)")
            sp.add_argument("--paper-format", action="store_true",
                            help="print the table rounded to 4 decimals")
            sp.add_argument("--cache", help="npz file caching the full-solve cell solutions")

    common(sub.add_parser("solve", help="compute effective tensors"))
    common(sub.add_parser("budget", help="print the DOF ledger"), solving=False)
    common(sub.add_parser("simulate", help="solve, then run the homogenized macro solver"))
    chk = sub.add_parser("check", help="run the invariant suite")
    common(chk, solving=False)
    chk.add_argument("--interp", type=int, choices=[1, 2, 4])
    return p


COMMANDS = {"solve": cmd_solve, "budget": cmd_budget, "simulate": cmd_simulate,
            "check": cmd_check}


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        cfg = _apply_overrides(cfg, args)
        check_config(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, CoefficientError, ValueError, OverflowError) as exc:
        print(f"solve error: {exc}", file=sys.stderr)
        return EXIT_SOLVE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
