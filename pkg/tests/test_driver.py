import numpy as np
import pytest

from hierhomog import Constant, Paper4, build_hierarchy, full_reference_solve, hierarchical_solve
from hierhomog.cell_solver import energy_norm
from hierhomog.driver import compare, dof_budget, full_tensors, relative_error_percent
from hierhomog.mesh import prolong

H1 = ((0.0, 1.0),)


def test_constant_model_hierarchy():
    h = build_hierarchy(H1, 1, 0.5, 3)
    run = hierarchical_solve(Constant(2.0, 2.0, 3.0), h, 2, 3)
    assert len(run.tensors) == 17
    for x, sol in run.solutions.items():
        assert np.max(np.abs(sol.vectors)) <= 1e-14
        np.testing.assert_allclose(run.tensors[x].k1_star, 2 * np.eye(2), atol=1e-10)


def test_one_solution_per_point(run_a1):
    h, hier = run_a1["h"], run_a1["hier"]
    assert sorted(hier.solutions) == sorted(h.points())
    for x, sol in hier.solutions.items():
        l = h.level_of(x)
        assert sol.space.level == h.space_level(l)
        assert sol.provenance == ("anchor" if l == 0 else "corrected")
        # only the correction is stored, at its native size
        assert sol.vectors.shape == (2, 2 * sol.space.dim)


def test_hierarchical_value_next_to_anchor(run_a1):
    t = run_a1["hier"].tensors[(0.0625,)]
    assert t.k1_star[0, 0] == pytest.approx(2.8266, rel=5e-3)
    row = next(r for r in run_a1["report"]["points"] if r["x"] == (0.0625,))
    assert 0.05 <= row["err_k1_00"] <= 0.5


def test_weak_macro_variation_errors(run_a01):
    assert max(r["err_k1_00"] for r in run_a01["report"]["points"]) <= 0.05


def test_full_reference_values(run_a1, run_a01):
    assert run_a1["kfull"][(0.5,)].k1_star[0, 0] == pytest.approx(2.9036, rel=5e-3)
    assert run_a01["kfull"][(0.0,)].k2_star[0, 0] == pytest.approx(2.8341, rel=5e-3)


def test_full_constant_model():
    model = Constant(2.0, 2.0, 3.0)
    full = full_reference_solve(model, [(0.0,), (1.0,)], 2, 2, embed=lambda x: (x[0], 0.0))
    k = full_tensors(model, full)
    np.testing.assert_allclose(k[(1.0,)].k1_star, 2 * np.eye(2), atol=1e-10)


def test_anchor_errors_are_zero(run_a1):
    for row in run_a1["report"]["points"]:
        if row["level"] == 0:
            assert row["err_k1_00"] == 0.0 and row["err_k2_00"] == 0.0


def test_degenerate_hierarchy_compares_equal():
    model = Paper4(a=1.0)
    h = build_hierarchy(H1, 1, 0.5, 0)
    hier = hierarchical_solve(model, h, 2, 0)
    full = full_reference_solve(model, h.points(), 2, 0, embed=h.embed)
    for row in compare(hier, full)["points"]:
        assert all(v == 0 for k, v in row.items() if k not in ("x", "level"))


def test_two_point_improves(run_a1, run_a1_2pt):
    one = {r["x"]: r["err_k1_00"] for r in run_a1["report"]["points"] if r["level"] > 0}
    two = {r["x"]: r["err_k1_00"] for r in run_a1_2pt["report"]["points"] if r["level"] > 0}
    assert max(two.values()) <= 0.05
    better = [two[x] <= one[x] for x in one]
    assert np.mean(better) >= 0.8


def test_resolve_composes_parents(run_a1):
    hier = run_a1["hier"]
    x = (0.375,)
    sol = hier.solutions[x]
    full = hier.resolve(x)
    manual = prolong(sol.vectors.reshape(4, -1), sol.space, hier.finest_space).reshape(2, -1)
    for px, w in sol.parents:
        manual = manual + w * hier.resolve(px)
    np.testing.assert_allclose(full, manual)
    with pytest.raises(ValueError):
        hier.resolve((0.5,), level=0)


def test_corrected_means_follow_parents(run_a1):
    hier = run_a1["hier"]
    finest = hier.finest_space
    for x, sol in hier.solutions.items():
        v = hier.resolve(x)
        m = finest.integrals
        np.testing.assert_allclose(v[:, :finest.dim] @ m + v[:, finest.dim:] @ m, sol.means,
                                   atol=1e-10)


def test_dof_budget_unit_interval_setup():
    b = dof_budget(build_hierarchy(H1, 1, 0.5, 3), 2, 3)
    assert b["hier_per_field"] == 3 * 256 + 2 * 64 + 4 * 16 + 8 * 4 == 992
    assert b["full_per_field"] == 17 * 256 == 4352
    for row in b["levels"]:
        assert row["dofs_per_direction"] == row["points"] * 2 * (2 * 2 ** (3 - row["level"])) ** 2


def test_dof_budget_single_level():
    b = dof_budget(build_hierarchy(H1, 1, 0.5, 0), 2, 0)
    assert b["hier_per_field"] == b["full_per_field"]


def test_dof_budget_growth_2d():
    # hierarchical ~ (L+1) 2^(2L) per added level, full ~ 2^(2d) = 16
    def totals(L):
        h = build_hierarchy(((0.0, 1.0), (0.0, 1.0)), 2, 0.125, L)
        b = dof_budget(h, 2, L)
        return b["hier_per_field"], b["full_per_field"]

    for L in (1, 2):
        (h0, f0), (h1, f1) = totals(L), totals(L + 1)
        assert (h1 / h0) / ((L + 2) / (L + 1) * 4) == pytest.approx(1.0, abs=0.1)
        assert (f1 / f0) / 16 == pytest.approx(1.0, abs=0.1)


def test_level_error_growth_is_at_most_linear(run_a1):
    summary = run_a1["report"]["summary"]
    per_l = [summary[l]["energy_err_0"]["max"] / l for l in (1, 2, 3)]
    assert max(per_l) <= 1.5 * per_l[0]


def test_corrections_shrink_with_level(run_a1):
    h, hier = run_a1["h"], run_a1["hier"]
    med = []
    for l in (1, 2, 3):
        norms = [energy_norm(hier.solutions[tuple(x)].space, hier.solutions[tuple(x)].vectors[0])
                 for x in h.level_points(l)]
        med.append(np.median(norms))
    assert med[0] > med[1] > med[2]


def test_workers_do_not_change_results():
    model = Paper4(a=1.0)
    h = build_hierarchy(H1, 1, 0.5, 3)
    a = hierarchical_solve(model, h, 2, 3, workers=1)
    b = hierarchical_solve(model, h, 2, 3, workers=4)
    for x in a.tensors:
        assert np.array_equal(a.tensors[x].k1_star, b.tensors[x].k1_star)
        assert np.array_equal(a.solutions[x].vectors, b.solutions[x].vectors)


def test_mismatched_depth():
    with pytest.raises(ValueError):
        hierarchical_solve(Paper4(), build_hierarchy(H1, 1, 0.5, 2), 2, 3)


def test_relative_error_formula():
    assert relative_error_percent(2.0, 1.99) == pytest.approx(0.5)


def test_two_dimensional_run_matches_ledger():
    model = Paper4(a=1.0)
    h = build_hierarchy(((0.0, 1.0), (0.0, 1.0)), 2, 0.5, 2)
    run = hierarchical_solve(model, h, 2, 2, interp_points=4)
    for row in run.dof_ledger:
        measured = sum(run.solutions[tuple(x)].vectors.shape[1]
                       for x in h.level_points(row["level"]))
        assert measured == row["dofs_per_direction"]
    full = full_reference_solve(model, h.points(), 2, 2, embed=h.embed)
    errs = [r["err_k1_00"] for r in compare(run, full)["points"]]
    assert max(errs) < 0.05
