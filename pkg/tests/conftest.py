import json
from pathlib import Path

import pytest

from hierhomog import Paper4, build_hierarchy, full_reference_solve, hierarchical_solve
from hierhomog.driver import compare, full_tensors

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def _reference_run(a, interp):
    model = Paper4(a=a)
    h = build_hierarchy(((0.0, 1.0),), 1, 0.5, 3)
    hier = hierarchical_solve(model, h, 2, 3, interp_points=interp)
    full = full_reference_solve(model, h.points(), 2, 3, embed=h.embed)
    kfull = full_tensors(model, full, embed=h.embed)
    return {"model": model, "h": h, "hier": hier, "full": full, "kfull": kfull,
            "report": compare(hier, full, kfull)}


@pytest.fixture(scope="session")
def run_a1():
    return _reference_run(1.0, 1)


@pytest.fixture(scope="session")
def run_a1_2pt():
    return _reference_run(1.0, 2)


@pytest.fixture(scope="session")
def run_a01():
    return _reference_run(0.1, 1)


@pytest.fixture
def a1_config(tmp_path):
    """Copy of the shipped a=1 config writing into a temporary directory."""
    raw = json.loads((CONFIG_DIR / "paper4_a1.json").read_text())
    raw["output_dir"] = str(tmp_path / "out")
    path = tmp_path / "paper4_a1.json"
    path.write_text(json.dumps(raw))
    return path


ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record and print one pass/fail line per acceptance criterion, then assert."""

    def record(number, title, ok, detail):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
        ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
