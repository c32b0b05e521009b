"""Run configuration, CSV/JSON emission and the cell-solution cache."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .coeff import model_from_dict
from .cell_solver import CellSolution
from .hierarchy import TIE_BREAKS
from .mesh import PeriodicFESpace

OUTPUT_DIR_ENV = "HIERHOMOG_OUTPUT_DIR"
CACHE_VERSION = 1
FLOAT_FMT = ".17g"


class ConfigError(ValueError):
    pass


_FIELD_SCHEMA = {
    "oneOf": [
        {"type": "number"},
        {"type": "object", "required": ["kind"],
         "properties": {"kind": {"enum": ["constant", "sinsin"]},
                        "value": {"type": "number"}, "amplitude": {"type": "number"}},
         "additionalProperties": False},
    ]
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["model"],
    "additionalProperties": False,
    "properties": {
        "model": {"type": "object", "required": ["kind"]},
        "base_n": {"type": "integer", "minimum": 2},
        "L": {"type": "integer", "minimum": 0, "maximum": 8},
        "quad_order": {"type": "integer", "minimum": 2, "maximum": 8},
        "macro": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "domain": {"type": "array", "minItems": 1, "maxItems": 2,
                           "items": {"type": "array", "minItems": 2, "maxItems": 2,
                                     "items": {"type": "number"}}},
                "H": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "interp_points": {"type": "integer", "enum": [1, 2, 4]},
        "tie_break": {"enum": list(TIE_BREAKS)},
        "mode": {"enum": ["hier", "full", "both"]},
        "output_dir": {"type": "string"},
        "reproducible": {"type": "boolean"},
        "workers": {"type": "integer", "minimum": 1},
        "macro_solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 2},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "T_end": {"type": "number", "minimum": 0},
                "q": _FIELD_SCHEMA, "q1": _FIELD_SCHEMA, "q2": _FIELD_SCHEMA,
                "g1": _FIELD_SCHEMA, "g2": _FIELD_SCHEMA,
                "snapshots": {"type": "array", "items": {"type": "number", "minimum": 0}},
            },
        },
    },
}


@dataclass
class MacroSolverConfig:
    n: int = 32
    dt: float = 1e-3
    T_end: float = 0.1
    q: object = 0.0
    g1: object = 0.0
    g2: object = 0.0
    snapshots: list = field(default_factory=list)


@dataclass
class RunConfig:
    model: dict
    base_n: int = 2
    L: int = 3
    quad_order: int = 3
    domain: list = field(default_factory=lambda: [[0.0, 1.0]])
    H: float = 0.5
    interp_points: int = 1
    tie_break: str = "coarsest"
    mode: str = "both"
    output_dir: str = "out"
    reproducible: bool = False
    workers: int = 1
    macro_solver: MacroSolverConfig = None

    @property
    def macro_dim(self):
        return len(self.domain)

    def to_dict(self):
        """The config as a JSON document accepted by :func:`parse_config`."""
        d = asdict(self)
        d["macro"] = {"domain": d.pop("domain"), "H": d.pop("H")}
        if self.macro_solver is None:
            d.pop("macro_solver")
        return d


def field_function(spec):
    """Turn a JSON field spec into a constant or a callable of (m, 2) points."""
    if isinstance(spec, (int, float)):
        return float(spec)
    if spec["kind"] == "constant":
        return float(spec.get("value", 0.0))
    amp = float(spec.get("amplitude", 1.0))
    return lambda x: amp * np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])


def parse_config(raw):
    """Validate a decoded JSON document and return a :class:`RunConfig`."""
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from None
    try:
        model_from_dict(raw["model"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    macro = raw.get("macro", {})
    ms = raw.get("macro_solver")
    if ms is not None:
        if "q1" in ms or "q2" in ms:
            raise ConfigError("separate sources per continuum are not supported; use 'q'")
        ms = MacroSolverConfig(**ms)
    cfg = RunConfig(
        model=raw["model"],
        base_n=raw.get("base_n", 2), L=raw.get("L", 3), quad_order=raw.get("quad_order", 3),
        domain=macro.get("domain", [[0.0, 1.0]]), H=macro.get("H", 0.5),
        interp_points=raw.get("interp_points", 1), tie_break=raw.get("tie_break", "coarsest"),
        mode=raw.get("mode", "both"), output_dir=raw.get("output_dir", "out"),
        reproducible=raw.get("reproducible", False), workers=raw.get("workers", 1),
        macro_solver=ms,
    )
    check_config(cfg)
    return cfg


def check_config(cfg):
    if cfg.interp_points not in (1, 2 ** cfg.macro_dim):
        raise ConfigError(f"interp_points must be 1 or {2 ** cfg.macro_dim}")
    for lo, hi in cfg.domain:
        ratio = (hi - lo) / cfg.H
        if hi <= lo or abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError(f"H={cfg.H} does not divide [{lo}, {hi}]")
    if cfg.macro_solver is not None and cfg.macro_solver.T_end > 0:
        if cfg.macro_solver.T_end < cfg.macro_solver.dt:
            raise ConfigError("T_end must be 0 or at least one time step")


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(raw)


def resolve_output_dir(cfg, override=None):
    return Path(override or os.environ.get(OUTPUT_DIR_ENV) or cfg.output_dir)


def fmt(v, paper=False):
    return f"{v:.4f}" if paper else format(float(v), FLOAT_FMT)


def write_kstar_csv(path, tensors, hierarchy):
    """Columns: x coords, level, k1_star and k2_star entries row-major."""
    m = hierarchy.macro_dim
    header = [f"x{k + 1}" for k in range(m)] + ["level"]
    header += [f"{name}_{i}{j}" for name in ("k1", "k2") for i in range(2) for j in range(2)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for x in sorted(tensors):
            t = tensors[x]
            row = [fmt(c) for c in x] + [hierarchy.level_of(x)]
            row += [fmt(v) for v in t.k1_star.ravel()] + [fmt(v) for v in t.k2_star.ravel()]
            w.writerow(row)


def write_errors_csv(path, report, hierarchy):
    rows = sorted(report["points"], key=lambda r: r["x"])
    keys = [k for k in rows[0] if k not in ("x", "level")]
    m = hierarchy.macro_dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k + 1}" for k in range(m)] + ["level"] + keys)
        for r in rows:
            w.writerow([fmt(c) for c in r["x"]] + [r["level"]] + [fmt(r[k]) for k in keys])


def read_csv(path):
    """Read an emitted CSV back as a header list and a float array."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o)}")


def save_solutions(path, solutions, base_n, L, quad_order, model):
    """Portable cache of anchor-type solutions (one ``.npz`` file)."""
    items = sorted(solutions.items())
    if any(s.provenance != "anchor" for _, s in items):
        raise ValueError("only directly solved (anchor-type) solutions can be cached")
    levels = {s.space.level for _, s in items}
    if len(levels) != 1:
        raise ValueError("cached solutions must share one space")
    header = {"version": CACHE_VERSION, "base_n": base_n, "L": L, "level": levels.pop(),
              "quad_order": quad_order, "directions": 2, "model": model}
    np.savez(path, header=json.dumps(header, sort_keys=True),
             x=np.array([x for x, _ in items], dtype=float),
             vectors=np.array([s.vectors for _, s in items]),
             residuals=np.array([s.residual_norm for _, s in items]),
             means=np.array([s.means for _, s in items]))


def load_solutions(path, base_n, L, quad_order, model):
    """Load a cache written by :func:`save_solutions`; ``None`` if it does not match."""
    try:
        data = np.load(path)
    except (OSError, ValueError):
        return None
    header = json.loads(str(data["header"]))
    expected = {"version": CACHE_VERSION, "base_n": base_n, "L": L, "level": L,
                "quad_order": quad_order, "directions": 2, "model": model}
    if header != json.loads(json.dumps(expected, sort_keys=True)):
        return None
    space = PeriodicFESpace(base_n, header["level"], quad_order)
    out = {}
    for x, v, r, m in zip(data["x"], data["vectors"], data["residuals"], data["means"]):
        key = tuple(float(c) for c in x)
        out[key] = CellSolution(x=key, space=space, vectors=v, provenance="anchor",
                                residual_norm=float(r), means=m)
    return out
