"""Problem configuration files and bundled presets.

Format (INI, parsed by :mod:`configparser`)::

    [domain]    n, R, a, h, boundary_mode
    [time]      T, M
    [operator]  kind, k
    [data]      g, G, phi, u0 and optionally exact
    [solver]    any SolverConfig field

Data entries are expressions (see :mod:`parahess.expressions`): ``g`` and
``u0`` over the coordinates, ``phi`` and ``exact`` over t and the
coordinates, ``G`` over t, the coordinates and r. The domain is the ball
|z| < R with defining function a(|z|^2 - R^2).
"""
from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path

from .expressions import ExpressionError, compile_data
from .grid_domain import ConfigurationError, ProblemSpec, TimeGrid, make_ball_domain
from .hessian_core import sigma_k_root
from .solver import SolverConfig

SECTIONS = ("domain", "time", "operator", "data", "solver")

DEFAULTS = {
    "domain": {"n": "1", "R": "1.0", "a": "2.0", "h": "0.125", "boundary_mode": "node"},
    "time": {"T": "0.25", "M": "32"},
    "operator": {"kind": "sigma_k_root", "k": "1"},
    "data": {},
}

_MANUFACTURED = {
    "g": "1",
    "G": "log((1+t)*f1) - abs2 + (r - (1+t)*abs2)",
    "phi": "(1+t)*abs2",
    "u0": "abs2",
    "exact": "(1+t)*abs2",
}

_EXP_GROWTH = {
    "g": "1",
    "G": "log(exp(t)*f1) - exp(t)*abs2 + (r - exp(t)*abs2)",
    "phi": "exp(t)*abs2",
    "u0": "abs2",
    "exact": "exp(t)*abs2",
}

PRESETS: dict[str, dict[str, dict[str, str]]] = {
    "stationary_n1": {
        "domain": {"n": "1", "h": "0.125"},
        "time": {"T": "0.25", "M": "32"},
        "operator": {"k": "1"},
        "data": {"g": "f1", "G": "0", "phi": "abs2", "u0": "abs2", "exact": "abs2"},
    },
    "ma_ball_n2": {
        "domain": {"n": "2", "h": "0.25"},
        "time": {"T": "0.25", "M": "32"},
        "operator": {"k": "2"},
        "data": dict(_MANUFACTURED),
    },
    "laplace_n2": {
        "domain": {"n": "2", "h": "0.25"},
        "time": {"T": "0.25", "M": "32"},
        "operator": {"k": "1"},
        "data": dict(_MANUFACTURED),
    },
    "degenerate_g_n1": {
        "domain": {"n": "1", "h": "0.25"},
        "time": {"T": "0.25", "M": "32"},
        "operator": {"k": "1"},
        "data": {"g": "0", "G": "0", "phi": "0", "u0": "0", "exact": "0"},
    },
    "manufactured_n1": {
        "domain": {"n": "1", "h": "0.25"},
        "time": {"T": "0.25", "M": "8"},
        "operator": {"k": "1"},
        "data": dict(_MANUFACTURED),
    },
    "exp_growth_n1": {
        "domain": {"n": "1", "h": "0.25"},
        "time": {"T": "0.25", "M": "8"},
        "operator": {"k": "1"},
        "data": dict(_EXP_GROWTH),
    },
    "exp_growth_n2": {
        "domain": {"n": "2", "h": "0.5"},
        "time": {"T": "0.25", "M": "2"},
        "operator": {"k": "2"},
        "data": dict(_EXP_GROWTH),
    },
}


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keys are case-sensitive (R, T, M, G)
    return cp


def preset_sections(name: str) -> dict[str, dict[str, str]]:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return {s: dict(v) for s, v in PRESETS[name].items()}


def read_config(path) -> dict[str, dict[str, str]]:
    """Parse an INI file into plain section dictionaries."""
    cp = _parser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config {path}: {exc}") from None
    unknown = set(cp.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigurationError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    return {s: dict(cp[s]) for s in cp.sections()}


def resolve(sections: dict[str, dict[str, str]]) -> dict[str, dict]:
    """Materialise every default; values are typed and solver keys checked."""
    out: dict[str, dict] = {}
    for s in ("domain", "time", "operator"):
        given = dict(sections.get(s, {}))
        unknown = set(given) - set(DEFAULTS[s])
        if unknown:
            raise ConfigurationError(f"unknown key(s) in [{s}]: {', '.join(sorted(unknown))}")
        out[s] = {**DEFAULTS[s], **given}
    try:
        dom = out["domain"]
        out["domain"] = {"n": int(dom["n"]), "R": float(dom["R"]), "a": float(dom["a"]),
                         "h": float(dom["h"]), "boundary_mode": dom["boundary_mode"]}
        out["time"] = {"T": float(out["time"]["T"]), "M": int(out["time"]["M"])}
        out["operator"] = {"kind": out["operator"]["kind"], "k": int(out["operator"]["k"])}
    except ValueError as exc:
        raise ConfigurationError(f"bad numeric value: {exc}") from None
    if out["operator"]["kind"] != "sigma_k_root":
        raise ConfigurationError(f"[operator] kind must be sigma_k_root, got {out['operator']['kind']!r}")
    data = dict(sections.get("data", {}))
    missing = [k for k in ("g", "G", "phi", "u0") if k not in data]
    if missing:
        raise ConfigurationError(f"[data] is missing {', '.join(missing)}")
    unknown = set(data) - {"g", "G", "phi", "u0", "exact"}
    if unknown:
        raise ConfigurationError(f"unknown key(s) in [data]: {', '.join(sorted(unknown))}")
    out["data"] = data
    out["solver"] = _solver_dict(sections.get("solver", {}))
    return out


def _solver_dict(given: dict[str, str]) -> dict:
    fields = {f.name: f for f in dataclasses.fields(SolverConfig)}
    unknown = set(given) - set(fields)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in [solver]: {', '.join(sorted(unknown))}")
    values = SolverConfig().to_dict()
    for key, raw in given.items():
        default = values[key]
        try:
            if key == "dt_initial":
                values[key] = None if raw.strip().lower() in ("", "none") else float(raw)
            elif isinstance(default, bool):
                values[key] = raw.strip().lower() in ("1", "true", "yes", "on")
            elif isinstance(default, int):
                values[key] = int(raw)
            elif isinstance(default, float):
                values[key] = float(raw)
            else:
                values[key] = raw.strip()
        except ValueError:
            raise ConfigurationError(f"[solver] {key}: cannot parse {raw!r}") from None
    try:
        SolverConfig(**values)
    except ValueError as exc:
        raise ConfigurationError(f"[solver] {exc}") from None
    return values


def build_problem(resolved: dict[str, dict], name: str = "problem") -> tuple[ProblemSpec, SolverConfig]:
    """Construct the problem and solver configuration from resolved sections."""
    dom, tm, op_s, data = resolved["domain"], resolved["time"], resolved["operator"], resolved["data"]
    n, k = dom["n"], op_s["k"]
    if n < 1 or not 1 <= k <= n:
        raise ConfigurationError(f"need n >= 1 and 1 <= k <= n, got n={n}, k={k}")
    op = sigma_k_root(n, k)
    f1 = op.one()
    domain = make_ball_domain(n, dom["R"], dom["a"], dom["h"])
    try:
        funcs = {
            "g": compile_data(data["g"], n, "z", f1),
            "u0": compile_data(data["u0"], n, "z", f1),
            "phi": compile_data(data["phi"], n, "tz", f1),
            "G": compile_data(data["G"], n, "tzr", f1),
        }
        exact = compile_data(data["exact"], n, "tz", f1) if data.get("exact") else None
    except ExpressionError as exc:
        raise ConfigurationError(f"[data] {exc}") from None
    problem = ProblemSpec(domain, TimeGrid(tm["T"], tm["M"]), op, funcs["G"], funcs["g"], funcs["phi"],
                          funcs["u0"], boundary_mode=dom["boundary_mode"], exact=exact, name=name)
    return problem, SolverConfig(**resolved["solver"])


def load(path=None, preset: str | None = None) -> tuple[dict, str]:
    """Sections from a preset, overlaid by a config file when both are given."""
    if path is None and preset is None:
        raise ConfigurationError("give --config or --preset")
    sections = preset_sections(preset) if preset else {}
    if path is not None:
        for s, v in read_config(path).items():
            sections.setdefault(s, {}).update(v)
    name = preset or Path(path).stem
    return sections, name


def write_config(sections: dict[str, dict], path) -> None:
    cp = _parser()
    for s in SECTIONS:
        if s in sections:
            cp[s] = {k: "none" if v is None else str(v) for k, v in sections[s].items()}
    with open(path, "w") as fh:
        cp.write(fh)
