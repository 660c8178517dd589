"""Batch command line: solve, verify, convergence and selftest.

Exit codes: 0 success, 1 configuration or I/O error, 2 a certificate or
check failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .audit import audit_comparisons, audit_convolutions
from .barriers import BarrierError, build_subbarrier, build_superbarrier
from .config import PRESETS, build_problem, load, resolve, write_config
from .grid_domain import ConfigurationError, GridMismatchError, read_field_csv, write_field_csv
from .hessian_core import ConeSpec, SymOpSpec, check_operator_axioms, sigma_k_root
from .solver import SCHEMES, SolverConfig, SolverError, solve
from .verify import (check_admissible, check_comparison, check_gamma_sh_all, check_subsolution,
                     check_supersolution, derive_witness)

log = logging.getLogger("parahess")

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2
CHECKS = ("subsolution", "supersolution", "gamma_sh", "comparison_sub", "comparison_super", "admissible")


class UsageError(Exception):
    """Bad command line arguments (exit 1)."""


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def atomic_write(path: Path, writer) -> None:
    """Write via ``writer(tmp_path)`` into the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, data) -> None:
    def w(tmp):
        with open(tmp, "w") as fh:
            json.dump(jsonable(data), fh, indent=2, sort_keys=True)
            fh.write("\n")
    atomic_write(path, w)


def write_text(path: Path, text: str) -> None:
    def w(tmp):
        with open(tmp, "w") as fh:
            fh.write(text)
    atomic_write(path, w)


def _manifest(args, subcommand: str, resolved: dict | None, outputs: dict, wall: float) -> dict:
    return {
        "subcommand": subcommand,
        "version": __version__,
        "seed": args.seed,
        "config": resolved,
        "inputs": {"config": args.config, "preset": args.preset,
                   **({"field": args.field} if getattr(args, "field", None) else {})},
        "outputs": outputs,
        "wall_seconds": wall,
        "argv": args.argv,
    }


def _load_problem(args, name_suffix: str = ""):
    sections, name = load(args.config, args.preset)
    if getattr(args, "scheme", None):
        sections.setdefault("solver", {})["scheme"] = args.scheme
    resolved = resolve(sections)
    problem, config = build_problem(resolved, name + name_suffix)
    problem.validate(seed=args.seed)
    return problem, config, resolved


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    start = time.perf_counter()
    problem, config, resolved = _load_problem(args)
    out = Path(args.out)
    result = solve(problem, config)
    diagnostics = dict(result.diagnostics)
    wall = diagnostics.pop("wall_seconds", None)
    certs = {k: v.to_dict() for k, v in result.certificates.items()}
    passed = result.passed
    if result.other is not None:
        certs = {"perron": certs, "explicit": {k: v.to_dict() for k, v in result.other.certificates.items()}}
        passed = passed and result.other.passed
    diagnostics["scheme"] = result.scheme
    diagnostics["dt_history"] = diagnostics.get("dt_history", [])
    diagnostics["residual_sup"] = diagnostics.get("residual_sup", [])
    files = {"solution": out / "solution.csv", "diagnostics": out / "diagnostics.json",
             "certificates": out / "certificates.json", "config": out / "config.ini"}
    atomic_write(files["solution"], lambda tmp: write_field_csv(result.field, tmp))
    if result.other is not None:
        files["solution_explicit"] = out / "solution_explicit.csv"
        atomic_write(files["solution_explicit"], lambda tmp: write_field_csv(result.other.field, tmp))
    write_json(files["diagnostics"], diagnostics)
    write_json(files["certificates"], certs)
    atomic_write(files["config"], lambda tmp: write_config(resolved, tmp))
    for name, rep in result.certificates.items():
        print(f"{result.scheme} {name}: {rep.summary()}")
    if result.other is not None:
        for name, rep in result.other.certificates.items():
            print(f"{result.other.scheme} {name}: {rep.summary()}")
        print(f"cross_gap {diagnostics['cross_gap']:.3e}")
    write_json(out / "manifest.json",
               _manifest(args, "solve", resolved, {k: str(v) for k, v in files.items()},
                         wall if wall is not None else time.perf_counter() - start))
    return EXIT_OK if passed else EXIT_CHECK


def _parse_checks(text: str | None) -> list[str]:
    if not text:
        return list(CHECKS)
    names = [c.strip() for c in text.split(",") if c.strip()]
    unknown = [c for c in names if c not in CHECKS]
    if unknown:
        raise UsageError(f"unknown check(s): {', '.join(unknown)}; available: {', '.join(CHECKS)}")
    return names


def cmd_verify(args) -> int:
    start = time.perf_counter()
    checks = _parse_checks(args.checks)
    if not args.field:
        raise UsageError("verify needs --field PATH")
    problem, config, resolved = _load_problem(args)
    try:
        field = read_field_csv(args.field, problem.domain)
    except OSError as exc:
        raise ConfigurationError(f"cannot read field {args.field}: {exc}") from None
    if len(field.times) != len(problem.times) or \
            not np.allclose(field.times, problem.times, rtol=0, atol=1e-12 * (1 + problem.time.T)):
        raise GridMismatchError("field time nodes differ from the configured time grid")
    tol = args.tol if args.tol is not None else config.tol_residual
    barriers = {}

    def barrier(side):
        if side not in barriers:
            if side == "sub":
                barriers[side] = build_subbarrier(problem, config.barrier_epsilon, config.tol_residual,
                                                  config.eps_g)
            else:
                barriers[side] = build_superbarrier(problem, config.barrier_epsilon, None, config.tol_residual,
                                                    config.eps_g, config.tol_harmonic)
        return barriers[side].field

    reports = {}
    for name in checks:
        if name == "subsolution":
            reports[name] = check_subsolution(problem, field, tol, config.eps_g)
        elif name == "supersolution":
            reports[name] = check_supersolution(problem, field, tol, config.eps_g)
        elif name == "gamma_sh":
            reports[name] = check_gamma_sh_all(field, problem.cone)
        elif name == "comparison_sub":
            reports[name] = check_comparison(barrier("sub"), field, 1e-8)
        elif name == "comparison_super":
            reports[name] = check_comparison(field, barrier("super"), 1e-8)
        elif name == "admissible":
            w = derive_witness(problem, config.barrier_epsilon)
            reports[name] = check_admissible(problem.u0_nodes, problem.g_nodes, w, problem.domain, problem.op)
    for name, rep in reports.items():
        print(f"{name}: {rep.summary()}")
    out = Path(args.out)
    write_json(out / "verify.json", {k: v.to_dict() for k, v in reports.items()})
    write_json(out / "manifest.json", _manifest(args, "verify", resolved, {"reports": str(out / "verify.json")},
                                                time.perf_counter() - start))
    return EXIT_OK if all(r.passed for r in reports.values()) else EXIT_CHECK


def convergence_levels(resolved: dict, levels: int) -> list[dict]:
    """Resolved configs with h halved and dt quartered (dt ~ h^2) per level.

    eps_g and tol_residual shrink like h^2 so that neither the mollification
    nor the solver tolerance dominates the discretisation error.
    """
    out = []
    for level in range(levels):
        r = json.loads(json.dumps(resolved))
        r["domain"]["h"] = resolved["domain"]["h"] / 2**level
        r["time"]["M"] = resolved["time"]["M"] * 4**level
        r["solver"]["eps_g"] = resolved["solver"]["eps_g"] / 4**level
        r["solver"]["tol_residual"] = resolved["solver"]["tol_residual"] / 4**level
        out.append(r)
    return out


def cmd_convergence(args) -> int:
    start = time.perf_counter()
    if args.levels is None or args.levels < 2:
        raise UsageError("convergence needs --levels L with L >= 2")
    sections, name = load(args.config, args.preset)
    if args.scheme:
        sections.setdefault("solver", {})["scheme"] = args.scheme
    resolved = resolve(sections)
    if not resolved["data"].get("exact"):
        raise ConfigurationError("[data] exact is required for a convergence study")
    rows = []
    status = EXIT_OK
    out = Path(args.out)
    header = "level,h,dt,max_err,order,max_err_perron,max_err_explicit\n"
    for level, res in enumerate(convergence_levels(resolved, args.levels)):
        problem, config = build_problem(res, f"{name}-L{level}")
        try:
            problem.validate(seed=args.seed)
            result = solve(problem, config)
        except (SolverError, BarrierError) as exc:
            print(f"level {level} failed: {exc}", file=sys.stderr)
            status = EXIT_CHECK
            break
        d = problem.domain.defined
        exact = np.stack([problem.domain.evaluate(problem.exact, t) for t in problem.times])

        def err(r):
            return float(np.max(np.abs(r.field.values[:, d] - exact[:, d])))

        errs = {result.scheme: err(result)}
        if result.other is not None:
            errs[result.other.scheme] = err(result.other)
        if not (result.passed and (result.other is None or result.other.passed)):
            status = EXIT_CHECK
        e = max(errs.values())
        order = ""
        if rows:
            prev = rows[-1]["max_err"]
            order = math.log2(prev / e) if e > 0 and prev > 0 else float("nan")
        rows.append({"level": level, "h": problem.domain.h, "dt": problem.time.dt, "max_err": e,
                     "order": order, "perron": errs.get("perron", ""), "explicit": errs.get("explicit", "")})
        print(f"level {level} h={problem.domain.h:g} dt={problem.time.dt:g} max_err={e:.3e}"
              + (f" order={order:.3f}" if order != "" else ""))

    def fmt(v):
        return "" if v == "" else f"{v:.17g}"

    text = header + "".join(f"{r['level']},{fmt(r['h'])},{fmt(r['dt'])},{fmt(r['max_err'])},{fmt(r['order'])},"
                            f"{fmt(r['perron'])},{fmt(r['explicit'])}\n" for r in rows)
    write_text(out / "convergence.csv", text)
    write_json(out / "manifest.json", _manifest(args, "convergence", resolved,
                                                {"table": str(out / "convergence.csv")},
                                                time.perf_counter() - start) | {"levels": args.levels})
    return status


def bad_operator(n: int = 2) -> SymOpSpec:
    """Built-in adversarial fixture: f = sigma_1^2 is not concave-homogeneous of degree one."""
    return SymOpSpec(ConeSpec(n, 1), kind="custom", func=lambda x: np.sum(x, axis=-1) ** 2,
                     declared_axioms=("homogeneous",))


def cmd_selftest(args) -> int:
    seed = args.seed
    lines = []
    ok = True
    ops = [bad_operator()] if args.adversarial else [sigma_k_root(n, k) for n, k in ((2, 1), (2, 2), (3, 2), (3, 3))]
    for op in ops:
        rep = check_operator_axioms(op, samples=500, seed=seed)
        name = f"sigma_{op.k}^(1/{op.k}) n={op.n}" if op.kind == "sigma_k_root" else "adversarial fixture"
        failed = rep.failed_axioms()
        lines.append(f"{'PASS' if rep.passed else 'FAIL'} operator axioms [{name}]"
                     + (f": failed {', '.join(failed)}" if failed else ""))
        ok &= rep.passed
    if not args.adversarial:
        conv = audit_convolutions(fields=20, seed=seed)
        lines.append(conv.line())
        ok &= conv.passed
        comp = audit_comparisons(problems=3, seed=seed, solve_pairs=True)
        lines.append(comp.line())
        ok &= comp.passed
        stationary = build_problem(resolve({k: dict(v) for k, v in PRESETS["stationary_n1"].items()}))[0]
        sub = build_subbarrier(stationary, 0.1)
        sup = build_superbarrier(stationary, 0.1)
        good = sub.certificate.passed and sup.certificate.passed
        lines.append(f"{'PASS' if good else 'FAIL'} barrier certificates: "
                     f"{sub.certificate.summary()}; {sup.certificate.summary()}")
        ok &= good
    for line in lines:
        print(line)
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI problem configuration")
    common.add_argument("--preset", help=f"bundled problem: {', '.join(sorted(PRESETS))}")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    p = argparse.ArgumentParser(prog="parahess", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", parents=[common], help="solve a problem and certify the result")
    s.add_argument("--scheme", choices=SCHEMES)
    v = sub.add_parser("verify", parents=[common], help="run checks on a field CSV")
    v.add_argument("--field", help="field CSV to check")
    v.add_argument("--checks", help=f"comma-separated subset of {','.join(CHECKS)} (default: all)")
    v.add_argument("--tol", type=float, help="residual tolerance (default: solver tol_residual)")
    c = sub.add_parser("convergence", parents=[common], help="refinement study against [data] exact")
    c.add_argument("--levels", type=int, help="number of levels L >= 2")
    c.add_argument("--scheme", choices=SCHEMES)
    t = sub.add_parser("selftest", parents=[common], help="run the invariant suites at small sizes")
    t.add_argument("--adversarial", action="store_true", help="audit a deliberately invalid operator")
    return p


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "convergence": cmd_convergence, "selftest": cmd_selftest}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    args.argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigurationError, GridMismatchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, BarrierError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
