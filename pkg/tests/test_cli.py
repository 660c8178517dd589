import json
import os
import subprocess
import sys

import numpy as np
import pytest

from parahess.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, bad_operator, convergence_levels, jsonable, main
from parahess.config import preset_sections, resolve
from parahess.grid_domain import read_field_csv, write_field_csv
from parahess.hessian_core import check_operator_axioms


def run(tmp_path, *argv):
    return main(list(argv) + ["--out", str(tmp_path)])


def test_solve_preset_writes_outputs(tmp_path, capsys):
    assert run(tmp_path, "solve", "--preset", "manufactured_n1") == EXIT_OK
    for name in ("solution.csv", "solution_explicit.csv", "diagnostics.json", "certificates.json",
                 "config.ini", "manifest.json"):
        assert (tmp_path / name).exists(), name
    certs = json.loads((tmp_path / "certificates.json").read_text())
    assert set(certs) == {"perron", "explicit"}
    assert all(c["pass"] for c in certs["perron"].values())
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["subcommand"] == "solve" and "wall_seconds" in man
    out = capsys.readouterr().out
    assert "perron" in out and "cross_gap" in out
    assert (tmp_path / "solution.csv").stat().st_mode & 0o044


def test_solve_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "solve", "--preset", "manufactured_n1", "--scheme", "perron") == EXIT_OK
    assert run(b, "solve", "--preset", "manufactured_n1", "--scheme", "perron") == EXIT_OK
    assert (a / "solution.csv").read_bytes() == (b / "solution.csv").read_bytes()
    assert (a / "certificates.json").read_bytes() == (b / "certificates.json").read_bytes()


def test_solve_from_written_config_reproduces(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "solve", "--preset", "manufactured_n1", "--scheme", "explicit") == EXIT_OK
    assert run(b, "solve", "--config", str(a / "config.ini")) == EXIT_OK
    assert (a / "solution.csv").read_bytes() == (b / "solution.csv").read_bytes()


def test_verify_round_trip_and_failure(tmp_path):
    assert run(tmp_path, "solve", "--preset", "manufactured_n1", "--scheme", "perron") == EXIT_OK
    field = tmp_path / "solution.csv"
    assert run(tmp_path / "v", "verify", "--preset", "manufactured_n1", "--field", str(field)) == EXIT_OK
    rep = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert set(rep) == {"subsolution", "supersolution", "gamma_sh", "comparison_sub", "comparison_super",
                        "admissible"}
    # perturb one interior value upward: the subsolution check must fail
    from parahess.config import build_problem
    problem, _ = build_problem(resolve(preset_sections("manufactured_n1")))
    u = read_field_csv(field, problem.domain)
    u.values[3, problem.domain.index_of((0.0, 0.0))] += 0.05
    write_field_csv(u, tmp_path / "bad.csv")
    code = run(tmp_path / "w", "verify", "--preset", "manufactured_n1", "--field", str(tmp_path / "bad.csv"),
               "--checks", "subsolution")
    assert code == EXIT_CHECK
    rep = json.loads((tmp_path / "w" / "verify.json").read_text())
    assert rep["subsolution"]["worst"]["z"] == [0.0, 0.0]


def test_verify_grid_mismatch_and_usage(tmp_path):
    assert run(tmp_path, "solve", "--preset", "manufactured_n1", "--scheme", "explicit") == EXIT_OK
    field = str(tmp_path / "solution.csv")
    assert run(tmp_path / "v", "verify", "--preset", "stationary_n1", "--field", field) == EXIT_CONFIG
    assert run(tmp_path / "v", "verify", "--preset", "manufactured_n1") == EXIT_CONFIG
    assert run(tmp_path / "v", "verify", "--preset", "manufactured_n1", "--field", field,
               "--checks", "bogus") == EXIT_CONFIG


def test_config_errors_exit_1(tmp_path):
    assert run(tmp_path, "solve") == EXIT_CONFIG
    assert run(tmp_path, "solve", "--preset", "nope") == EXIT_CONFIG
    bad = tmp_path / "bad.ini"
    bad.write_text("[domain]\na = 1.0\n[data]\ng = 1\nG = 0\nphi = abs2\nu0 = abs2\n")
    assert run(tmp_path, "solve", "--config", str(bad)) == EXIT_CONFIG
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert main(["--version"]) == EXIT_OK


def test_inadmissible_data_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[domain]\nh = 0.5\n[time]\nM = 2\n[data]\ng = 0\nG = 0\nphi = abs2\nu0 = abs2\n")
    assert run(tmp_path, "solve", "--config", str(cfg)) == EXIT_CHECK
    assert "admissible" in capsys.readouterr().err


def test_convergence_table(tmp_path):
    assert run(tmp_path, "convergence", "--preset", "exp_growth_n1", "--levels", "2") == EXIT_OK
    lines = (tmp_path / "convergence.csv").read_text().splitlines()
    assert lines[0] == "level,h,dt,max_err,order,max_err_perron,max_err_explicit"
    assert len(lines) == 3
    order = float(lines[2].split(",")[4])
    assert order > 1.0
    assert run(tmp_path, "convergence", "--preset", "exp_growth_n1", "--levels", "1") == EXIT_CONFIG
    nofit = tmp_path / "c.ini"
    nofit.write_text("[data]\ng = 1\nG = 0\nphi = abs2\nu0 = abs2\n")
    assert run(tmp_path, "convergence", "--config", str(nofit), "--levels", "2") == EXIT_CONFIG


def test_convergence_levels_scale():
    r = resolve(preset_sections("manufactured_n1"))
    lv = convergence_levels(r, 3)
    assert [x["domain"]["h"] for x in lv] == [0.25, 0.125, 0.0625]
    assert [x["time"]["M"] for x in lv] == [8, 32, 128]
    assert lv[2]["solver"]["tol_residual"] == pytest.approx(r["solver"]["tol_residual"] / 16)


def test_selftest(tmp_path, capsys):
    assert run(tmp_path, "selftest") == EXIT_OK
    first = capsys.readouterr().out
    assert "FAIL" not in first
    assert run(tmp_path, "selftest") == EXIT_OK
    assert capsys.readouterr().out == first


def test_selftest_adversarial(tmp_path):
    assert run(tmp_path, "selftest", "--adversarial") == EXIT_CHECK


def test_bad_operator_fails_axioms():
    rep = check_operator_axioms(bad_operator(), samples=200, seed=0)
    assert {"homogeneity", "concavity"} & set(rep.failed_axioms())


def test_jsonable():
    assert jsonable({"a": np.float64(1.5), "b": np.arange(2), "c": float("inf")}) == \
        {"a": 1.5, "b": [0, 1], "c": "inf"}


def test_module_entry_point(tmp_path):
    env = dict(os.environ)
    proc = subprocess.run([sys.executable, "-m", "parahess", "solve", "--preset", "exp_growth_n2",
                           "--out", str(tmp_path)], capture_output=True, text=True, env=env, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "solution.csv").exists()
