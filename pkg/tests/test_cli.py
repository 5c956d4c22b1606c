from pathlib import Path

import pytest

from pmfrontier import io
from pmfrontier.cli import EXIT_CHECKS, EXIT_CONFIG, EXIT_ERROR, EXIT_OK, main

CONFIGS = Path(__file__).parent.parent / "configs"

BARRIERS = """\
[run]
experiment = barriers
output_dir = {out}

[geometry]
h = 0.02
extent = 20

[lv]
t_end = 50
"""

SMALL_DOMAIN = """\
[run]
experiment = simulate
output_dir = {out}

[geometry]
h = 0.1
extent = 3

[solver]
t_end = 20
snapshot_dt = 1
"""


def write(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text.format(out=tmp_path / "out"), encoding="utf-8")
    return str(p)


def test_validate_ok(tmp_path, capsys):
    assert main(["validate", write(tmp_path, BARRIERS)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("ok: barriers")


def test_validate_canonical_round_trip(tmp_path, capsys):
    main(["validate", "--canonical", write(tmp_path, BARRIERS)])
    canonical = capsys.readouterr().out.split("\n", 1)[1]
    p = tmp_path / "canon.cfg"
    p.write_text(canonical, encoding="utf-8")
    main(["validate", "--canonical", str(p)])
    assert capsys.readouterr().out.split("\n", 1)[1] == canonical


def test_config_error_exit_code(tmp_path, capsys):
    bad = BARRIERS + "\n[initial]\nbetaO = 0.1\n"
    assert main(["run", write(tmp_path, bad)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "line 13: betaO: unknown key" in err


def test_barriers_experiment(tmp_path, capsys):
    assert main(["run", write(tmp_path, BARRIERS)]) == EXIT_OK
    d = tmp_path / "out" / "barriers"
    series = io.read_csv(d / "series.csv")
    bands = io.read_csv(d / "bands.csv")
    assert series["t"][-1] == 50.0
    assert {"beta_low", "beta_high", "gap_low", "gap_high"} <= set(bands)
    assert io.read_report(d / "report.txt")["status"] == "pass"
    assert (tmp_path / "out" / "config.txt").exists()
    assert "PASS barriers.band.beta" in capsys.readouterr().out


def test_artifacts_are_deterministic(tmp_path):
    cfg = write(tmp_path, BARRIERS)
    main(["run", cfg])
    first = (tmp_path / "out" / "barriers" / "series.csv").read_bytes()
    main(["run", cfg])
    assert (tmp_path / "out" / "barriers" / "series.csv").read_bytes() == first


def test_guard_band_breach_is_reported(tmp_path, capsys):
    assert main(["run", write(tmp_path, SMALL_DOMAIN)]) == EXIT_ERROR
    failure = io.read_report(tmp_path / "out" / "simulate" / "failure.txt")
    assert failure["error_type"] == "DomainTooSmall"
    assert failure["message"].startswith("domain too small")
    assert main(["report", str(tmp_path / "out")]) == EXIT_ERROR


def test_output_dir_override(tmp_path, monkeypatch):
    monkeypatch.setenv("PMFRONTIER_OUT", str(tmp_path / "elsewhere"))
    assert main(["run", write(tmp_path, BARRIERS)]) == EXIT_OK
    assert (tmp_path / "elsewhere" / "barriers" / "summary.txt").exists()
    assert not (tmp_path / "out").exists()


def test_parallel_jobs(tmp_path):
    text = BARRIERS.replace("experiment = barriers", "experiment = barriers, simulate") + "\n[solver]\nt_end = 1\n"
    assert main(["run", "--jobs", "2", write(tmp_path, text)]) == EXIT_OK
    assert (tmp_path / "out" / "simulate" / "front.csv").exists()
    assert (tmp_path / "out" / "barriers" / "bands.csv").exists()


def test_pme_config(tmp_path, monkeypatch):
    monkeypatch.setenv("PMFRONTIER_OUT", str(tmp_path / "pme"))
    assert main(["run", str(CONFIGS / "pme.cfg")]) == EXIT_OK
    rep = io.read_report(tmp_path / "pme" / "pme-converge" / "report.txt")
    assert float(rep["l1_order_0"]) >= 0.9


def test_sandwich_sub_standard_resolution(tmp_path, monkeypatch, capsys):
    text = (CONFIGS / "standard.cfg").read_text(encoding="utf-8")
    text = text.replace("sandwich-sub, frontier-diag", "sandwich-sub").replace("refine = true", "refine = false")
    monkeypatch.setenv("PMFRONTIER_OUT", str(tmp_path / "std"))
    assert main(["run", write(tmp_path, text)]) == EXIT_OK
    d = tmp_path / "std" / "sandwich-sub"
    rep = io.read_report(d / "report.txt")
    assert rep["kind"] == "sub" and float(rep["max_upper_violation"]) <= 1e-9
    assert "lower_violation" in io.read_csv(d / "series.csv")
    assert main(["report", str(tmp_path / "std")]) == EXIT_OK


def test_failed_check_exit_code(tmp_path):
    # an exponent tolerance no trajectory can meet
    text = BARRIERS.replace("t_end = 50", "t_end = 10000\ndt = 0.01") + "\n[checks]\nlv_exponent_tol = 1e-9\n"
    assert main(["run", write(tmp_path, text)]) == EXIT_CHECKS
    summary = (tmp_path / "out" / "barriers" / "summary.txt").read_text(encoding="utf-8")
    assert "FAIL barrier_decay_exponent" in summary


def test_help_lists_experiments(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    assert "frontier-diag" in out and "roundoff_floor" in out
