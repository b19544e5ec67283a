from __future__ import annotations

import json

import pytest

from src.cli import EXIT_DEGENERATE, EXIT_INPUT, EXIT_OK, main
from src.excel_io import load_named_table

# constant variance: both gate moments vanish exactly
FLAT_ROWS = [(0.01, 0.5), (-0.02, 0.5), (0.03, 0.5)]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write_series(path, rows, header="# delta_t=0.004,v0=0.04"):
    body = "\n".join(f"{i},{x},{v}" for i, (x, v) in enumerate(rows, start=1))
    path.write_text(f"{header}\ni,x,v\n{body}\n", encoding="utf-8")
    return path


def test_simulate_is_deterministic(tmp_path, capsys, daily_config_file):
    config = daily_config_file(n=300)
    code_a, out_a, _ = run(capsys, "simulate", "--config", config, "--out", tmp_path / "a.csv", "--seed", 11)
    code_b, _, _ = run(capsys, "simulate", "--config", config, "--out", tmp_path / "b.csv", "--seed", 11)
    assert code_a == code_b == EXIT_OK
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    payload = json.loads(out_a)
    assert payload["n"] == 300 and payload["seed"] == 11


def test_simulate_then_estimate(tmp_path, capsys, daily_config_file):
    config = daily_config_file(n=8000, seed=123)
    assert run(capsys, "simulate", "--config", config, "--out", tmp_path / "path.csv")[0] == EXIT_OK
    code, out, _ = run(capsys, "estimate", tmp_path / "path.csv", "--model", "gamma_ou")
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["status"] == "ok"
    assert payload["parametrization"] == "gamma_ou"
    assert set(payload["named_params"]) == {"nu", "alpha", "lambda", "mu", "beta", "rho"}


def test_missing_config_key_exits_with_input_error(tmp_path, capsys, daily_config_file):
    code, out, err = run(
        capsys, "simulate", "--config", daily_config_file(beta=None), "--out", tmp_path / "x.csv", "--seed", 1
    )
    assert code == EXIT_INPUT
    assert "'beta'" in err
    assert out == ""


def test_missing_length_is_named(tmp_path, capsys, daily_config_file):
    code, _, err = run(capsys, "simulate", "--config", daily_config_file(), "--out", tmp_path / "x.csv", "--seed", 1)
    assert code == EXIT_INPUT
    assert "'n'" in err


def test_seed_from_environment(tmp_path, capsys, monkeypatch, daily_config_file):
    monkeypatch.setenv("BNS_SEED", "42")
    code, out, _ = run(capsys, "simulate", "--config", daily_config_file(n=20), "--out", tmp_path / "x.csv")
    assert code == EXIT_OK
    assert json.loads(out)["seed"] == 42


def test_no_seed_anywhere(tmp_path, capsys, monkeypatch, daily_config_file):
    monkeypatch.delenv("BNS_SEED", raising=False)
    code, _, err = run(capsys, "simulate", "--config", daily_config_file(n=20), "--out", tmp_path / "x.csv")
    assert code == EXIT_INPUT
    assert "No seed" in err


def test_estimate_constant_variance_is_degenerate(tmp_path, capsys):
    path = write_series(tmp_path / "flat.csv", FLAT_ROWS, header="# delta_t=0.004,v0=0.5")
    code, out, err = run(capsys, "estimate", path)
    assert code == EXIT_DEGENERATE
    payload = json.loads(out)
    assert payload["status"] == "degenerate"
    assert payload["theta_hat"] is None
    assert "variance nonpositive" in payload["reasons"]


def test_estimate_zero_outside_gate(tmp_path, capsys):
    path = write_series(tmp_path / "flat.csv", FLAT_ROWS, header="# delta_t=0.004,v0=0.5")
    code, out, _ = run(capsys, "estimate", path, "--zero-outside-gate")
    assert code == EXIT_DEGENERATE
    assert set(json.loads(out)["theta_hat"].values()) == {0.0}


def test_estimate_single_observation_is_input_error(tmp_path, capsys):
    path = write_series(tmp_path / "one.csv", [(0.01, 0.04)])
    code, _, err = run(capsys, "estimate", path)
    assert code == EXIT_INPUT
    assert "n=1" in err


def test_estimate_malformed_csv(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("# delta_t=0.004,v0=0.04\ni,x\n1,0.1\n", encoding="utf-8")
    code, _, err = run(capsys, "estimate", path)
    assert code == EXIT_INPUT
    assert "'v'" in err


def test_asymptotics_report(tmp_path, capsys, daily_config_file):
    code, out, _ = run(
        capsys,
        "asymptotics",
        "--config",
        daily_config_file(),
        "--out",
        tmp_path / "asym.json",
        "--xlsx",
        tmp_path / "asym.xlsx",
    )
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["psd"] == {"upsilon": True, "sigma": True, "t_matrix": True}
    assert payload["labels"] == ["nu", "alpha", "lambda", "mu", "beta", "rho"]
    assert json.loads((tmp_path / "asym.json").read_text(encoding="utf-8")) == payload
    s_table = load_named_table(tmp_path / "asym.xlsx", "Asymptotic_S")
    assert s_table["s"].tolist() == pytest.approx(list(payload["s"].values()))
    assert list(load_named_table(tmp_path / "asym.xlsx", "Asymptotic_R").columns)[0] == "parameter"


def test_asymptotics_generic_view(capsys, daily_config_file):
    code, out, _ = run(capsys, "asymptotics", "--config", daily_config_file(), "--model", "generic")
    assert code == EXIT_OK
    assert json.loads(out)["labels"] == ["lambda", "zeta", "eta", "mu", "beta", "rho"]


def test_asymptotics_malformed_config(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"model": "gamma_ou", "nu": ', encoding="utf-8")
    code, out, _ = run(capsys, "asymptotics", "--config", path)
    assert code == EXIT_INPUT
    assert out == ""


def test_small_monte_carlo(tmp_path, capsys, daily_config_file):
    code, out, _ = run(
        capsys,
        "mc",
        "--config",
        daily_config_file(),
        "--out",
        tmp_path / "mc",
        "--seed",
        8,
        "--replications",
        4,
        "--length",
        500,
        "--bins",
        3,
        "--xlsx",
        tmp_path / "mc.xlsx",
    )
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["replications"] == 4 and payload["n"] == 500
    assert (tmp_path / "mc" / "estimates.csv").exists()
    assert (tmp_path / "mc" / "figure_histograms.gp").exists()
    assert len(load_named_table(tmp_path / "mc.xlsx", "MC_Estimates")) == 4


def test_monte_carlo_needs_replications(tmp_path, capsys, daily_config_file):
    code, _, err = run(capsys, "mc", "--config", daily_config_file(), "--out", tmp_path / "mc", "--seed", 1)
    assert code == EXIT_INPUT
    assert "'replications'" in err
