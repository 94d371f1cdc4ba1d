"""Command-line surface: argument handling, exit codes, file formats."""

import json

import numpy as np
import pytest

from groupsparse.cli import main, parse_groups, read_csv_matrix
from groupsparse.cli import CliError


@pytest.fixture
def fixture_dir(tmp_path):
    """Packaged-style example dataset written by the simulate command."""
    out = tmp_path / "sim"
    assert main(["simulate", "--experiment", "exp1", "--seed", "1",
                 "--out", str(out)]) == 0
    return out


# ------------------------------------------------------------
# helpers
# ------------------------------------------------------------

def test_read_csv_reports_line_numbers(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2\n3,x\n")
    with pytest.raises(CliError, match="line 2"):
        read_csv_matrix(str(p))
    p.write_text("1,2\n3\n")
    with pytest.raises(CliError, match="ragged CSV at line 2"):
        read_csv_matrix(str(p))
    p.write_text("")
    with pytest.raises(CliError, match="empty"):
        read_csv_matrix(str(p))


def test_parse_groups():
    assert parse_groups("2,3", 5) == [2, 3]
    assert parse_groups("4", 12) == [4, 4, 4]
    assert parse_groups("5", 5) == [5]
    with pytest.raises(CliError):
        parse_groups("3", 10)
    with pytest.raises(CliError):
        parse_groups("2,2", 5)
    with pytest.raises(CliError):
        parse_groups("a,b", 2)


# ------------------------------------------------------------
# simulate
# ------------------------------------------------------------

def test_simulate_writes_consistent_files(fixture_dir):
    G = read_csv_matrix(str(fixture_dir / "G.csv"))
    y = read_csv_matrix(str(fixture_dir / "y.csv"))
    theta = read_csv_matrix(str(fixture_dir / "theta.csv"))
    meta = json.loads((fixture_dir / "meta.json").read_text())
    assert G.shape == (100, 40) and y.shape == (100, 1)
    assert theta.shape == (40, 1)
    assert meta["groups"] == [4] * 10 and meta["sigma2_true"] > 0


# ------------------------------------------------------------
# fit
# ------------------------------------------------------------

def test_fit_hgla_on_fixture(fixture_dir, tmp_path):
    out = tmp_path / "fit.json"
    code = main(["fit", "--method", "hgla",
                 "--data-y", str(fixture_dir / "y.csv"),
                 "--data-g", str(fixture_dir / "G.csv"),
                 "--groups", "4", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["selected"]                      # nonempty selection
    assert len(doc["theta"]) == 40
    assert doc["diagnostics"]["converged"] is True


def test_fit_mkl_rejects_nonpositive_gamma(fixture_dir, capsys):
    code = main(["fit", "--method", "mkl",
                 "--data-y", str(fixture_dir / "y.csv"),
                 "--data-g", str(fixture_dir / "G.csv"),
                 "--groups", "4", "--gamma", "0"])
    assert code == 2
    assert "positive gamma" in capsys.readouterr().err


def test_fit_zero_data_gives_zero_estimate(tmp_path, capsys):
    rng = np.random.default_rng(0)
    G = rng.standard_normal((20, 4))
    np.savetxt(tmp_path / "G.csv", G, delimiter=",")
    np.savetxt(tmp_path / "y.csv", np.zeros((20, 1)), delimiter=",")
    out = tmp_path / "fit.json"
    code = main(["fit", "--method", "mkl", "--data-y", str(tmp_path / "y.csv"),
                 "--data-g", str(tmp_path / "G.csv"), "--groups", "2",
                 "--sigma2", "1.0", "--gamma", "0.5", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert all(t == 0.0 for t in doc["theta"])
    assert all(l == 0.0 for l in doc["lambda"])


def test_fit_dimension_mismatch_exits_2(fixture_dir, tmp_path, capsys):
    np.savetxt(tmp_path / "y.csv", np.zeros((7, 1)), delimiter=",")
    code = main(["fit", "--method", "hgla", "--data-y", str(tmp_path / "y.csv"),
                 "--data-g", str(fixture_dir / "G.csv"), "--groups", "4"])
    assert code == 2


def test_fit_unknown_method_exits_2(fixture_dir):
    code = main(["fit", "--method", "bogus",
                 "--data-y", str(fixture_dir / "y.csv"),
                 "--data-g", str(fixture_dir / "G.csv"), "--groups", "4"])
    assert code == 2


def test_fit_wide_design_requires_sigma2(tmp_path):
    rng = np.random.default_rng(0)
    np.savetxt(tmp_path / "G.csv", rng.standard_normal((4, 6)), delimiter=",")
    np.savetxt(tmp_path / "y.csv", np.zeros((4, 1)), delimiter=",")
    code = main(["fit", "--method", "mkl", "--data-y", str(tmp_path / "y.csv"),
                 "--data-g", str(tmp_path / "G.csv"), "--groups", "3",
                 "--gamma", "1.0"])
    assert code == 2


# ------------------------------------------------------------
# benchmark
# ------------------------------------------------------------

def test_benchmark_smoke_and_determinism(tmp_path, capsys):
    args = ["benchmark", "--experiment", "exp1", "--runs", "2", "--seed", "7",
            "--estimators", "oracle", "--out", str(tmp_path / "rep")]
    assert main(args) == 0
    out1 = capsys.readouterr().out
    assert main(args) == 0
    out2 = capsys.readouterr().out
    assert out1 == out2
    assert "oracle" in out1
    doc = json.loads((tmp_path / "rep.json").read_text())
    assert len(doc["per_run"]) == 2
    assert (tmp_path / "rep.csv").exists()


def test_benchmark_zero_runs_exits_2(capsys):
    assert main(["benchmark", "--runs", "0", "--estimators", "oracle"]) == 2


def test_benchmark_unknown_estimator_exits_2(capsys):
    assert main(["benchmark", "--runs", "1", "--estimators", "bogus"]) == 2
    assert "registry" in capsys.readouterr().err


# ------------------------------------------------------------
# arx
# ------------------------------------------------------------

@pytest.fixture
def arx_csv(tmp_path):
    from groupsparse import gen_arx_series
    s = gen_arx_series(T=400, seed=4)
    p = tmp_path / "series.csv"
    np.savetxt(p, s, delimiter=",")
    return p


def test_arx_end_to_end(arx_csv, tmp_path, capsys):
    out = tmp_path / "arx"
    code = main(["arx", "--data", str(arx_csv), "--method", "hglc",
                 "--q", "10", "--horizon", "4", "--out", str(out)])
    assert code == 0
    table = read_csv_matrix(str(out) + ".csv")
    assert table.shape == (4, 2)                  # K rows
    with open(str(out) + ".json") as fh:
        doc = json.load(fh)
    assert doc["cod"]["1"] > 0.0
    assert len(doc["block_norms"]) == 4           # output + 3 inputs
    assert "COD_1" in capsys.readouterr().out


def test_arx_q_too_large_exits_2(tmp_path):
    np.savetxt(tmp_path / "s.csv", np.ones((10, 2)), delimiter=",")
    code = main(["arx", "--data", str(tmp_path / "s.csv"), "--q", "20"])
    assert code == 2


# ------------------------------------------------------------
# config file precedence
# ------------------------------------------------------------

def test_config_file_supplies_defaults_flags_win(fixture_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"method": "mkl", "gamma": 0.5}))
    out = tmp_path / "fit.json"
    # config supplies method/gamma
    code = main(["--config", str(cfg), "fit",
                 "--data-y", str(fixture_dir / "y.csv"),
                 "--data-g", str(fixture_dir / "G.csv"),
                 "--groups", "4", "--out", str(out)])
    assert code == 0
    assert json.loads(out.read_text())["gamma"] == 0.5
    # explicit flag beats the config value
    code = main(["--config", str(cfg), "fit", "--method", "mkl",
                 "--gamma", "1.5",
                 "--data-y", str(fixture_dir / "y.csv"),
                 "--data-g", str(fixture_dir / "G.csv"),
                 "--groups", "4", "--out", str(out)])
    assert code == 0
    assert json.loads(out.read_text())["gamma"] == 1.5


def test_bad_config_file_exits_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    assert main(["--config", str(cfg), "benchmark", "--runs", "1",
                 "--estimators", "oracle"]) == 2
