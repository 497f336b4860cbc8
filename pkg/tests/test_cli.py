"""Config parsing, CSV emission, pipeline exit codes, reproducibility."""

import math
import os
from pathlib import Path

import pytest

from anisohit.cli import (
    ConfigReader,
    ReportRow,
    _REQUIRED,
    _bound_row,
    _close_row,
    _info_row,
    emit_csv,
    main,
)
from anisohit.errors import ConfigurationError


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# -- config reader -----------------------------------------------------------------


def test_config_parses_comments_blanks_and_whitespace(tmp_path):
    cfg = ConfigReader.load(
        _write(
            tmp_path,
            "# full-line comment\n"
            "\n"
            "hurst = 0.75   # trailing comment\n"
            "  label=  spaced out  \n"
            "n = 12\n",
        )
    )
    assert cfg.float("hurst") == 0.75
    assert cfg.str("label") == "spaced out"
    assert cfg.int("n") == 12
    cfg.reject_unknown()


def test_config_rejects_duplicates_and_malformed_lines(tmp_path):
    with pytest.raises(ConfigurationError):
        ConfigReader.load(_write(tmp_path, "a = 1\na = 2\n"))
    with pytest.raises(ConfigurationError):
        ConfigReader.load(_write(tmp_path, "just some words\n"))
    with pytest.raises(ConfigurationError):
        ConfigReader.load(str(tmp_path / "absent.cfg"))


def test_config_typed_getters():
    cfg = ConfigReader({"x": "1.5", "n": "7", "v": "1; 2, 3", "bad": "abc"})
    assert cfg.float("x") == 1.5
    assert cfg.int("n") == 7
    assert cfg.floats("v") == [1.0, 2.0, 3.0]
    assert cfg.float("missing", 2.0) == 2.0
    assert cfg.str("missing") is None
    with pytest.raises(ConfigurationError):
        cfg.float("bad")
    with pytest.raises(ConfigurationError):
        cfg.int("x")  # 1.5 is not an integer
    with pytest.raises(ConfigurationError):
        cfg.floats("bad")
    with pytest.raises(ConfigurationError):
        cfg.float("absent", _REQUIRED)


def test_config_reports_unknown_keys():
    cfg = ConfigReader({"known": "1", "stray": "2"})
    cfg.int("known")
    with pytest.raises(ConfigurationError, match="stray"):
        cfg.reject_unknown()


# -- report rows and CSV ---------------------------------------------------------------


def test_row_helpers():
    assert _close_row("e", "p", 1.0005, 1.0, 0.001).passed
    assert not _close_row("e", "p", 1.002, 1.0, 0.001).passed
    assert not _close_row("e", "p", math.nan, 1.0, 0.001).passed
    assert _bound_row("e", "p", 0.5, 0.5).passed
    assert not _bound_row("e", "p", 0.51, 0.5).passed
    info = _info_row("e", "p", 0.25)
    assert info.passed and info.reference == info.observed


def test_csv_format_and_significant_digits(tmp_path):
    rows = [
        ReportRow("exp-a", "H=0.6;c=2", 1.0 / 3.0, 2.0 / 3.0, 1e-3, True),
        ReportRow("exp-b", "H=0.6;c=4", 1.25, 1.25, 0.01, False),
    ]
    path = tmp_path / "report.csv"
    emit_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "experiment,params,observed,reference,tolerance,pass"
    assert lines[1] == "exp-a,H=0.6;c=2,0.333333333333,0.666666666667,0.001,true"
    assert lines[2] == "exp-b,H=0.6;c=4,1.25,1.25,0.01,false"
    assert not any(p.suffix == ".tmp" for p in tmp_path.iterdir())


def test_csv_refuses_empty_reports(tmp_path):
    path = tmp_path / "report.csv"
    with pytest.raises(ValueError):
        emit_csv([], path)
    assert not path.exists()


# -- pipelines end to end -----------------------------------------------------------------


def test_variance_scaling_pipeline_passes(tmp_path, capsys):
    cfg = _write(tmp_path, "hurst = 0.75\nt_ref = 0.25\nfactors = 0.5, 2\nrel_tol = 1e-6\n")
    code = main(["variance-scaling", "--config", cfg, "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "variance-scaling.csv").read_text().splitlines()
    assert lines[0] == "experiment,params,observed,reference,tolerance,pass"
    assert len(lines) == 3
    assert all(line.endswith(",true") for line in lines[1:])
    assert "all passed" in capsys.readouterr().out


def test_gauge_check_pipeline_detects_a_wrong_reference(tmp_path):
    cfg = _write(
        tmp_path,
        "q1_nu = 0.5\nq2_nu = 0.5\nstate_dim = 5\ndiam_cap = 1.0\n"
        "grid_size = 60\ngrowth_limit = 999\n",
    )
    code = main(["gauge-check", "--config", cfg, "--out", str(tmp_path)])
    assert code == 1
    text = (tmp_path / "gauge-check.csv").read_text()
    assert ",false" in text


def test_gauge_check_pipeline_passes_without_reference(tmp_path):
    cfg = _write(tmp_path, "q1_nu = 0.5\nq2_nu = 0.5\nstate_dim = 5\ndiam_cap = 1.0\n")
    assert main(["gauge-check", "--config", cfg, "--out", str(tmp_path)]) == 0


def test_missing_required_key_exits_2(tmp_path):
    cfg = _write(tmp_path, "t_ref = 0.25\n")  # hurst missing
    assert main(["variance-scaling", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_unknown_config_key_exits_2(tmp_path):
    cfg = _write(tmp_path, "hurst = 0.75\ntypo_key = 1\n")
    assert main(["variance-scaling", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_unreadable_config_exits_2(tmp_path):
    assert main(["variance-scaling", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_blocked_output_directory_exits_2(tmp_path):
    cfg = _write(tmp_path, "hurst = 0.75\n")
    blocked = tmp_path / "blocked"
    blocked.write_text("a file, not a directory")
    assert main(["variance-scaling", "--config", cfg, "--out", str(blocked)]) == 2


def test_insufficient_resolution_exits_3(tmp_path):
    cfg = _write(
        tmp_path,
        "hurst = 0.75\nn_times = 8\nn_sites = 8\neps = 200, 100, 50\nn_samples = 200\n",
    )
    assert main(["small-ball", "--config", cfg, "--out", str(tmp_path)]) == 3
    assert not (tmp_path / "small-ball.csv").exists()


def test_unknown_pipeline_is_a_usage_error(tmp_path):
    cfg = _write(tmp_path, "hurst = 0.75\n")
    with pytest.raises(SystemExit) as exc:
        main(["no-such-pipeline", "--config", cfg])
    assert exc.value.code == 2


def test_thread_cap_env(tmp_path, monkeypatch):
    monkeypatch.setenv("ANISOHIT_THREADS", "bogus")
    cfg = _write(tmp_path, "hurst = 0.75\n")
    assert main(["variance-scaling", "--config", cfg, "--out", str(tmp_path)]) == 2
    monkeypatch.setenv("ANISOHIT_THREADS", "0")
    assert main(["variance-scaling", "--config", cfg, "--out", str(tmp_path)]) == 2
    monkeypatch.setenv("ANISOHIT_THREADS", "2")
    assert main(["variance-scaling", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert os.environ["OMP_NUM_THREADS"] == "2"
    assert os.environ["OPENBLAS_NUM_THREADS"] == "2"


def test_hit_mc_reports_are_byte_identical_for_one_seed(tmp_path):
    cfg = _write(
        tmp_path,
        "hurst = 0.7\nn_times = 6\nn_sites = 6\ntarget = ball\n"
        "target_center = 0\ntarget_radius = 0.4\nn_samples = 300\nseed = 5\n",
    )
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["hit-mc", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["hit-mc", "--config", cfg, "--out", str(out_b)]) == 0
    bytes_a = (out_a / "hit-mc.csv").read_bytes()
    assert bytes_a == (out_b / "hit-mc.csv").read_bytes()
    assert b",true" in bytes_a


def test_seed_flag_overrides_the_config(tmp_path):
    cfg = _write(
        tmp_path,
        "hurst = 0.7\nn_times = 6\nn_sites = 6\ntarget = ball\n"
        "target_center = 0\ntarget_radius = 0.4\nn_samples = 300\nseed = 5\n",
    )
    assert main(["hit-mc", "--config", cfg, "--seed", "7", "--out", str(tmp_path)]) == 0
    assert ";seed=7" in (tmp_path / "hit-mc.csv").read_text()


def test_hausdorff_pipeline_smoke(tmp_path):
    cfg = _write(
        tmp_path,
        "target = cantor\ntarget_level = 10\ngauge_gamma = 0.6309297535714574\n"
        "eps = 0.1, 0.01, 0.001\nexpect_value = 1.0\nexpect_factor = 2.0\n",
    )
    assert main(["hausdorff", "--config", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "hausdorff.csv").read_text().splitlines()
    assert len(lines) == 4


def test_capacity_pipeline_smoke(tmp_path):
    cfg = _write(
        tmp_path,
        "target = interval\nriesz_beta = 0.0\nn_cells = 64\nexpect_capacity = 1.0\n",
    )
    assert main(["capacity", "--config", cfg, "--out", str(tmp_path)]) == 0
    text = (tmp_path / "capacity.csv").read_text()
    assert "fw-gap" in text and "capacity," in text
