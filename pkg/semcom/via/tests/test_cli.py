# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import json

from click.testing import CliRunner
import pytest
import yaml

from semcom.via import output
from semcom.via.cli import via as cli


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def write_config(tmp_path):
    def write(data, name="via.yml"):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data))
        return str(path)

    return write


@pytest.fixture
def quick_config(small_config):
    """``small_config`` without Monte Carlo"""
    return {**small_config, "simulation": {"enabled": False}}


def _invoke(runner, command, config_path, out, *args):
    return runner.invoke(
        cli, [command, "--config", config_path, "--out", str(out), *args]
    )


def _rows(out, command):
    with open(out / f"{command}.json") as f:
        return json.load(f)["rows"]


def test_help(runner):
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    for command in ("validate", "sweep", "optimize"):
        assert command in result.output


def test_validate_passes(runner, config_path, tmp_path):
    out = tmp_path / "results"
    result = _invoke(runner, "validate", config_path, out)
    assert result.exit_code == 0, result.output
    assert "0 failed comparisons" in result.output
    rows = _rows(out, "validate")
    assert rows and all(row["passed"] for row in rows)
    checks = {row["check"] for row in rows}
    assert {"recon[0,1]", "aoiv[1,0,1]", "via_table", "aoii_pmf"} <= checks
    assert {"mc_avg_via", "mc_pe", "mc_sampling_rate"} <= checks
    assert {row["policy"] for row in rows} == {"rs", "ca", "sa"}
    assert (out / "validate.csv").exists()


def test_validate_reports_failing_cell(
    runner, mocker, write_config, quick_config, tmp_path
):
    mocker.patch("semcom.via.analytics.avg_aoiv", return_value=0.9)
    config_path = write_config(quick_config)
    out = str(tmp_path / "out")
    result = runner.invoke(cli, ["validate", "-C", config_path, "-o", out])
    assert result.exit_code == 1
    assert "FAILED p=0.2 q=0.3 p_s=0.7 policy=rs check=avg_aoiv" in result.output
    assert "check=recon" not in result.output


def test_validate_skips_frozen_source(runner, write_config, quick_config, tmp_path):
    config_path = write_config(
        {**quick_config, "grid": {"p": [0.0], "q": [0.0], "p_s": [0.5]}}
    )
    result = _invoke(runner, "validate", config_path, tmp_path)
    assert result.exit_code == 0, result.output
    assert "SKIPPED p=0 q=0 p_s=0.5: p + q = 0" in result.output
    with open(tmp_path / "validate.json") as f:
        sidecar = json.load(f)
    assert sidecar["rows"] == []
    assert sidecar["skipped"][0]["reason"].startswith("p + q = 0")


def test_validate_skips_degenerate_change_aware(
    runner, write_config, quick_config, tmp_path
):
    config_path = write_config(
        {**quick_config, "grid": {"p": [0.3], "q": [0.0], "p_s": [0.6]}}
    )
    result = _invoke(runner, "validate", config_path, tmp_path)
    assert result.exit_code == 0, result.output
    assert "SKIPPED p=0.3 q=0 p_s=0.6 policy=ca" in result.output
    policies = {row["policy"] for row in _rows(tmp_path, "validate")}
    assert "ca" not in policies


def test_sweep_empty_grid(runner, write_config, quick_config, tmp_path):
    config_path = write_config(
        {**quick_config, "grid": {"p": {"min": 0.5, "max": 0.1, "step": 0.1}}}
    )
    result = _invoke(runner, "sweep", config_path, tmp_path)
    assert result.exit_code == 0, result.output
    columns, rows = output.read_csv(str(tmp_path / "sweep.csv"))
    assert rows == []
    assert columns[:3] == ["p", "q", "p_s"]


def test_sweep_values(runner, write_config, quick_config, tmp_path):
    config_path = write_config(
        {**quick_config, "grid": {"p": [0.3], "q": [0.3], "p_s": [0.7]}}
    )
    result = _invoke(runner, "sweep", config_path, tmp_path)
    assert result.exit_code == 0, result.output
    (row,) = _rows(tmp_path, "sweep")
    assert row["rs_sampling_cost"] == pytest.approx(0.05)
    assert row["ca_sampling_rate"] == pytest.approx(0.3)
    assert row["ca_avg_via"] == pytest.approx(0.3 / 0.7)
    assert row["sa_avg_via"] > 0
    assert row["rs_oracle_delta"] < 1e-12
    assert row["best_avg_aoiv"] == "sa"
    assert row["best_avg_aoiv_capped"] == "sa"
    assert row["rsc_p_sample"] == 0.5


def test_sweep_capped_budget(runner, write_config, quick_config, tmp_path):
    config_path = write_config(
        {
            **quick_config,
            "grid": {"p": [0.3], "q": [0.3], "p_s": [0.7]},
            "optimization": {"eta": 0.2},
        }
    )
    result = _invoke(runner, "sweep", config_path, tmp_path)
    assert result.exit_code == 0, result.output
    (row,) = _rows(tmp_path, "sweep")
    # neither event-triggered policy fits a 0.2 sampling budget here
    assert row["best_avg_aoiv_capped"] == "rsc"


def test_sweep_reproducible(runner, config_path, tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    assert _invoke(runner, "sweep", config_path, first).exit_code == 0
    assert _invoke(runner, "sweep", config_path, second, "--jobs", "3").exit_code == 0
    for name in ("sweep.csv", "sweep.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    columns, rows = output.read_csv(str(first / "sweep.csv"))
    assert rows == _rows(first, "sweep")
    assert "rs_sim_avg_via" in columns


def test_sweep_seed_override(runner, config_path, tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    assert _invoke(runner, "sweep", config_path, first).exit_code == 0
    assert _invoke(runner, "sweep", config_path, second, "--seed", "8").exit_code == 0
    assert _rows(first, "sweep")[0]["rs_sim_avg_via"] != pytest.approx(
        _rows(second, "sweep")[0]["rs_sim_avg_via"], rel=1e-12
    )
    with open(second / "sweep.json") as f:
        assert json.load(f)["seed"] == 8


def test_sweep_cell_error(runner, mocker, write_config, quick_config, tmp_path):
    mocker.patch("semcom.via.analytics.avg_aoii", side_effect=RuntimeError("boom"))
    capture = mocker.patch("semcom.via.experiments.sentry_sdk.capture_exception")
    result = _invoke(runner, "sweep", write_config(quick_config), tmp_path)
    assert result.exit_code == 1
    assert "ERROR p=0.2 q=0.3 p_s=0.7: RuntimeError: boom" in result.output
    assert capture.call_count == 4
    with open(tmp_path / "sweep.json") as f:
        assert len(json.load(f)["failures"]) == 4


def test_optimize_regions(runner, write_config, quick_config, tmp_path):
    config_path = write_config(
        {
            **quick_config,
            "grid": {"p": [0.1, 0.3, 0.9], "q": [0.1, 0.3, 0.9], "p_s": [0.7]},
        }
    )
    result = _invoke(runner, "optimize", config_path, tmp_path)
    assert result.exit_code == 0, result.output
    rows = {(row["p"], row["q"]): row for row in _rows(tmp_path, "optimize")}
    assert len(rows) == 9
    assert rows[(0.3, 0.3)]["winner"] == "ca"
    assert rows[(0.1, 0.1)]["winner"] == "rsc"
    assert rows[(0.9, 0.9)]["winner"] == "rsc"
    assert rows[(0.9, 0.9)]["ca_admissible"] is False
    assert rows[(0.1, 0.1)]["p_star"] == 0.5
    assert rows[(0.1, 0.1)]["status"] == "optimal"


def test_optimize_unreachable(runner, write_config, quick_config, tmp_path):
    config_path = write_config(
        {
            **quick_config,
            "grid": {"p": [0.3], "q": [0.3], "p_s": [0.0]},
            "optimization": {"e_max": 0.1},
        }
    )
    result = _invoke(runner, "optimize", config_path, tmp_path)
    assert result.exit_code == 0, result.output
    (row,) = _rows(tmp_path, "optimize")
    assert row["status"] == "unreachable"
    assert row["winner"] == "none"
    assert row["p_star"] is None


def test_config_error_exit_code(runner, write_config, tmp_path):
    config_path = write_config({"simulation": {"horizn": 10}})
    result = _invoke(runner, "sweep", config_path, tmp_path)
    assert result.exit_code == 2
    assert "Configuration error: simulation.horizn" in result.output
    assert not (tmp_path / "sweep.csv").exists()


def test_config_from_environment(runner, config_path, tmp_path, monkeypatch):
    monkeypatch.setenv("SEMCOM_VIA_CONFIG", config_path)
    result = runner.invoke(cli, ["optimize", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert len(_rows(tmp_path, "optimize")) == 4
