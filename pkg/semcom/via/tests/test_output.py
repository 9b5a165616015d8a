# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import json
import math

import attr
import pytest

from semcom.via import output
from semcom.via.config import DEFAULT_CONFIG
from semcom.via.exc import ConfigError
from semcom.via.experiments import Cell, CellFailure, CommandResult, Skipped

COLUMNS = ["p", "q", "p_s", "value", "label", "flag"]


@pytest.fixture
def result():
    cell = Cell(0.1, 0.2, 0.7)
    return CommandResult(
        command="sweep",
        columns=COLUMNS,
        rows=[
            {"p": 0.1, "q": 0.2, "p_s": 0.7, "value": 1 / 3, "label": "ca"},
            {"p": 0.1, "q": 0.3, "p_s": 0.7, "value": math.inf, "flag": True},
        ],
        skipped=[Skipped(cell, "p + q = 0: no stationary law")],
        failures=[CellFailure(cell, "RuntimeError: boom")],
    )


@pytest.fixture
def conf(tmp_path):
    return attr.evolve(
        DEFAULT_CONFIG,
        output=attr.evolve(DEFAULT_CONFIG.output, directory=str(tmp_path / "out")),
    )


@pytest.mark.parametrize(
    "value,text",
    [
        (None, ""),
        (True, "true"),
        (False, "false"),
        (3, "3"),
        (0.1 + 0.2, "0.3"),
        (1 / 3, "0.333333333333"),
        (1e-20, "1e-20"),
        (math.inf, ""),
        (math.nan, ""),
        ("rsc", "rsc"),
    ],
)
def test_format_value(value, text):
    assert output.format_value(value) == text


@pytest.mark.parametrize(
    "text,value", [("", None), ("true", True), ("7", 7), ("0.25", 0.25), ("ca", "ca")]
)
def test_parse_value(text, value):
    assert output.parse_value(text) == value


def test_normalize():
    assert output.normalize(1 / 3) == 0.333333333333
    assert output.normalize(-math.inf) is None
    assert output.normalize(False) is False


def test_csv_matches_json(result, conf, tmp_path):
    paths = output.emit(result, conf)
    directory = tmp_path / "out"
    assert paths == [str(directory / "sweep.csv"), str(directory / "sweep.json")]

    columns, rows = output.read_csv(paths[0])
    with open(paths[1]) as f:
        sidecar = json.load(f)
    assert columns == sidecar["columns"] == COLUMNS
    assert rows == sidecar["rows"]
    assert rows[0]["value"] == 0.333333333333
    assert rows[1]["value"] is None
    assert rows[1]["flag"] is True
    assert rows[0]["flag"] is None


def test_sidecar(result, conf, mocker):
    mocker.patch.object(output, "package_version", return_value="1.2.3")
    sidecar = output.sidecar(result, conf)
    assert sidecar["schema_version"] == output.SCHEMA_VERSION
    assert sidecar["command"] == "sweep"
    assert sidecar["version"] == "1.2.3"
    assert sidecar["seed"] == conf.simulation.seed
    assert "directory" not in sidecar["config"]["output"]
    assert sidecar["tolerances"]["oracle"] == 1e-9
    assert sidecar["skipped"] == [
        {
            "p": 0.1,
            "q": 0.2,
            "p_s": 0.7,
            "policy": None,
            "reason": "p + q = 0: no stationary law",
        }
    ]
    assert sidecar["failures"][0]["error"] == "RuntimeError: boom"


def test_output_independent_of_directory(result, conf, tmp_path):
    elsewhere = attr.evolve(
        conf, output=attr.evolve(conf.output, directory=str(tmp_path / "other"))
    )
    first = output.emit(result, conf)
    second = output.emit(result, elsewhere)
    for a, b in zip(first, second):
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read()


def test_empty_result_writes_header(conf, tmp_path):
    empty = CommandResult(command="optimize", columns=COLUMNS)
    csv_path, json_path = output.emit(empty, conf)
    with open(csv_path) as f:
        assert f.read() == ",".join(COLUMNS) + "\n"
    with open(json_path) as f:
        assert json.load(f)["rows"] == []


@pytest.mark.parametrize("fmt,names", [("csv", ["x.csv"]), ("json", ["x.json"])])
def test_emit_format(conf, fmt, names):
    conf = attr.evolve(conf, output=attr.evolve(conf.output, format=fmt))
    paths = output.emit(CommandResult(command="x", columns=COLUMNS), conf)
    assert [p.rsplit("/", 1)[-1] for p in paths] == names


def test_emit_bad_directory(result, conf, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    conf = attr.evolve(
        conf, output=attr.evolve(conf.output, directory=str(blocker / "sub"))
    )
    with pytest.raises(ConfigError, match="output directory") as excinfo:
        output.emit(result, conf)
    assert excinfo.value.path == "output.directory"
