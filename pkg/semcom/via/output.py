# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""CSV tables and their JSON sidecars.

Floats are written with 12 significant digits and the JSON sidecar holds the
same rounded values, so a CSV row read back equals its JSON counterpart.
Nothing time-dependent is written: equal inputs give byte-identical files.
"""

import csv
import json
import logging
import math
import os
from typing import Any, Dict, List, Tuple

from semcom.via.config import ExperimentConfig
from semcom.via.exc import ConfigError
from semcom.via.experiments import CommandResult

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SIGNIFICANT_DIGITS = 12
DISTRIBUTION = "semcom.via"


def package_version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version(DISTRIBUTION)
    except PackageNotFoundError:
        return "unknown"


def normalize(value: Any) -> Any:
    """JSON value of a table cell: floats rounded, non-finite as null."""
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, int):
        return value
    value = float(value)
    if not math.isfinite(value):
        return None
    return float(format(value, f".{SIGNIFICANT_DIGITS}g"))


def format_value(value: Any) -> str:
    value = normalize(value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, f".{SIGNIFICANT_DIGITS}g")
    return str(value)


def parse_value(text: str) -> Any:
    """Inverse of :func:`format_value` for the values it produces."""
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_csv(result: CommandResult, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(result.columns)
        for row in result.rows:
            writer.writerow([format_value(row.get(c)) for c in result.columns])


def read_csv(path: str) -> Tuple[List[str], List[Dict[str, Any]]]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        columns = next(reader)
        rows = [
            {c: parse_value(text) for c, text in zip(columns, line)} for line in reader
        ]
    return columns, rows


def sidecar(result: CommandResult, config: ExperimentConfig) -> Dict[str, Any]:
    """Full metadata and rows of a command run."""
    settings = config.as_dict()
    # contents must not depend on the output directory
    del settings["output"]["directory"]
    return {
        "schema_version": SCHEMA_VERSION,
        "command": result.command,
        "version": package_version(),
        "seed": config.simulation.seed,
        "config": settings,
        "tolerances": {
            "oracle": config.validation.oracle_tolerance,
            "finite_chain": config.validation.finite_chain_tolerance,
            "mc_relative": config.validation.mc_relative_tolerance,
            "mc_stderr_factor": config.validation.mc_stderr_factor,
        },
        "columns": result.columns,
        "rows": [
            {c: normalize(row.get(c)) for c in result.columns} for row in result.rows
        ],
        "skipped": [s.as_dict() for s in result.skipped],
        "failures": [f.as_dict() for f in result.failures],
    }


def write_json(result: CommandResult, config: ExperimentConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(sidecar(result, config), f, indent=2, allow_nan=False)
        f.write("\n")


def emit(result: CommandResult, config: ExperimentConfig) -> List[str]:
    """Write the configured files for ``result``; returns their paths.

    Raises:
        ConfigError if the output directory cannot be created or written
    """
    directory = config.output.directory
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as e:
        raise ConfigError(
            f"cannot create output directory: {e.strerror}", path="output.directory"
        )
    if not os.access(directory, os.W_OK):
        raise ConfigError("output directory is not writable", path="output.directory")

    paths = []
    if config.output.csv:
        path = os.path.join(directory, f"{result.command}.csv")
        write_csv(result, path)
        paths.append(path)
    if config.output.json:
        path = os.path.join(directory, f"{result.command}.json")
        write_json(result, config, path)
        paths.append(path)
    for path in paths:
        logger.info("Wrote %s", path)
    return paths
