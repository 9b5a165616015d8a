# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

from __future__ import annotations

# WARNING: do not import unnecessary things here to keep cli startup time under
# control
import logging
from typing import TYPE_CHECKING, Optional

import click

if TYPE_CHECKING:
    from semcom.via.experiments import CommandResult

CONTEXT_SETTINGS = dict(help_option_names=["-h", "--help"])
LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]

EXIT_FAILED = 1
EXIT_CONFIG = 2


@click.group(name="via", context_settings=CONTEXT_SETTINGS)
@click.option(
    "--log-level",
    "-l",
    default="INFO",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    show_default=True,
    help="Log level of the semcom loggers.",
)
@click.option(
    "--sentry-dsn",
    default=None,
    envvar="SEMCOM_SENTRY_DSN",
    metavar="DSN",
    help="Report failing grid cells to this Sentry project.",
)
@click.pass_context
def via(ctx, log_level: str, sentry_dsn: Optional[str]):
    """Version innovation age experiments on a two-state Markov source."""
    ctx.ensure_object(dict)
    ctx.obj["log_level"] = log_level.upper()
    logging.getLogger("semcom").setLevel(ctx.obj["log_level"])
    if sentry_dsn:
        import sentry_sdk

        sentry_sdk.init(dsn=sentry_dsn)


def experiment_options(func):
    options = [
        click.option(
            "--config",
            "--config-file",
            "-C",
            "config_file",
            default=None,
            metavar="CONFIGFILE",
            type=click.Path(exists=True, dir_okay=False),
            help="Experiment configuration file (YAML). Defaults to "
            "$SEMCOM_VIA_CONFIG, then to the built-in configuration.",
        ),
        click.option(
            "--out",
            "-o",
            default=None,
            metavar="DIR",
            type=click.Path(file_okay=False),
            help="Output directory, overriding output.directory.",
        ),
        click.option(
            "--seed",
            default=None,
            type=click.IntRange(0, 2**64 - 1),
            help="Simulation seed, overriding simulation.seed.",
        ),
        click.option(
            "--jobs",
            "-j",
            default=1,
            show_default=True,
            type=click.IntRange(min=1),
            help="Number of grid cells evaluated in parallel.",
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _cell(row) -> str:
    return f"p={row['p']:g} q={row['q']:g} p_s={row['p_s']:g}"


def _report(result: CommandResult) -> None:
    for row in result.failed_comparisons:
        click.echo(
            f"FAILED {_cell(row)} policy={row['policy']} check={row['check']}: "
            f"closed={row['closed_form']} reference={row['reference']} "
            f"|diff|={row['abs_diff']:.3g} > {row['tolerance']:.3g}",
            err=True,
        )
    for failure in result.failures:
        click.echo(f"ERROR {failure.cell.label}: {failure.error}", err=True)
    for skip in result.skipped:
        who = f" policy={skip.policy}" if skip.policy else ""
        click.echo(f"SKIPPED {skip.cell.label}{who}: {skip.reason}", err=True)


def _run(
    ctx: click.Context,
    command: str,
    config_file: Optional[str],
    out: Optional[str],
    seed: Optional[int],
    jobs: int,
) -> None:
    from semcom.via import config, experiments, output
    from semcom.via.exc import ConfigError, ViaError

    try:
        conf = config.with_overrides(config.read(config_file), seed=seed, out=out)
        result = experiments.COMMANDS[command](conf, jobs)
        paths = output.emit(result, conf)
    except ConfigError as e:
        click.echo(f"Configuration error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
    except ViaError as e:
        raise click.ClickException(str(e))

    _report(result)
    summary = f"{command}: {len(result.rows)} rows"
    if command == "validate":
        summary += f", {len(result.failed_comparisons)} failed comparisons"
    summary += f", {len(result.skipped)} skipped, {len(result.failures)} errors"
    click.echo(summary)
    for path in paths:
        click.echo(f"Wrote {path}")
    if not result.ok:
        ctx.exit(EXIT_FAILED)


@via.command()
@experiment_options
@click.pass_context
def validate(ctx, config_file, out, seed, jobs):
    """Check closed forms against the numeric oracle and Monte Carlo.

    Exits with status 1 if any comparison fails, naming the failing cells.
    """
    _run(ctx, "validate", config_file, out, seed, jobs)


@via.command()
@experiment_options
@click.pass_context
def sweep(ctx, config_file, out, seed, jobs):
    """Tabulate every policy's metrics over the (p, q, p_s) grid."""
    _run(ctx, "sweep", config_file, out, seed, jobs)


@via.command()
@experiment_options
@click.pass_context
def optimize(ctx, config_file, out, seed, jobs):
    """Map the cost- and error-constrained minimum average VIA over the grid,
    against the change-aware policy."""
    _run(ctx, "optimize", config_file, out, seed, jobs)


def main():
    logging.basicConfig()
    return via(auto_envvar_prefix="SEMCOM_VIA")


if __name__ == "__main__":
    main()
