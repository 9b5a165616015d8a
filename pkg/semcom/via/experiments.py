# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Grid evaluation behind the ``validate``, ``sweep`` and ``optimize``
commands.

Every command maps a function over the (p, q, p_s) cells of the configured
grid, in a thread pool when ``jobs > 1``. Cells are numbered in sorted order
and each (cell, policy) pair simulates on its own random stream, so results do
not depend on the number of workers.
"""

import itertools
import logging
import math
from multiprocessing.dummy import Pool as ThreadPool
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import attr
import numpy as np
import sentry_sdk

from semcom.via import analytics, optimizer, oracle, simulator
from semcom.via.config import ExperimentConfig, GridConfig, PolicyConfig
from semcom.via.exc import (
    DivergenceError,
    InvalidParameterError,
    ReducibleChainError,
    UnreachableConstraintError,
    UnsupportedPolicyError,
)
from semcom.via.model import ChannelParams, SourceParams
from semcom.via.policies import (
    PolicyKind,
    PolicySpec,
    RandomizedStationaryPolicy,
)

logger = logging.getLogger(__name__)

Row = Dict[str, Any]

CELL_COLUMNS = ["p", "q", "p_s"]
METRICS = ("avg_via", "avg_aoiv", "avg_aoii", "pe", "sampling_rate")
SIMULATOR_METRICS = {
    "avg_via": "avg_via",
    "avg_aoiv": "avg_aoiv",
    "avg_aoii": "avg_aoii",
    "pe": "empirical_pe",
    "sampling_rate": "sampling_rate",
}
BEST_METRICS = ("avg_via", "avg_aoiv", "avg_aoii", "pe")
RSC_LABEL = "rsc"
TIE_TOLERANCE = 1e-12

VALIDATE_COLUMNS = CELL_COLUMNS + [
    "policy",
    "check",
    "reference_kind",
    "closed_form",
    "reference",
    "abs_diff",
    "rel_diff",
    "tolerance",
    "stderr",
    "passed",
]
OPTIMIZE_COLUMNS = CELL_COLUMNS + [
    "eta",
    "e_max",
    "delta",
    "status",
    "p_star",
    "lower_bound",
    "rsc_avg_via",
    "rsc_pe",
    "rsc_sampling_cost",
    "ca_avg_via",
    "ca_sampling_rate",
    "ca_pe",
    "ca_admissible",
    "threshold",
    "winner",
]


@attr.s(frozen=True)
class Cell:
    p = attr.ib(type=float)
    q = attr.ib(type=float)
    p_s = attr.ib(type=float)
    index = attr.ib(type=int, default=0, eq=False)

    @property
    def src(self) -> SourceParams:
        return SourceParams(self.p, self.q)

    @property
    def ch(self) -> ChannelParams:
        return ChannelParams(self.p_s)

    @property
    def key(self) -> Tuple[float, float, float]:
        return (self.p, self.q, self.p_s)

    @property
    def label(self) -> str:
        return f"p={self.p:g} q={self.q:g} p_s={self.p_s:g}"

    def as_row(self) -> Row:
        return {"p": self.p, "q": self.q, "p_s": self.p_s}


@attr.s(frozen=True)
class Skipped:
    cell = attr.ib(type=Cell)
    reason = attr.ib(type=str)
    policy = attr.ib(type=Optional[str], default=None)

    def as_dict(self) -> Dict[str, Any]:
        return {**self.cell.as_row(), "policy": self.policy, "reason": self.reason}


@attr.s(frozen=True)
class CellFailure:
    cell = attr.ib(type=Cell)
    error = attr.ib(type=str)

    def as_dict(self) -> Dict[str, Any]:
        return {**self.cell.as_row(), "error": self.error}


@attr.s
class CommandResult:
    command = attr.ib(type=str)
    columns = attr.ib(type=List[str])
    rows = attr.ib(type=List[Row], factory=list)
    skipped = attr.ib(type=List[Skipped], factory=list)
    failures = attr.ib(type=List[CellFailure], factory=list)

    @property
    def failed_comparisons(self) -> List[Row]:
        return [row for row in self.rows if row.get("passed") is False]

    @property
    def ok(self) -> bool:
        return not self.failures and not self.failed_comparisons


def grid_cells(grid: GridConfig) -> Tuple[List[Cell], List[Skipped]]:
    """Sorted grid cells, minus the degenerate ones (p + q = 0)."""
    cells, skipped = [], []
    for index, (p, q, p_s) in enumerate(
        sorted(itertools.product(grid.p, grid.q, grid.p_s))
    ):
        cell = Cell(p, q, p_s, index=index)
        if p + q == 0.0:
            logger.warning("Skipping %s: the source never moves", cell.label)
            skipped.append(Skipped(cell, "p + q = 0: no stationary law"))
        else:
            cells.append(cell)
    return cells, skipped


def _stream(cell: Cell, policy_index: int, n_policies: int) -> int:
    return cell.index * n_policies + policy_index


CellOutput = Tuple[List[Row], List[Skipped]]


def _map_cells(
    func: Callable[[Cell], CellOutput], cells: Sequence[Cell], jobs: int
) -> List[Tuple[Cell, Optional[CellOutput], Optional[str]]]:
    def guarded(cell: Cell):
        try:
            return cell, func(cell), None
        except Exception as e:
            logger.exception("Evaluation of %s failed", cell.label)
            sentry_sdk.capture_exception(e)
            return cell, None, f"{type(e).__name__}: {e}"

    if jobs > 1 and len(cells) > 1:
        with ThreadPool(min(jobs, len(cells))) as pool:
            results = pool.map(guarded, cells)
    else:
        results = [guarded(cell) for cell in cells]
    logger.info("Evaluated %d cells", len(results))
    return results


def _collect(
    command: str,
    columns: List[str],
    cells: Sequence[Cell],
    skipped: List[Skipped],
    func: Callable[[Cell], CellOutput],
    jobs: int,
) -> CommandResult:
    result = CommandResult(command=command, columns=columns, skipped=list(skipped))
    for cell, output, error in _map_cells(func, cells, jobs):
        if output is None:
            assert error is not None
            result.failures.append(CellFailure(cell, error))
            continue
        rows, cell_skips = output
        result.rows.extend(rows)
        result.skipped.extend(cell_skips)
    # stable: rows of one cell keep their evaluation order
    result.rows.sort(key=lambda row: (row["p"], row["q"], row["p_s"]))
    result.skipped.sort(key=lambda s: (s.cell.key, s.policy or ""))
    result.failures.sort(key=lambda f: f.cell.key)
    return result


def _closed(func: Callable[..., float], *args) -> Optional[float]:
    """Closed-form value, None where it diverges or is not defined."""
    try:
        return func(*args)
    except (DivergenceError, InvalidParameterError, UnsupportedPolicyError):
        return None


def _relative(difference: float, reference: float) -> Optional[float]:
    if reference != 0.0:
        return difference / abs(reference)
    return 0.0 if difference == 0.0 else None


def skip_reason(policy: PolicySpec, cell: Cell) -> Optional[str]:
    """Why ``policy`` cannot be validated at ``cell``, if it cannot."""
    chain = oracle.build_recon_chain(policy, cell.src, cell.ch)
    if len(oracle.closed_classes(chain)) > 1:
        return "reducible chain: no unique stationary law"
    return None


def _simulate(
    policy: PolicySpec, cell: Cell, stream: int, config: ExperimentConfig
) -> Dict[str, Tuple[float, float]]:
    """(estimate, standard error) per metric."""
    settings = config.simulation
    sim_config = simulator.SimulationConfig(
        src=cell.src,
        ch=cell.ch,
        policy=policy,
        horizon=settings.horizon,
        burn_in=settings.burn_in,
        seed=settings.seed,
        stream=stream,
        histogram_cap=settings.histogram_cap,
        batches=settings.batches,
    )
    if settings.reps > 1:
        replicated = simulator.run_replicated(sim_config, settings.reps)
        return {
            metric: (
                replicated[name].mean,
                replicated[name].std / math.sqrt(replicated.n_reps),
            )
            for metric, name in SIMULATOR_METRICS.items()
        }
    report = simulator.run(sim_config)
    return {
        metric: (report.metric(name), report.stderr[name])
        for metric, name in SIMULATOR_METRICS.items()
    }


def closed_metrics(
    policy: PolicySpec, cell: Cell, config: ExperimentConfig
) -> Dict[str, Optional[float]]:
    """Long-run metrics of ``policy`` at ``cell``.

    The semantics-aware average VIA has no closed form; the truncated-chain
    value stands in for it. Values that diverge or are undefined are None.
    """
    src, ch = cell.src, cell.ch
    values: Dict[str, Optional[float]] = {
        "sampling_rate": policy.sampling_rate(src, ch),
        "sampling_cost": analytics.sampling_cost(
            policy, src, ch, config.optimization.delta
        ),
    }
    avg_via: Optional[float] = None
    if policy.kind is not PolicyKind.SEMANTICS_AWARE:
        avg_via = _closed(analytics.avg_via, policy, src, ch)
    elif ch.p_s > 0.0:
        try:
            avg_via = oracle.numeric_avg_via(
                policy, src, ch, config.validation.truncation
            )
        except ReducibleChainError:
            pass
    values.update(
        avg_via=avg_via,
        avg_aoiv=_closed(analytics.avg_aoiv, policy, src, ch),
        avg_aoii=_closed(analytics.avg_aoii, policy, src, ch),
        pe=_closed(analytics.reconstruction_error, policy, src, ch),
    )
    return values


def best_label(values: Dict[str, Optional[float]]) -> Optional[str]:
    """Name of the smallest finite value; ties go to the first name."""
    best: Optional[str] = None
    for name, value in values.items():
        if value is None or not math.isfinite(value):
            continue
        if best is None:
            best = name
            continue
        current = values[best]
        assert current is not None
        if value < current - TIE_TOLERANCE * max(1.0, abs(current)):
            best = name
    return best


# validate


def _comparison(
    cell: Cell,
    policy: str,
    check: str,
    reference_kind: str,
    closed: Optional[float],
    reference: Optional[float],
    tolerance: float,
    abs_diff: Optional[float] = None,
    stderr: Optional[float] = None,
) -> Row:
    """One comparison row; table-wide checks pass ``abs_diff`` directly and
    leave both values empty."""
    if abs_diff is None:
        assert closed is not None and reference is not None
        abs_diff = abs(closed - reference)
    passed = bool(abs_diff <= tolerance)
    if not passed:
        logger.error(
            "Comparison failed at %s policy=%s check=%s: |diff|=%.3g > %.3g",
            cell.label,
            policy,
            check,
            abs_diff,
            tolerance,
        )
    return {
        **cell.as_row(),
        "policy": policy,
        "check": check,
        "reference_kind": reference_kind,
        "closed_form": closed,
        "reference": reference,
        "abs_diff": abs_diff,
        "rel_diff": None if reference is None else _relative(abs_diff, reference),
        "tolerance": tolerance,
        "stderr": stderr,
        "passed": passed,
    }


def _max_deviation(closed: np.ndarray, reference: np.ndarray) -> float:
    return float(np.abs(closed - reference[: len(closed)]).max())


def _oracle_rows(
    name: str, policy: PolicySpec, cell: Cell, config: ExperimentConfig
) -> List[Row]:
    """Closed forms against the explicit chains: exact 4- and 8-state chains
    at the finite-chain tolerance, truncated age chains at the oracle
    tolerance (relative for averages)."""
    settings = config.validation
    exact, truncated = settings.finite_chain_tolerance, settings.oracle_tolerance
    levels = settings.compare_levels
    src, ch = cell.src, cell.ch
    rows: List[Row] = []

    def check(label, closed, reference, tolerance, abs_diff=None):
        rows.append(
            _comparison(
                cell, name, label, "oracle", closed, reference, tolerance, abs_diff
            )
        )

    chain = oracle.build_recon_chain(policy, src, ch)
    recon = oracle.recon_table(chain, oracle.stationary(chain))
    closed_recon = analytics.joint_recon_stationary(policy, src, ch)
    for key, value in sorted(recon.items()):
        check("recon[{},{}]".format(*key), closed_recon[key], value, exact)
    pe = recon[(0, 1)] + recon[(1, 0)]
    check("pe", analytics.reconstruction_error(policy, src, ch), pe, exact)

    chain = oracle.build_aoiv_chain(policy, src, ch)
    pi = oracle.stationary(chain)
    closed_aoiv = analytics.aoiv_stationary(policy, src, ch)
    for key, value in sorted(oracle.aoiv_table(chain, pi).items()):
        check("aoiv[{},{},{}]".format(*key), closed_aoiv[key], value, exact)
    mean_aoiv = oracle.expectation(chain, pi, "aoiv")
    check("avg_aoiv", analytics.avg_aoiv(policy, src, ch), mean_aoiv, exact)

    closed_via = None
    if policy.kind is not PolicyKind.SEMANTICS_AWARE:
        closed_via = _closed(analytics.avg_via, policy, src, ch)
    if closed_via is not None:
        chain = oracle.build_via_chain(policy, src, ch, settings.truncation)
        pi = oracle.stationary(chain)
        pi0, pi1 = oracle.via_table(chain, pi)
        table = analytics.via_stationary(policy, src, ch, levels)
        worst = max(_max_deviation(table.pi0, pi0), _max_deviation(table.pi1, pi1))
        check("via_table", None, None, truncated, abs_diff=worst)
        mean_via = oracle.expectation(chain, pi, "via")
        check("avg_via", closed_via, mean_via, truncated * max(1.0, mean_via))

    chain = oracle.build_aoii_chain(policy, src, ch, settings.truncation)
    pi = oracle.stationary(chain)
    closed_aoii = analytics.aoii_distribution(policy, src, ch, levels)
    worst = _max_deviation(closed_aoii.pmf, oracle.age_pmf(chain, pi, "aoii"))
    check("aoii_pmf", None, None, truncated, abs_diff=worst)
    mean_aoii = oracle.expectation(chain, pi, "aoii")
    check(
        "avg_aoii",
        analytics.avg_aoii(policy, src, ch),
        mean_aoii,
        truncated * max(1.0, mean_aoii),
    )
    return rows


def _simulation_rows(
    name: str,
    policy: PolicySpec,
    cell: Cell,
    stream: int,
    config: ExperimentConfig,
) -> List[Row]:
    settings = config.validation
    references = closed_metrics(policy, cell, config)
    estimates = _simulate(policy, cell, stream, config)
    rows = []
    for metric in METRICS:
        reference = references[metric]
        if reference is None:
            continue
        estimate, stderr = estimates[metric]
        tolerance = settings.mc_relative_tolerance * abs(reference)
        if not math.isnan(stderr):
            tolerance = max(tolerance, settings.mc_stderr_factor * stderr)
        kind = (
            "oracle"
            if metric == "avg_via" and policy.kind is PolicyKind.SEMANTICS_AWARE
            else "closed_form"
        )
        rows.append(
            _comparison(
                cell,
                name,
                f"mc_{metric}",
                f"monte_carlo_vs_{kind}",
                estimate,
                reference,
                tolerance,
                stderr=None if math.isnan(stderr) else stderr,
            )
        )
    return rows


def validate(config: ExperimentConfig, jobs: int = 1) -> CommandResult:
    """Closed forms against the numeric oracle and, when simulation is
    enabled, against Monte Carlo estimates; one row per comparison."""
    cells, skipped = grid_cells(config.grid)
    policies = [(p.name, p.build()) for p in config.policies]

    def evaluate(cell: Cell) -> CellOutput:
        rows: List[Row] = []
        skips: List[Skipped] = []
        for i, (name, policy) in enumerate(policies):
            reason = skip_reason(policy, cell)
            if reason is not None:
                logger.warning("Skipping %s at %s: %s", name, cell.label, reason)
                skips.append(Skipped(cell, reason, name))
                continue
            rows.extend(_oracle_rows(name, policy, cell, config))
            if config.simulation.enabled:
                stream = _stream(cell, i, len(policies))
                rows.extend(_simulation_rows(name, policy, cell, stream, config))
        return rows, skips

    result = _collect("validate", VALIDATE_COLUMNS, cells, skipped, evaluate, jobs)
    logger.info(
        "validate: %d comparisons, %d failed, %d skipped",
        len(result.rows),
        len(result.failed_comparisons),
        len(result.skipped),
    )
    return result


# sweep


def sweep_columns(config: ExperimentConfig) -> List[str]:
    columns = list(CELL_COLUMNS)
    for name in config.policy_names():
        columns += [f"{name}_{metric}" for metric in METRICS + ("sampling_cost",)]
        columns.append(f"{name}_oracle_delta")
        if config.simulation.enabled:
            for metric in METRICS:
                columns += [
                    f"{name}_sim_{metric}",
                    f"{name}_sim_{metric}_stderr",
                    f"{name}_{metric}_rel_diff",
                ]
    columns += [f"best_{metric}" for metric in BEST_METRICS]
    columns += [
        f"{RSC_LABEL}_p_sample",
        f"{RSC_LABEL}_avg_via",
        f"{RSC_LABEL}_avg_aoiv",
        "best_avg_aoiv_capped",
    ]
    return columns


def _oracle_delta(policy: PolicySpec, cell: Cell) -> Optional[float]:
    """Largest deviation of the closed-form (X, X̂, AoIV) law from the exact
    finite chain."""
    chain = oracle.build_aoiv_chain(policy, cell.src, cell.ch)
    try:
        table = oracle.aoiv_table(chain, oracle.stationary(chain))
    except ReducibleChainError:
        return None
    closed = analytics.aoiv_stationary(policy, cell.src, cell.ch)
    return max(abs(closed[key] - value) for key, value in table.items())


def _sweep_row(
    cell: Cell,
    policies: List[Tuple[PolicyConfig, PolicySpec]],
    config: ExperimentConfig,
) -> Row:
    row = cell.as_row()
    per_metric: Dict[str, Dict[str, Optional[float]]] = {
        metric: {} for metric in BEST_METRICS
    }
    for i, (settings, policy) in enumerate(policies):
        name = settings.name
        values = closed_metrics(policy, cell, config)
        for metric, value in values.items():
            row[f"{name}_{metric}"] = value
        for metric in BEST_METRICS:
            per_metric[metric][name] = values[metric]
        row[f"{name}_oracle_delta"] = _oracle_delta(policy, cell)
        if config.simulation.enabled:
            stream = _stream(cell, i, len(policies))
            for metric, (estimate, stderr) in _simulate(
                policy, cell, stream, config
            ).items():
                reference = values[metric]
                row[f"{name}_sim_{metric}"] = estimate
                row[f"{name}_sim_{metric}_stderr"] = stderr
                row[f"{name}_{metric}_rel_diff"] = (
                    None
                    if reference is None
                    else _relative(estimate - reference, reference)
                )
    for metric in BEST_METRICS:
        row[f"best_{metric}"] = best_label(per_metric[metric])

    eta = config.optimization.eta
    capped = RandomizedStationaryPolicy(p_sample=eta)
    rsc_aoiv = analytics.avg_aoiv(capped, cell.src, cell.ch)
    row[f"{RSC_LABEL}_p_sample"] = eta
    row[f"{RSC_LABEL}_avg_via"] = _closed(analytics.avg_via, capped, cell.src, cell.ch)
    row[f"{RSC_LABEL}_avg_aoiv"] = rsc_aoiv
    candidates: Dict[str, Optional[float]] = {}
    for settings, policy in policies:
        if policy.kind is PolicyKind.RANDOMIZED_STATIONARY:
            continue
        if policy.sampling_rate(cell.src, cell.ch) <= eta + TIE_TOLERANCE:
            candidates[settings.name] = per_metric["avg_aoiv"][settings.name]
    candidates[RSC_LABEL] = rsc_aoiv
    row["best_avg_aoiv_capped"] = best_label(candidates)
    return row


def sweep(config: ExperimentConfig, jobs: int = 1) -> CommandResult:
    """One row per grid cell with every policy's metrics, their simulated
    counterparts and the best-policy labels."""
    cells, skipped = grid_cells(config.grid)
    policies = [(p, p.build()) for p in config.policies]

    def evaluate(cell: Cell) -> CellOutput:
        return [_sweep_row(cell, policies, config)], []

    return _collect("sweep", sweep_columns(config), cells, skipped, evaluate, jobs)


# optimize


def _optimize_row(cell: Cell, config: ExperimentConfig) -> Row:
    settings = config.optimization
    problem = optimizer.OptimizationProblem.from_ratio(
        cell.src, cell.ch, settings.eta, settings.e_max, delta=settings.delta
    )
    row: Row = {
        **cell.as_row(),
        "eta": settings.eta,
        "e_max": settings.e_max,
        "delta": settings.delta,
    }
    try:
        comparison = optimizer.compare_constrained(problem)
    except UnreachableConstraintError as e:
        logger.warning("%s: %s", cell.label, e)
        for column in OPTIMIZE_COLUMNS:
            row.setdefault(column, None)
        row["status"] = "unreachable"
        row["winner"] = "none"
        return row

    outcome = comparison.outcome
    row.update(
        status=outcome.status.value,
        p_star=outcome.p_star,
        lower_bound=outcome.lower_bound,
        rsc_avg_via=outcome.achieved_via,
        rsc_pe=outcome.achieved_pe,
        rsc_sampling_cost=outcome.achieved_cost,
        ca_avg_via=comparison.ca_avg_via,
        ca_sampling_rate=comparison.ca_sampling_rate,
        ca_pe=comparison.ca_pe,
        ca_admissible=comparison.ca_admissible,
        threshold=comparison.threshold,
        winner=comparison.winner,
    )
    return row


def optimize(config: ExperimentConfig, jobs: int = 1) -> CommandResult:
    """Constrained randomized-stationary optimum per cell, against the
    change-aware policy under the same budget and error cap."""
    cells, skipped = grid_cells(config.grid)

    def evaluate(cell: Cell) -> CellOutput:
        return [_optimize_row(cell, config)], []

    return _collect("optimize", OPTIMIZE_COLUMNS, cells, skipped, evaluate, jobs)


COMMANDS: Dict[str, Callable[[ExperimentConfig, int], CommandResult]] = {
    "validate": validate,
    "sweep": sweep,
    "optimize": optimize,
}
