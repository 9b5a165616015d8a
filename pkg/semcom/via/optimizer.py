# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Minimum average VIA of the randomized stationary policy under a sampling
cost budget and a reconstruction-error cap.

The cost constraint reads ``p_sample <= eta`` with ``eta = delta_max / delta``.
The error constraint ``P_E(rho) <= e_max`` is, after clearing denominators,
``A <= rho * B`` with::

    A = 2pq - e_max (p + q)^2
    B = 2pq + e_max (p + q)(1 - p - q)

``B >= 0`` always, and the objective decreases in ``p_sample`` whenever
``pq > 0``, so the optimum sits at ``eta`` when feasible.
"""

import enum
import logging
import math
from typing import Optional, Tuple

import attr
import numpy as np

from semcom.via import analytics
from semcom.via.exc import (
    DivergenceError,
    InvalidParameterError,
    UnreachableConstraintError,
)
from semcom.via.model import ChannelParams, SourceParams
from semcom.via.policies import ChangeAwarePolicy

logger = logging.getLogger(__name__)

SLACK = 1e-12
GRID_TOLERANCE = 1e-12


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


@attr.s(frozen=True)
class OptimizationProblem:
    src = attr.ib(type=SourceParams)
    ch = attr.ib(type=ChannelParams)
    delta = attr.ib(type=float, converter=float)
    delta_max = attr.ib(type=float, converter=float)
    e_max = attr.ib(type=float, converter=float)

    @delta.validator
    def _check_delta(self, attribute, value):
        if not value > 0:
            raise InvalidParameterError(f"delta must be positive, got {value}")

    @delta_max.validator
    def _check_delta_max(self, attribute, value):
        if value < 0:
            raise InvalidParameterError(f"delta_max must be >= 0, got {value}")
        if value > self.delta:
            raise InvalidParameterError(
                f"delta_max / delta must not exceed 1, got {value / self.delta}"
            )

    @e_max.validator
    def _check_e_max(self, attribute, value):
        if not 0.0 < value <= 1.0:
            raise InvalidParameterError(f"e_max must lie in (0, 1], got {value}")

    @classmethod
    def from_ratio(
        cls,
        src: SourceParams,
        ch: ChannelParams,
        eta: float,
        e_max: float,
        delta: float = 1.0,
    ) -> "OptimizationProblem":
        return cls(src=src, ch=ch, delta=delta, delta_max=eta * delta, e_max=e_max)

    @property
    def eta(self) -> float:
        return self.delta_max / self.delta

    def error_coefficients(self) -> Tuple[float, float]:
        p, q = self.src.p, self.src.q
        a = 2 * p * q - self.e_max * (p + q) ** 2
        b = 2 * p * q + self.e_max * (p + q) * (1 - p - q)
        return a, b


@attr.s(frozen=True)
class OptimizationOutcome:
    status = attr.ib(type=Status)
    p_star = attr.ib(type=Optional[float])
    lower_bound = attr.ib(type=float)
    achieved_via = attr.ib(type=Optional[float], default=None)
    achieved_pe = attr.ib(type=Optional[float], default=None)
    achieved_cost = attr.ib(type=Optional[float], default=None)

    @property
    def is_optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def objective(problem: OptimizationProblem, p_sample: float) -> float:
    """Average VIA at ``p_sample``; infinite when nothing is ever delivered."""
    rho = p_sample * problem.ch.p_s
    p, q = problem.src.p, problem.src.q
    if p * q == 0.0:
        return 0.0
    try:
        return analytics.avg_via_of_rho(problem.src, rho)
    except DivergenceError:
        return math.inf


def constraints_hold(
    problem: OptimizationProblem, p_sample: float, slack: float = SLACK
) -> bool:
    cost = problem.delta * p_sample
    pe = analytics.reconstruction_error_of_rho(problem.src, p_sample * problem.ch.p_s)
    return cost <= problem.delta_max + slack and pe <= problem.e_max + slack


def lower_bound(problem: OptimizationProblem) -> float:
    """Smallest p_sample meeting the error cap, before clamping at 0.

    Raises:
        UnreachableConstraintError if no p_sample meets the cap
    """
    problem.src.require_ergodic()
    a, b = problem.error_coefficients()
    if problem.src.p * problem.src.q == 0.0:
        # P_E is identically 0
        return 0.0
    if problem.ch.p_s == 0.0 or b == 0.0:
        if a > 0:
            raise UnreachableConstraintError(
                f"reconstruction error cannot go below {problem.e_max} "
                f"for p={problem.src.p}, q={problem.src.q}, p_s={problem.ch.p_s}"
            )
        return 0.0
    return a / (b * problem.ch.p_s)


def feasible_interval(problem: OptimizationProblem) -> Optional[Tuple[float, float]]:
    """Closed interval of admissible p_sample, or None when empty."""
    lower = max(lower_bound(problem), 0.0)
    if lower > problem.eta:
        return None
    return lower, problem.eta


def solve(problem: OptimizationProblem) -> OptimizationOutcome:
    try:
        raw_lower = lower_bound(problem)
    except UnreachableConstraintError:
        logger.debug("Error cap unreachable for %s", problem)
        raise
    interval = feasible_interval(problem)
    p, q = problem.src.p, problem.src.q
    eta = problem.eta

    if interval is None:
        return OptimizationOutcome(
            status=Status.INFEASIBLE, p_star=None, lower_bound=raw_lower
        )
    if p * q == 0.0:
        p_star = 0.0
    elif eta == 0.0 or problem.ch.p_s == 0.0:
        # nothing is ever delivered: the objective is unbounded
        return OptimizationOutcome(
            status=Status.INFEASIBLE, p_star=None, lower_bound=raw_lower
        )
    else:
        p_star = eta

    return OptimizationOutcome(
        status=Status.OPTIMAL,
        p_star=p_star,
        lower_bound=raw_lower,
        achieved_via=objective(problem, p_star),
        achieved_pe=analytics.reconstruction_error_of_rho(
            problem.src, p_star * problem.ch.p_s
        ),
        achieved_cost=problem.delta * p_star,
    )


def verify_by_grid(problem: OptimizationProblem, grid_step: float) -> bool:
    """Brute-force check of :func:`solve` on the grid
    ``{grid_step, 2 grid_step, ..., 1}``.

    The closed form is confirmed when both agree on feasibility and, if
    feasible, the grid argmin lies within ``grid_step`` of ``p_star``. A
    nonempty interval narrower than the grid spacing may hold no grid point;
    that case is accepted.
    """
    if not 0.0 < grid_step <= 0.01:
        raise InvalidParameterError("grid_step must lie in (0, 0.01]")
    outcome = solve(problem)
    n_points = int(math.floor(1.0 / grid_step + GRID_TOLERANCE))
    grid = grid_step * np.arange(1, n_points + 1)
    feasible = [
        value
        for value in grid
        if constraints_hold(problem, value, slack=GRID_TOLERANCE)
        and math.isfinite(objective(problem, value))
    ]

    if not outcome.is_optimal:
        return not feasible
    if not feasible:
        interval = feasible_interval(problem)
        assert interval is not None
        lower, upper = interval
        top = np.floor(upper / grid_step + GRID_TOLERANCE) * grid_step
        gap = top < lower or top < grid_step
        return bool(gap or outcome.p_star == 0.0)

    values = [objective(problem, value) for value in feasible]
    best = min(values)
    # flat objectives (pq = 0) tie everywhere: take the cheapest minimizer
    argmin = feasible[values.index(best)]
    assert outcome.p_star is not None
    if best < outcome.achieved_via - GRID_TOLERANCE:
        return False
    return abs(argmin - outcome.p_star) <= grid_step + GRID_TOLERANCE


@attr.s(frozen=True)
class ConstrainedComparison:
    """Constrained randomized stationary optimum against the change-aware
    policy, which is admissible only within the same budget and error cap."""

    outcome = attr.ib(type=OptimizationOutcome)
    ca_avg_via = attr.ib(type=float)
    ca_sampling_rate = attr.ib(type=float)
    ca_pe = attr.ib(type=float)
    ca_admissible = attr.ib(type=bool)
    threshold = attr.ib(type=float)

    @property
    def winner(self) -> str:
        candidates = []
        if self.outcome.is_optimal:
            assert self.outcome.achieved_via is not None
            candidates.append((self.outcome.achieved_via, 0, "rsc"))
        if self.ca_admissible:
            candidates.append((self.ca_avg_via, 1, "ca"))
        if not candidates:
            return "none"
        return min(candidates)[2]


def compare_constrained(problem: OptimizationProblem) -> ConstrainedComparison:
    ca = ChangeAwarePolicy()
    outcome = solve(problem)
    try:
        ca_via = analytics.avg_via(ca, problem.src, problem.ch)
    except DivergenceError:
        ca_via = math.inf
    ca_rate = ca.sampling_rate(problem.src, problem.ch)
    ca_pe = analytics.reconstruction_error(ca, problem.src, problem.ch)
    return ConstrainedComparison(
        outcome=outcome,
        ca_avg_via=ca_via,
        ca_sampling_rate=ca_rate,
        ca_pe=ca_pe,
        ca_admissible=(
            math.isfinite(ca_via)
            and ca_rate <= problem.eta + SLACK
            and ca_pe <= problem.e_max + SLACK
        ),
        threshold=analytics.rs_superiority_threshold(problem.src, problem.ch),
    )
