# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import math

import attr
from hypothesis import given, settings
from hypothesis import strategies as st
import pytest

from semcom.via import optimizer
from semcom.via.exc import InvalidParameterError, UnreachableConstraintError
from semcom.via.model import ChannelParams, SourceParams
from semcom.via.optimizer import (
    ConstrainedComparison,
    OptimizationProblem,
    Status,
)
from semcom.via.tests.via_testing import channels, sources


def _problem(p=0.3, q=0.3, p_s=0.8, eta=0.5, e_max=0.5, delta=1.0):
    return OptimizationProblem.from_ratio(
        SourceParams(p, q), ChannelParams(p_s), eta=eta, e_max=e_max, delta=delta
    )


@st.composite
def problems(draw):
    return OptimizationProblem.from_ratio(
        draw(sources()),
        draw(channels()),
        eta=draw(st.floats(min_value=0.0, max_value=1.0)),
        e_max=draw(st.floats(min_value=0.0, max_value=1.0, exclude_min=True)),
        delta=draw(st.floats(min_value=0.1, max_value=10.0)),
    )


@pytest.mark.parametrize(
    "kwargs,match",
    [
        ({"delta": 0.0, "delta_max": 0.0, "e_max": 0.5}, "delta must be positive"),
        ({"delta": 1.0, "delta_max": -0.1, "e_max": 0.5}, "delta_max"),
        ({"delta": 1.0, "delta_max": 2.0, "e_max": 0.5}, "must not exceed 1"),
        ({"delta": 1.0, "delta_max": 0.5, "e_max": 0.0}, "e_max"),
        ({"delta": 1.0, "delta_max": 0.5, "e_max": 1.5}, "e_max"),
    ],
)
def test_problem_invalid(src, ch, kwargs, match):
    with pytest.raises(InvalidParameterError, match=match):
        OptimizationProblem(src=src, ch=ch, **kwargs)


def test_problem_eta():
    problem = OptimizationProblem(
        src=SourceParams(0.3, 0.3),
        ch=ChannelParams(0.8),
        delta=0.2,
        delta_max=0.1,
        e_max=0.5,
    )
    assert problem.eta == pytest.approx(0.5)
    a, b = problem.error_coefficients()
    assert a == pytest.approx(0.0)
    assert b == pytest.approx(0.3)


def test_feasible_interval_examples():
    assert optimizer.feasible_interval(_problem()) == pytest.approx((0.0, 0.5))
    infeasible = _problem(p=0.45, q=0.45, p_s=0.5, eta=0.2, e_max=0.1)
    assert optimizer.lower_bound(infeasible) == pytest.approx(0.324 / 0.207)
    assert optimizer.feasible_interval(infeasible) is None
    slack = _problem(eta=0.7, e_max=1.0)
    assert optimizer.lower_bound(slack) < 0
    assert optimizer.feasible_interval(slack) == (0.0, 0.7)


def test_solve_optimal():
    outcome = optimizer.solve(_problem())
    assert outcome.status is Status.OPTIMAL
    assert outcome.is_optimal
    assert outcome.p_star == 0.5
    assert outcome.lower_bound == pytest.approx(0.0)
    assert outcome.achieved_via == pytest.approx(0.45, rel=1e-12)
    assert outcome.achieved_pe == pytest.approx(0.108 / 0.456, rel=1e-12)
    assert outcome.achieved_cost == pytest.approx(0.5)


def test_solve_infeasible():
    outcome = optimizer.solve(_problem(p=0.45, q=0.45, p_s=0.5, eta=0.2, e_max=0.1))
    assert outcome.status is Status.INFEASIBLE
    assert outcome.p_star is None
    assert outcome.lower_bound == pytest.approx(0.324 / 0.207)
    assert outcome.achieved_via is None


def test_solve_unconstrained():
    outcome = optimizer.solve(_problem(eta=1.0, e_max=1.0))
    assert outcome.p_star == 1.0
    assert outcome.achieved_via == pytest.approx(2 * 0.09 * 0.2 / (0.6 * 0.8))


def test_solve_zero_budget_diverges():
    outcome = optimizer.solve(_problem(eta=0.0, e_max=1.0))
    assert outcome.status is Status.INFEASIBLE


def test_solve_frozen_component():
    # the source never leaves 0 once there: VIA and the error stay 0
    outcome = optimizer.solve(_problem(p=0.0, q=0.4, eta=0.3, e_max=0.01))
    assert outcome.status is Status.OPTIMAL
    assert outcome.p_star == 0.0
    assert outcome.achieved_via == 0.0
    assert outcome.achieved_pe == 0.0
    assert outcome.achieved_cost == 0.0


def test_solve_lossy_channel():
    with pytest.raises(UnreachableConstraintError, match="cannot go below"):
        optimizer.solve(_problem(p_s=0.0, e_max=0.1))
    # a loose error cap is met without deliveries, but the VIA diverges
    outcome = optimizer.solve(_problem(p_s=0.0, e_max=0.6))
    assert outcome.status is Status.INFEASIBLE
    assert outcome.lower_bound == 0.0


def test_objective():
    problem = _problem()
    assert optimizer.objective(problem, 0.5) == pytest.approx(0.45)
    assert optimizer.objective(problem, 0.0) == math.inf
    assert optimizer.objective(_problem(p=0.0), 0.0) == 0.0


def test_constraints_hold():
    problem = _problem(eta=0.5, e_max=0.3)
    assert optimizer.constraints_hold(problem, 0.5)
    assert not optimizer.constraints_hold(problem, 0.6)
    # low sampling breaks the error cap
    assert not optimizer.constraints_hold(problem, 0.05)


@pytest.mark.parametrize(
    "problem",
    [
        _problem(),
        _problem(p=0.45, q=0.45, p_s=0.5, eta=0.2, e_max=0.1),
        _problem(eta=1.0, e_max=1.0),
    ],
)
def test_verify_by_grid_examples(problem):
    assert optimizer.verify_by_grid(problem, 0.001)


def test_verify_by_grid_budget_below_step():
    assert optimizer.verify_by_grid(_problem(eta=0.004, e_max=1.0), 0.01)


def test_verify_by_grid_detects_wrong_optimum(mocker):
    problem = _problem()
    wrong = attr.evolve(optimizer.solve(problem), p_star=0.25)
    mocker.patch.object(optimizer, "solve", return_value=wrong)
    assert not optimizer.verify_by_grid(problem, 0.01)


@pytest.mark.parametrize("step", [0.0, 0.02, -0.001])
def test_verify_by_grid_step_range(step):
    with pytest.raises(InvalidParameterError, match="grid_step"):
        optimizer.verify_by_grid(_problem(), step)


@given(problems())
@settings(max_examples=1000, deadline=None)
def test_solve_agrees_with_grid(problem):
    assert optimizer.verify_by_grid(problem, 0.01)


@pytest.mark.slow
@given(problems())
@settings(max_examples=1000, deadline=None)
def test_solve_agrees_with_fine_grid(problem):
    assert optimizer.verify_by_grid(problem, 1e-4)


@given(problems())
@settings(max_examples=1000, deadline=None)
def test_optimal_outcomes_meet_constraints(problem):
    outcome = optimizer.solve(problem)
    if not outcome.is_optimal:
        return
    assert max(outcome.lower_bound, 0.0) <= outcome.p_star == problem.eta
    assert optimizer.constraints_hold(problem, outcome.p_star)
    assert outcome.achieved_pe <= problem.e_max + optimizer.SLACK
    assert outcome.achieved_cost <= problem.delta_max + optimizer.SLACK


@pytest.mark.parametrize(
    "p,winner",
    [(0.3, "ca"), (0.1, "rsc"), (0.9, "rsc")],
)
def test_compare_constrained_regions(p, winner):
    comparison = optimizer.compare_constrained(_problem(p=p, q=p, p_s=0.7))
    assert comparison.winner == winner


def test_compare_constrained_ca_over_budget():
    comparison = optimizer.compare_constrained(_problem(p=0.9, q=0.9, p_s=0.7))
    assert comparison.ca_sampling_rate == pytest.approx(0.9)
    assert not comparison.ca_admissible
    assert comparison.threshold == pytest.approx(
        1.62 / (1.8 + (1.62 - 1.8) * 0.7), rel=1e-12
    )


def test_compare_constrained_nothing_admissible():
    comparison = optimizer.compare_constrained(
        _problem(p=0.45, q=0.45, p_s=0.5, eta=0.2, e_max=0.1)
    )
    assert comparison.winner == "none"


def test_comparison_tie_goes_to_randomized():
    outcome = optimizer.solve(_problem())
    comparison = ConstrainedComparison(
        outcome=outcome,
        ca_avg_via=outcome.achieved_via,
        ca_sampling_rate=0.1,
        ca_pe=0.1,
        ca_admissible=True,
        threshold=0.5,
    )
    assert comparison.winner == "rsc"
