# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Explicit joint chains and a numeric stationary solver.

Chains are built by exploring, from the synced origin, every source move and
delivery outcome of a slot, using only the policies' sampling rules; nothing
here depends on :mod:`semcom.via.analytics`. Infinite age coordinates are cut
at a truncation level and overflow transitions are redirected to that level.
"""

from collections import defaultdict, deque
import logging
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Tuple

import attr
import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.csgraph import connected_components

from semcom.via.exc import (
    InvalidParameterError,
    NonConvergenceError,
    ReducibleChainError,
)
from semcom.via.model import ChannelParams, SourceParams
from semcom.via.policies import PolicyKind, PolicySpec

logger = logging.getLogger(__name__)

State = Tuple[int, ...]
Successors = Callable[[State], Iterable[Tuple[State, float]]]

ROW_TOLERANCE = 1e-12
SOLVER_TOLERANCE = 1e-13
RESIDUAL_TOLERANCE = 1e-12
MAX_ITERATIONS = 10**6
DEFAULT_TRUNCATION = 200


def _check_stochastic(instance, attribute, matrix) -> None:
    if matrix.shape != (len(instance.states), len(instance.states)):
        raise InvalidParameterError(
            f"transition matrix shape {matrix.shape} does not match "
            f"{len(instance.states)} states"
        )
    if matrix.nnz and matrix.data.min() < 0:
        raise InvalidParameterError("transition matrix has negative entries")
    rows = np.asarray(matrix.sum(axis=1)).ravel()
    worst = np.abs(rows - 1.0).max(initial=0.0)
    if worst > ROW_TOLERANCE:
        raise InvalidParameterError(f"rows must sum to 1 (worst deviation {worst:g})")


@attr.s(frozen=True, eq=False)
class FiniteChain:
    """A row-stochastic transition matrix over labelled states.

    ``labels`` names the coordinates of each state tuple, e.g.
    ``("x", "x_hat", "via")``.
    """

    states = attr.ib(type=List[State])
    labels = attr.ib(type=Tuple[str, ...])
    matrix = attr.ib(type=scipy.sparse.csr_matrix, validator=_check_stochastic)
    truncation = attr.ib(type=Optional[int], default=None)
    truncation_note = attr.ib(type=Optional[str], default=None)

    @property
    def size(self) -> int:
        return len(self.states)

    def index(self, state: State) -> int:
        return self.states.index(state)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _explore(initial: State, successors: Successors) -> Tuple[List[State], Dict]:
    """Breadth-first enumeration of the states reachable from ``initial``
    through positive-probability transitions."""
    order: Dict[State, int] = {initial: 0}
    rows: Dict[int, Dict[int, float]] = {}
    queue = deque([initial])
    while queue:
        state = queue.popleft()
        row: Dict[int, float] = defaultdict(float)
        for target, prob in successors(state):
            if prob <= 0.0:
                continue
            if target not in order:
                order[target] = len(order)
                queue.append(target)
            row[order[target]] += prob
        rows[order[state]] = row
    return list(order), rows


def _make_chain(
    initial: State,
    labels: Tuple[str, ...],
    successors: Successors,
    truncation: Optional[int] = None,
    truncation_note: Optional[str] = None,
) -> FiniteChain:
    states, rows = _explore(initial, successors)
    row_idx, col_idx, data = [], [], []
    for i, row in rows.items():
        for j, prob in row.items():
            row_idx.append(i)
            col_idx.append(j)
            data.append(prob)
    matrix = scipy.sparse.csr_matrix(
        (data, (row_idx, col_idx)), shape=(len(states), len(states))
    )
    logger.debug("Built %s chain with %d states", "/".join(labels), len(states))
    return FiniteChain(
        states=states,
        labels=labels,
        matrix=matrix,
        truncation=truncation,
        truncation_note=truncation_note,
    )


def _slot_outcomes(
    policy: PolicySpec, src: SourceParams, ch: ChannelParams, x: int, x_hat: int
) -> Iterator[Tuple[int, bool, float]]:
    """(next source state, delivered, probability) for every outcome of one
    slot."""
    moves = src.transition_matrix()
    for x_next in (0, 1):
        move = moves[x, x_next]
        if move == 0.0:
            continue
        deliver = (
            policy.sampling_probability(x_next != x, x_next != x_hat) * ch.p_s
        )
        if deliver > 0.0:
            yield x_next, True, move * deliver
        if deliver < 1.0:
            yield x_next, False, move * (1.0 - deliver)


def _tracks_estimate(policy: PolicySpec) -> bool:
    return policy.kind is PolicyKind.SEMANTICS_AWARE


def _check_truncation(truncation: int) -> None:
    if truncation < 2:
        raise InvalidParameterError("truncation level must be at least 2")


def build_via_chain(
    policy: PolicySpec,
    src: SourceParams,
    ch: ChannelParams,
    truncation: int = DEFAULT_TRUNCATION,
) -> FiniteChain:
    """Chain of (X, VIA), or (X, X̂, VIA) for policies whose decision reads
    the estimate."""
    _check_truncation(truncation)
    track = _tracks_estimate(policy)

    def successors(state: State) -> Iterator[Tuple[State, float]]:
        if track:
            x, x_hat, via = state
        else:
            (x, via), x_hat = state, state[0]
        for x_next, delivered, prob in _slot_outcomes(policy, src, ch, x, x_hat):
            if delivered:
                level, estimate = 0, x_next
            else:
                level, estimate = min(via + int(x_next != x), truncation), x_hat
            yield ((x_next, estimate, level) if track else (x_next, level)), prob

    return _make_chain(
        (0, 0, 0) if track else (0, 0),
        ("x", "x_hat", "via") if track else ("x", "via"),
        successors,
        truncation=truncation,
        truncation_note=f"VIA increments above {truncation} stay at {truncation}",
    )


def build_aoiv_chain(
    policy: PolicySpec, src: SourceParams, ch: ChannelParams
) -> FiniteChain:
    def successors(state: State) -> Iterator[Tuple[State, float]]:
        x, x_hat, aoiv = state
        for x_next, delivered, prob in _slot_outcomes(policy, src, ch, x, x_hat):
            estimate = x_next if delivered else x_hat
            if x_next == estimate:
                age = 0
            else:
                age = aoiv + int(x_next != x)
            yield (x_next, estimate, age), prob

    return _make_chain((0, 0, 0), ("x", "x_hat", "aoiv"), successors)


def build_recon_chain(
    policy: PolicySpec, src: SourceParams, ch: ChannelParams
) -> FiniteChain:
    def successors(state: State) -> Iterator[Tuple[State, float]]:
        x, x_hat = state
        for x_next, delivered, prob in _slot_outcomes(policy, src, ch, x, x_hat):
            yield (x_next, x_next if delivered else x_hat), prob

    return _make_chain((0, 0), ("x", "x_hat"), successors)


def build_aoii_chain(
    policy: PolicySpec,
    src: SourceParams,
    ch: ChannelParams,
    truncation: int = DEFAULT_TRUNCATION,
) -> FiniteChain:
    _check_truncation(truncation)

    def successors(state: State) -> Iterator[Tuple[State, float]]:
        x, x_hat, aoii = state
        for x_next, delivered, prob in _slot_outcomes(policy, src, ch, x, x_hat):
            estimate = x_next if delivered else x_hat
            age = 0 if x_next == estimate else min(aoii + 1, truncation)
            yield (x_next, estimate, age), prob

    return _make_chain(
        (0, 0, 0),
        ("x", "x_hat", "aoii"),
        successors,
        truncation=truncation,
        truncation_note=f"AoII above {truncation} stays at {truncation}",
    )


def closed_classes(chain: FiniteChain) -> List[np.ndarray]:
    """State indices of every closed communicating class."""
    n_classes, labels = connected_components(
        chain.matrix, directed=True, connection="strong"
    )
    coo = chain.matrix.tocoo()
    positive = coo.data > 0
    leaving = labels[coo.row[positive]] != labels[coo.col[positive]]
    open_classes = set(labels[coo.row[positive][leaving]].tolist())
    return [
        np.flatnonzero(labels == c) for c in range(n_classes) if c not in open_classes
    ]


def _residual(matrix: scipy.sparse.csr_matrix, pi: np.ndarray) -> float:
    return float(np.abs(matrix.T @ pi - pi).max())


def _solve_linear(matrix: scipy.sparse.csr_matrix) -> np.ndarray:
    n = matrix.shape[0]
    system = matrix.T.toarray() - np.eye(n)
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = scipy.linalg.solve(system, rhs)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _solve_power(
    matrix: scipy.sparse.csr_matrix, tolerance: float, max_iterations: int
) -> np.ndarray:
    # the lazy chain (I + P) / 2 shares the stationary law and is aperiodic
    transposed = matrix.T.tocsr()
    pi = np.full(matrix.shape[0], 1.0 / matrix.shape[0])
    for iteration in range(max_iterations):
        step = transposed @ pi
        if np.abs(step - pi).max() < tolerance:
            logger.debug("Power iteration converged after %d steps", iteration)
            return step / step.sum()
        pi = 0.5 * (pi + step)
    raise NonConvergenceError(
        f"power iteration did not reach residual {tolerance:g} "
        f"after {max_iterations} steps"
    )


def stationary(
    chain: FiniteChain,
    tolerance: float = SOLVER_TOLERANCE,
    max_iterations: int = MAX_ITERATIONS,
) -> np.ndarray:
    """Stationary probability vector of ``chain``, indexed like its states.

    Small exact chains are solved directly; truncated chains by power
    iteration.

    Raises:
        ReducibleChainError if the chain has several closed classes
        NonConvergenceError if the iteration cap is hit or the final residual
          exceeds 1e-12
    """
    classes = closed_classes(chain)
    if len(classes) > 1:
        raise ReducibleChainError(
            f"chain over {'/'.join(chain.labels)} has {len(classes)} closed classes"
        )
    if chain.truncation is None:
        pi = _solve_linear(chain.matrix)
    else:
        pi = _solve_power(chain.matrix, tolerance, max_iterations)
    residual = _residual(chain.matrix, pi)
    if residual >= RESIDUAL_TOLERANCE:
        raise NonConvergenceError(f"stationary residual {residual:g} too large")
    return pi


def marginal(
    chain: FiniteChain, pi: np.ndarray, *labels: str
) -> Dict[Tuple[int, ...], float]:
    """Stationary mass aggregated over the coordinates named by ``labels``."""
    positions = [chain.labels.index(label) for label in labels]
    totals: Dict[Tuple[int, ...], float] = defaultdict(float)
    for state, mass in zip(chain.states, pi):
        totals[tuple(state[i] for i in positions)] += float(mass)
    return dict(totals)


def expectation(chain: FiniteChain, pi: np.ndarray, label: str) -> float:
    position = chain.labels.index(label)
    values = np.array([state[position] for state in chain.states], dtype=float)
    return float(values @ pi)


def via_table(chain: FiniteChain, pi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(Pr[X=0, VIA=i], Pr[X=1, VIA=i]) for ``i <= chain.truncation``."""
    assert chain.truncation is not None
    levels = np.zeros((2, chain.truncation + 1))
    for (x, via), mass in marginal(chain, pi, "x", "via").items():
        levels[x, via] += mass
    return levels[0], levels[1]


def age_pmf(chain: FiniteChain, pi: np.ndarray, label: str) -> np.ndarray:
    assert chain.truncation is not None
    pmf = np.zeros(chain.truncation + 1)
    for (age,), mass in marginal(chain, pi, label).items():
        pmf[age] += mass
    return pmf


def aoiv_table(chain: FiniteChain, pi: np.ndarray) -> Dict[Tuple[int, int, int], float]:
    """Law of (X, X̂, AoIV) over all of {0, 1}³, zero where unreachable."""
    table = {(i, j, k): 0.0 for i in (0, 1) for j in (0, 1) for k in (0, 1)}
    table.update(marginal(chain, pi, "x", "x_hat", "aoiv"))
    return table


def recon_table(chain: FiniteChain, pi: np.ndarray) -> Dict[Tuple[int, int], float]:
    table = {(i, j): 0.0 for i in (0, 1) for j in (0, 1)}
    table.update(marginal(chain, pi, "x", "x_hat"))
    return table


def numeric_avg_via(
    policy: PolicySpec,
    src: SourceParams,
    ch: ChannelParams,
    truncation: int = DEFAULT_TRUNCATION,
) -> float:
    """Average VIA of the truncated chain; the reference value for policies
    without a closed form."""
    chain = build_via_chain(policy, src, ch, truncation)
    return expectation(chain, stationary(chain), "via")
