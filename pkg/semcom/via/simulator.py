# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Monte Carlo estimation of the long-run metrics.

The kernel processes blocks of slots with numpy while consuming exactly the
draws :func:`semcom.via.model.advance_slot` would consume slot by slot, so
for equal seeds it reproduces the per-slot engine's trajectory.

The source path of a block is recovered without a Python loop: each slot maps
the previous state through one of four maps (keep, toggle, set 0, set 1); the
state after slot k is the value set by the last constant map XOR the parity of
the toggles since.
"""

import logging
import math
from multiprocessing.dummy import Pool as ThreadPool
from typing import Dict, List, Optional, Sequence, Tuple

import attr
import numpy as np

from semcom.via.exc import InvalidParameterError
from semcom.via.model import (
    SYNCED_ORIGIN,
    ChannelParams,
    RngHandle,
    SlotState,
    SourceParams,
    forward_fill,
    last_index,
)
from semcom.via.policies import PolicySpec

logger = logging.getLogger(__name__)

DEFAULT_HORIZON = 10**7
DEFAULT_BURN_IN = 10**4
DEFAULT_HISTOGRAM_CAP = 64
DEFAULT_BATCHES = 32
BLOCK_SIZE = 2**18
CONFIDENCE_Z = 1.959963984540054

METRICS = ("avg_via", "avg_aoiv", "avg_aoii", "empirical_pe", "sampling_rate")


def _positive(instance, attribute, value) -> None:
    if value < 1:
        raise InvalidParameterError(f"{attribute.name} must be at least 1")


@attr.s(frozen=True)
class SimulationConfig:
    src = attr.ib(type=SourceParams)
    ch = attr.ib(type=ChannelParams)
    policy = attr.ib(type=PolicySpec)
    horizon = attr.ib(type=int, default=DEFAULT_HORIZON, validator=_positive)
    burn_in = attr.ib(type=int, default=DEFAULT_BURN_IN)
    seed = attr.ib(type=int, default=0)
    stream = attr.ib(type=int, default=0)
    histogram_cap = attr.ib(
        type=int, default=DEFAULT_HISTOGRAM_CAP, validator=_positive
    )
    batches = attr.ib(type=int, default=DEFAULT_BATCHES, validator=_positive)

    @burn_in.validator
    def _check_burn_in(self, attribute, value):
        if not 0 <= value < self.horizon:
            raise InvalidParameterError(
                f"burn_in must lie in [0, horizon), got {value} for "
                f"horizon {self.horizon}"
            )

    @property
    def slots_counted(self) -> int:
        return self.horizon - self.burn_in


@attr.s(frozen=True)
class SimulationReport:
    avg_via = attr.ib(type=float)
    avg_aoiv = attr.ib(type=float)
    avg_aoii = attr.ib(type=float)
    empirical_pe = attr.ib(type=float)
    sampling_rate = attr.ib(type=float)
    delivery_rate = attr.ib(type=float)
    via_hist = attr.ib(type=Tuple[int, ...])
    aoii_hist = attr.ib(type=Tuple[int, ...])
    slots_counted = attr.ib(type=int)
    stderr = attr.ib(type=Dict[str, float])
    final_state = attr.ib(type=SlotState)

    def metric(self, name: str) -> float:
        return getattr(self, name)


@attr.s(frozen=True, eq=False)
class Trajectory:
    """Per-slot arrays of a simulated path, slot 1 first."""

    x = attr.ib(type=np.ndarray)
    x_hat = attr.ib(type=np.ndarray)
    via = attr.ib(type=np.ndarray)
    aoiv = attr.ib(type=np.ndarray)
    aoii = attr.ib(type=np.ndarray)
    sampled = attr.ib(type=np.ndarray)
    delivered = attr.ib(type=np.ndarray)

    def __len__(self) -> int:
        return len(self.x)

    def states(self) -> List[SlotState]:
        return [
            SlotState(
                x=int(self.x[k]),
                x_hat=int(self.x_hat[k]),
                via=int(self.via[k]),
                aoiv=int(self.aoiv[k]),
                aoii=int(self.aoii[k]),
                sampled=bool(self.sampled[k]),
                delivered=bool(self.delivered[k]),
            )
            for k in range(len(self))
        ]


def _source_block(src: SourceParams, x0: int, u: np.ndarray) -> np.ndarray:
    up = u < src.p
    down = u < src.q
    constant = up != down
    toggles = np.cumsum(up & down)
    anchor = last_index(constant)
    anchored = anchor >= 0
    at = np.maximum(anchor, 0)
    base = np.where(anchored, up[at].astype(np.int64), x0)
    flips = toggles - np.where(anchored, toggles[at], 0)
    return base ^ (flips & 1)


def _block(
    config: SimulationConfig, rng: RngHandle, state: SlotState, n: int
) -> Trajectory:
    x = _source_block(config.src, state.x, rng.source.random(n))
    x_prev = np.concatenate(([state.x], x[:-1]))
    success = rng.channel.random(n) < config.ch.p_s
    sampled = np.asarray(
        config.policy.sample_block(x, x_prev, success, state.x_hat, rng), dtype=bool
    )
    delivered = sampled & success
    x_hat = forward_fill(x, delivered, state.x_hat)
    erroneous = x != x_hat

    changes = np.cumsum(x != x_prev)
    last_delivery = last_index(delivered)
    via = np.where(
        last_delivery >= 0,
        changes - changes[np.maximum(last_delivery, 0)],
        state.via + changes,
    )
    slots = np.arange(n)
    last_sync = last_index(~erroneous)
    aoii = np.where(last_sync >= 0, slots - last_sync, state.aoii + slots + 1)
    return Trajectory(
        x=x,
        x_hat=x_hat,
        via=via,
        aoiv=erroneous.astype(np.int64),
        aoii=aoii,
        sampled=sampled,
        delivered=delivered,
    )


def _last_state(block: Trajectory) -> SlotState:
    return SlotState(
        x=int(block.x[-1]),
        x_hat=int(block.x_hat[-1]),
        via=int(block.via[-1]),
        aoiv=int(block.aoiv[-1]),
        aoii=int(block.aoii[-1]),
        sampled=bool(block.sampled[-1]),
        delivered=bool(block.delivered[-1]),
    )


def _blocks(size: int):
    while size > 0:
        n = min(size, BLOCK_SIZE)
        yield n
        size -= n


def trajectory(
    config: SimulationConfig, n_slots: int, state: SlotState = SYNCED_ORIGIN
) -> Trajectory:
    """The first ``n_slots`` slots of the path selected by ``config``'s seed
    and stream, burn-in included."""
    rng = RngHandle(config.seed, config.stream)
    parts = []
    for n in _blocks(n_slots):
        block = _block(config, rng, state, n)
        state = _last_state(block)
        parts.append(block)
    return Trajectory(
        *(
            np.concatenate([getattr(part, field.name) for part in parts])
            for field in attr.fields(Trajectory)
        )
    )


class _Accumulator:
    """Exact running sums plus capped histograms for the counted slots."""

    def __init__(self, cap: int):
        self.cap = cap
        self.slots = 0
        self.sums = dict.fromkeys(
            ("via", "aoiv", "aoii", "erroneous", "sampled", "delivered"), 0
        )
        self.via_hist = np.zeros(cap + 1, dtype=np.int64)
        self.aoii_hist = np.zeros(cap + 1, dtype=np.int64)

    def add(self, block: Trajectory) -> None:
        self.slots += len(block)
        self.sums["via"] += int(block.via.sum())
        self.sums["aoiv"] += int(block.aoiv.sum())
        self.sums["aoii"] += int(block.aoii.sum())
        self.sums["erroneous"] += int(np.count_nonzero(block.x != block.x_hat))
        self.sums["sampled"] += int(np.count_nonzero(block.sampled))
        self.sums["delivered"] += int(np.count_nonzero(block.delivered))
        self.via_hist += np.bincount(
            np.minimum(block.via, self.cap), minlength=self.cap + 1
        )
        self.aoii_hist += np.bincount(
            np.minimum(block.aoii, self.cap), minlength=self.cap + 1
        )

    def means(self) -> Dict[str, float]:
        n = self.slots
        return {
            "avg_via": self.sums["via"] / n,
            "avg_aoiv": self.sums["aoiv"] / n,
            "avg_aoii": self.sums["aoii"] / n,
            "empirical_pe": self.sums["erroneous"] / n,
            "sampling_rate": self.sums["sampled"] / n,
            "delivery_rate": self.sums["delivered"] / n,
        }


def _batch_bounds(total: int, batches: int) -> List[int]:
    batches = min(batches, total)
    return [total * b // batches for b in range(batches + 1)]


def _stderr(batch_means: List[Dict[str, float]]) -> Dict[str, float]:
    if len(batch_means) < 2:
        return {name: math.nan for name in METRICS}
    return {
        name: float(
            np.std([means[name] for means in batch_means], ddof=1)
            / math.sqrt(len(batch_means))
        )
        for name in METRICS
    }


def run(config: SimulationConfig) -> SimulationReport:
    """Simulate ``config.horizon`` slots from the synced origin and estimate
    every long-run metric over the slots after burn-in.

    Standard errors use batch means over ``config.batches`` consecutive
    batches of the counted slots.
    """
    rng = RngHandle(config.seed, config.stream)
    state = SYNCED_ORIGIN
    for n in _blocks(config.burn_in):
        state = _last_state(_block(config, rng, state, n))

    total = _Accumulator(config.histogram_cap)
    batch_means = []
    bounds = _batch_bounds(config.slots_counted, config.batches)
    for start, stop in zip(bounds, bounds[1:]):
        batch = _Accumulator(config.histogram_cap)
        for n in _blocks(stop - start):
            block = _block(config, rng, state, n)
            state = _last_state(block)
            batch.add(block)
            total.add(block)
        batch_means.append(batch.means())

    means = total.means()
    logger.debug(
        "Simulated %s at p=%s q=%s p_s=%s: %d slots counted",
        config.policy.kind.value,
        config.src.p,
        config.src.q,
        config.ch.p_s,
        total.slots,
    )
    return SimulationReport(
        via_hist=tuple(int(c) for c in total.via_hist),
        aoii_hist=tuple(int(c) for c in total.aoii_hist),
        slots_counted=total.slots,
        stderr=_stderr(batch_means),
        final_state=state,
        **means,
    )


@attr.s(frozen=True)
class MetricSummary:
    mean = attr.ib(type=float)
    std = attr.ib(type=float)
    ci_low = attr.ib(type=float)
    ci_high = attr.ib(type=float)

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


@attr.s(frozen=True)
class ReplicatedReport:
    seeds = attr.ib(type=Tuple[int, ...])
    summaries = attr.ib(type=Dict[str, MetricSummary])
    reports = attr.ib(type=Tuple[SimulationReport, ...])

    @property
    def n_reps(self) -> int:
        return len(self.reports)

    def __getitem__(self, metric: str) -> MetricSummary:
        return self.summaries[metric]


def replication_seeds(seed: int, n_reps: int) -> List[int]:
    """Independent 64-bit seeds derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n_reps)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def summarize(values: Sequence[float]) -> MetricSummary:
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1))
    half_width = CONFIDENCE_Z * std / math.sqrt(len(values))
    return MetricSummary(
        mean=mean, std=std, ci_low=mean - half_width, ci_high=mean + half_width
    )


def run_replicated(
    config: SimulationConfig,
    n_reps: int,
    seeds: Optional[Sequence[int]] = None,
    jobs: int = 1,
) -> ReplicatedReport:
    """Run ``n_reps`` independent replications and summarize each metric with
    its mean, sample standard deviation and 95% normal confidence interval.

    ``seeds`` overrides the seeds derived from ``config.seed``.
    """
    if n_reps < 2:
        raise InvalidParameterError("at least two replications are needed")
    if seeds is None:
        seeds = replication_seeds(config.seed, n_reps)
    elif len(seeds) != n_reps:
        raise InvalidParameterError(f"expected {n_reps} seeds, got {len(seeds)}")

    configs = [attr.evolve(config, seed=seed) for seed in seeds]
    if jobs > 1:
        with ThreadPool(jobs) as pool:
            reports = pool.map(run, configs)
    else:
        reports = [run(c) for c in configs]

    summaries = {
        name: summarize([report.metric(name) for report in reports])
        for name in METRICS
    }
    return ReplicatedReport(
        seeds=tuple(seeds), summaries=summaries, reports=tuple(reports)
    )


def total_variation(
    hist: Sequence[int], pmf: np.ndarray, tail_mass: float = 0.0
) -> float:
    """Total-variation distance between a capped histogram (last bucket holds
    every value >= its index) and a reference pmf with its tail mass."""
    counts = np.asarray(hist, dtype=float)
    empirical = counts / counts.sum()
    cap = len(counts) - 1
    reference = np.zeros(cap + 1)
    head = min(cap, len(pmf))
    reference[:head] = pmf[:head]
    reference[cap] = float(np.sum(pmf[cap:])) + tail_mass
    return 0.5 * float(np.abs(empirical - reference).sum())
