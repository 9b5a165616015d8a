# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Two-state source, packet-drop channel and the joint per-slot system state.

A :class:`SlotState` is the snapshot of slot ``t`` once its transmission (if
any) is over: ``x`` is X(t), ``x_hat`` the receiver's estimate X̂(t),
``sampled`` and ``delivered`` what happened during slot ``t``.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Iterator, Tuple

import attr
import numpy as np

from semcom.via.exc import InvalidParameterError

if TYPE_CHECKING:
    from semcom.via.interface import SamplingPolicy

logger = logging.getLogger(__name__)

STREAMS = ("source", "sampling", "channel")
MAX_SEED = 2**64


def probability(instance, attribute, value) -> None:
    """attrs validator for fields holding a probability"""
    if not 0.0 <= value <= 1.0:
        raise InvalidParameterError(
            f"{attribute.name} must be a probability in [0, 1], got {value!r}"
        )


@attr.s(frozen=True, slots=True)
class SourceParams:
    """Transition probabilities of the two-state source: ``p`` for 0 → 1 and
    ``q`` for 1 → 0."""

    p = attr.ib(type=float, converter=float, validator=probability)
    q = attr.ib(type=float, converter=float, validator=probability)

    @property
    def is_frozen(self) -> bool:
        return self.p + self.q == 0.0

    def require_ergodic(self) -> None:
        if self.is_frozen:
            raise InvalidParameterError(
                "p = q = 0 leaves the source chain reducible; "
                "no stationary distribution is defined"
            )

    def transition_matrix(self) -> np.ndarray:
        return np.array([[1.0 - self.p, self.p], [self.q, 1.0 - self.q]])


@attr.s(frozen=True, slots=True)
class ChannelParams:
    """Success probability ``p_s`` of a transmitted sample."""

    p_s = attr.ib(type=float, converter=float, validator=probability)


@attr.s(frozen=True, slots=True)
class SlotState:
    x = attr.ib(type=int, default=0)
    x_hat = attr.ib(type=int, default=0)
    via = attr.ib(type=int, default=0)
    aoiv = attr.ib(type=int, default=0)
    aoii = attr.ib(type=int, default=0)
    sampled = attr.ib(type=bool, default=False)
    delivered = attr.ib(type=bool, default=False)

    def __attrs_post_init__(self):
        if self.x not in (0, 1) or self.x_hat not in (0, 1):
            raise InvalidParameterError(
                f"source states must be 0 or 1, got x={self.x}, x_hat={self.x_hat}"
            )
        if min(self.via, self.aoiv, self.aoii) < 0:
            raise InvalidParameterError("ages cannot be negative")
        if self.aoiv != int(self.erroneous):
            raise InvalidParameterError(
                f"aoiv must be the error indicator, got aoiv={self.aoiv} "
                f"for x={self.x}, x_hat={self.x_hat}"
            )
        if (self.aoii == 0) == self.erroneous:
            raise InvalidParameterError(
                f"aoii={self.aoii} inconsistent with x={self.x}, x_hat={self.x_hat}"
            )
        if self.delivered and not self.sampled:
            raise InvalidParameterError("a slot cannot deliver without sampling")

    @property
    def erroneous(self) -> bool:
        return self.x != self.x_hat


SYNCED_ORIGIN = SlotState()


class RngHandle:
    """Reproducible random streams for one engine.

    ``(seed, stream)`` selects a Philox key through numpy's ``SeedSequence``;
    three independent generators are spawned from it, one per purpose, so the
    source path does not depend on how many draws a policy makes.
    """

    def __init__(self, seed: int, stream: int = 0):
        if not 0 <= seed < MAX_SEED:
            raise InvalidParameterError(
                f"seed must be a 64-bit unsigned integer, got {seed}"
            )
        if stream < 0:
            raise InvalidParameterError("stream must be non-negative")
        self.seed = int(seed)
        self.stream = int(stream)
        children = np.random.SeedSequence(self.seed, spawn_key=(self.stream,)).spawn(
            len(STREAMS)
        )
        self.source, self.sampling, self.channel = (
            np.random.Generator(np.random.Philox(child)) for child in children
        )

    def __repr__(self) -> str:
        return f"RngHandle(seed={self.seed}, stream={self.stream})"


def step_source(params: SourceParams, x: int, rng: RngHandle) -> int:
    u = rng.source.random()
    if x == 0:
        return 1 if u < params.p else 0
    return 0 if u < params.q else 1


def source_stationary(params: SourceParams) -> Tuple[float, float]:
    params.require_ergodic()
    total = params.p + params.q
    return (params.q / total, params.p / total)


def step_channel(params: ChannelParams, sampled: bool, rng: RngHandle) -> bool:
    """Draw the channel outcome of one slot.

    A uniform is consumed even when nothing is sent, keeping the channel
    stream aligned with the slot index.
    """
    u = rng.channel.random()
    return bool(sampled) and u < params.p_s


def advance_slot(
    src: SourceParams,
    ch: ChannelParams,
    policy: "SamplingPolicy",
    state: SlotState,
    rng: RngHandle,
) -> SlotState:
    """Move the system from slot t to slot t + 1.

    The source moves first; the policy then decides on the new source state,
    the channel is drawn, the estimate is refreshed on delivery and the three
    ages follow their recursions.
    """
    # transition-first: a sample taken in this slot already sees X(t + 1),
    # which is the same process as sampling X(t) and moving the source last
    x_next = step_source(src, state.x, rng)
    sampled = bool(policy.decide(x_next, state.x, state.x_hat, rng))
    delivered = step_channel(ch, sampled, rng)
    x_hat = x_next if delivered else state.x_hat
    changed = int(x_next != state.x)
    erroneous = x_next != x_hat
    return SlotState(
        x=x_next,
        x_hat=x_hat,
        via=0 if delivered else state.via + changed,
        aoiv=state.aoiv + changed if erroneous else 0,
        aoii=state.aoii + 1 if erroneous else 0,
        sampled=sampled,
        delivered=delivered,
    )


class Engine:
    """Per-slot reference engine.

    Not thread-safe; give each thread its own engine and its own
    :class:`RngHandle` stream.
    """

    def __init__(
        self,
        src: SourceParams,
        ch: ChannelParams,
        policy: "SamplingPolicy",
        rng: RngHandle,
        state: SlotState = SYNCED_ORIGIN,
    ):
        self.src = src
        self.ch = ch
        self.policy = policy
        self.rng = rng
        self.state = state
        self.slot = 0

    def step(self) -> SlotState:
        self.state = advance_slot(self.src, self.ch, self.policy, self.state, self.rng)
        self.slot += 1
        return self.state

    def trajectory(self, n_slots: int) -> Iterator[SlotState]:
        for _ in range(n_slots):
            yield self.step()

    def run(self, n_slots: int) -> SlotState:
        for _ in range(n_slots):
            self.step()
        logger.debug("Engine advanced to slot %d", self.slot)
        return self.state


def forward_fill(values: np.ndarray, mask: np.ndarray, initial: int) -> np.ndarray:
    """Value of ``values`` at the last index ``<= i`` where ``mask`` holds,
    ``initial`` before the first one."""
    idx = last_index(mask)
    return np.where(idx >= 0, values[np.maximum(idx, 0)], initial)


def last_index(mask: np.ndarray) -> np.ndarray:
    """Index of the last ``True`` entry at or before each position, ``-1`` if
    none."""
    idx = np.where(mask, np.arange(len(mask)), -1)
    return np.maximum.accumulate(idx)
