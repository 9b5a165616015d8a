# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

from typing import TYPE_CHECKING

import numpy as np
from typing_extensions import Protocol, runtime_checkable

if TYPE_CHECKING:
    from semcom.via.model import ChannelParams, RngHandle, SourceParams


@runtime_checkable
class SamplingPolicy(Protocol):
    """
    Decision rule of the transmitter monitoring the two-state source.
    """

    def decide(self, x_now: int, x_prev: int, x_hat: int, rng: "RngHandle") -> bool:
        """Whether the transmitter samples in the current slot, given the
        source state after its transition, the state one slot before and the
        receiver's estimate before transmission."""
        ...

    def sampling_probability(self, changed: bool, erroneous: bool) -> float:
        """Probability of sampling in a slot where the source ``changed`` and
        the receiver was ``erroneous`` before transmission"""
        ...

    def sampling_rate(self, src: "SourceParams", ch: "ChannelParams") -> float:
        """Long-run fraction of sampled slots"""
        ...

    def sample_block(
        self,
        x: np.ndarray,
        x_prev: np.ndarray,
        success: np.ndarray,
        x_hat0: int,
        rng: "RngHandle",
    ) -> np.ndarray:
        """Vectorized :meth:`decide` over a block of consecutive slots.

        ``success`` holds the channel outcome each slot would have if a sample
        were sent, ``x_hat0`` the estimate just before the block.
        """
        ...

    def delivery_probability(self, ch: "ChannelParams") -> float:
        """Probability that a slot in which the policy wants to update the
        receiver ends with a delivery: ``p_sample * p_s`` for the randomized
        stationary policy, ``p_s`` for the event-triggered ones"""
        ...
