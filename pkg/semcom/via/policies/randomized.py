# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import attr
import numpy as np

from semcom.via.model import ChannelParams, RngHandle, SourceParams, probability
from semcom.via.policies.base import PolicyKind, PolicySpec


@attr.s(frozen=True, slots=True)
class RandomizedStationaryPolicy(PolicySpec):
    """Samples every slot independently with probability ``p_sample``."""

    KIND = PolicyKind.RANDOMIZED_STATIONARY

    p_sample = attr.ib(type=float, converter=float, validator=probability)

    def decide(self, x_now: int, x_prev: int, x_hat: int, rng: RngHandle) -> bool:
        return rng.sampling.random() < self.p_sample

    def sampling_probability(self, changed: bool, erroneous: bool) -> float:
        return self.p_sample

    def sample_block(
        self,
        x: np.ndarray,
        x_prev: np.ndarray,
        success: np.ndarray,
        x_hat0: int,
        rng: RngHandle,
    ) -> np.ndarray:
        return rng.sampling.random(len(x)) < self.p_sample

    def sampling_rate(self, src: SourceParams, ch: ChannelParams) -> float:
        src.require_ergodic()
        return self.p_sample

    def delivery_probability(self, ch: ChannelParams) -> float:
        """Per-slot delivery probability, written ρ in the closed forms"""
        return self.p_sample * ch.p_s
