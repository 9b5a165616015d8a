# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import attr
import numpy as np

from semcom.via.model import ChannelParams, RngHandle, SourceParams
from semcom.via.policies.base import PolicyKind, PolicySpec


@attr.s(frozen=True, slots=True)
class ChangeAwarePolicy(PolicySpec):
    """Samples exactly in the slots where the source state changed."""

    KIND = PolicyKind.CHANGE_AWARE

    def decide(self, x_now: int, x_prev: int, x_hat: int, rng: RngHandle) -> bool:
        return x_now != x_prev

    def sampling_probability(self, changed: bool, erroneous: bool) -> float:
        return 1.0 if changed else 0.0

    def sample_block(
        self,
        x: np.ndarray,
        x_prev: np.ndarray,
        success: np.ndarray,
        x_hat0: int,
        rng: RngHandle,
    ) -> np.ndarray:
        return x != x_prev

    def sampling_rate(self, src: SourceParams, ch: ChannelParams) -> float:
        src.require_ergodic()
        return 2 * src.p * src.q / (src.p + src.q)

    def delivery_probability(self, ch: ChannelParams) -> float:
        return ch.p_s
