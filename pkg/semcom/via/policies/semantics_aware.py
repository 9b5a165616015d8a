# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import attr
import numpy as np

from semcom.via.model import ChannelParams, RngHandle, SourceParams, forward_fill
from semcom.via.policies.base import PolicyKind, PolicySpec


@attr.s(frozen=True, slots=True)
class SemanticsAwarePolicy(PolicySpec):
    """Samples whenever the receiver's estimate is wrong.

    The transmitter learns the estimate through instantaneous ACK/NACK
    feedback, so it knows before each transmission whether the system is
    erroneous.
    """

    KIND = PolicyKind.SEMANTICS_AWARE

    def decide(self, x_now: int, x_prev: int, x_hat: int, rng: RngHandle) -> bool:
        return x_now != x_hat

    def sampling_probability(self, changed: bool, erroneous: bool) -> float:
        return 1.0 if erroneous else 0.0

    def sample_block(
        self,
        x: np.ndarray,
        x_prev: np.ndarray,
        success: np.ndarray,
        x_hat0: int,
        rng: RngHandle,
    ) -> np.ndarray:
        # a successful slot leaves the estimate equal to the source whether or
        # not a sample was actually needed
        x_hat = forward_fill(x, success, x_hat0)
        x_hat_before = np.concatenate(([x_hat0], x_hat[:-1]))
        return x != x_hat_before

    def sampling_rate(self, src: SourceParams, ch: ChannelParams) -> float:
        # every erroneous slot samples: rate = P_E / (1 - p_s)
        src.require_ergodic()
        p, q = src.p, src.q
        return 2 * p * q / ((p + q) * (p + q + (1 - p - q) * ch.p_s))

    def delivery_probability(self, ch: ChannelParams) -> float:
        return ch.p_s
