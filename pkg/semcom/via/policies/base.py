# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import abc
import enum
from typing import ClassVar

import numpy as np

from semcom.via.model import ChannelParams, RngHandle, SourceParams


class PolicyKind(enum.Enum):
    RANDOMIZED_STATIONARY = "randomized_stationary"
    CHANGE_AWARE = "change_aware"
    SEMANTICS_AWARE = "semantics_aware"

    @property
    def short_name(self) -> str:
        return _SHORT_NAMES[self]


_SHORT_NAMES = {
    PolicyKind.RANDOMIZED_STATIONARY: "rs",
    PolicyKind.CHANGE_AWARE: "ca",
    PolicyKind.SEMANTICS_AWARE: "sa",
}


class PolicySpec(metaclass=abc.ABCMeta):
    """Abstract base class of the sampling policies

    To define a new policy, inherit from this class and override:
    - KIND: the :class:`PolicyKind` it implements
    - decide(), sampling_probability(), sample_block(), sampling_rate()
      and delivery_probability()

    Implementations are immutable value objects; all randomness comes from the
    :class:`RngHandle` passed in, so one instance can be shared by any number
    of engines.
    """

    KIND: ClassVar[PolicyKind]

    @property
    def kind(self) -> PolicyKind:
        return self.KIND

    @abc.abstractmethod
    def decide(self, x_now: int, x_prev: int, x_hat: int, rng: RngHandle) -> bool:
        raise NotImplementedError

    @abc.abstractmethod
    def sampling_probability(self, changed: bool, erroneous: bool) -> float:
        raise NotImplementedError

    @abc.abstractmethod
    def sample_block(
        self,
        x: np.ndarray,
        x_prev: np.ndarray,
        success: np.ndarray,
        x_hat0: int,
        rng: RngHandle,
    ) -> np.ndarray:
        raise NotImplementedError

    @abc.abstractmethod
    def sampling_rate(self, src: SourceParams, ch: ChannelParams) -> float:
        raise NotImplementedError

    @abc.abstractmethod
    def delivery_probability(self, ch: ChannelParams) -> float:
        """Probability that a slot in which the policy wants to update the
        receiver ends with a delivery."""
        raise NotImplementedError
