# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

from typing import Dict, List, Type

from semcom.via.exc import InvalidParameterError
from semcom.via.model import ChannelParams, RngHandle, SourceParams
from semcom.via.policies.base import PolicyKind, PolicySpec
from semcom.via.policies.change_aware import ChangeAwarePolicy
from semcom.via.policies.randomized import RandomizedStationaryPolicy
from semcom.via.policies.semantics_aware import SemanticsAwarePolicy

_POLICY_CLS: List[Type[PolicySpec]] = [
    RandomizedStationaryPolicy,
    ChangeAwarePolicy,
    SemanticsAwarePolicy,
]
POLICY_TYPES: Dict[PolicyKind, Type[PolicySpec]] = {
    cls.KIND: cls for cls in _POLICY_CLS
}

__all__ = [
    "ChangeAwarePolicy",
    "POLICY_TYPES",
    "PolicyKind",
    "PolicySpec",
    "RandomizedStationaryPolicy",
    "SemanticsAwarePolicy",
    "decide",
    "get_policy_cls",
    "sampling_rate",
]


def get_policy_cls(kind: PolicyKind) -> Type[PolicySpec]:
    try:
        return POLICY_TYPES[kind]
    except KeyError:
        raise InvalidParameterError(f"{kind} is not a valid policy kind.") from None


def decide(
    policy: PolicySpec, x_now: int, x_prev: int, x_hat: int, rng: RngHandle
) -> bool:
    """Sampling decision of ``policy`` for one slot.

    Raises:
        InvalidParameterError if a source state is not 0 or 1
    """
    if {x_now, x_prev, x_hat} - {0, 1}:
        raise InvalidParameterError(
            f"source states must be 0 or 1, got {(x_now, x_prev, x_hat)}"
        )
    return bool(policy.decide(x_now, x_prev, x_hat, rng))


def sampling_rate(policy: PolicySpec, src: SourceParams, ch: ChannelParams) -> float:
    """Long-run fraction of slots in which ``policy`` samples."""
    return policy.sampling_rate(src, ch)
