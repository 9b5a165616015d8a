# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

from __future__ import annotations

import importlib
import logging
from typing import TYPE_CHECKING, Dict

from semcom.via.exc import InvalidParameterError

if TYPE_CHECKING:
    from semcom.via.policies.base import PolicySpec

logger = logging.getLogger(__name__)


POLICY_TYPES: Dict[str, str] = {
    "randomized_stationary": ".policies.randomized.RandomizedStationaryPolicy",
    "change_aware": ".policies.change_aware.ChangeAwarePolicy",
    "semantics_aware": ".policies.semantics_aware.SemanticsAwarePolicy",
    # short names
    "rs": ".policies.randomized.RandomizedStationaryPolicy",
    "ca": ".policies.change_aware.ChangeAwarePolicy",
    "sa": ".policies.semantics_aware.SemanticsAwarePolicy",
}


def get_policy(cls: str = "randomized_stationary", **kwargs) -> "PolicySpec":
    """
    Get a sampling policy object of kind `cls` with arguments `kwargs`.

    Args:
        cls: policy kind, e.g. 'randomized_stationary' or its short name 'rs'
        kwargs: arguments to pass to the class' constructor (``p_sample`` for
          the randomized stationary policy, nothing for the others)

    Returns:
        an instance of PolicySpec

    Raises:
        InvalidParameterError if passed an unknown policy kind or arguments
        the policy does not take.

    """
    class_path = POLICY_TYPES.get(cls)
    if class_path is None:
        raise InvalidParameterError(
            f"Unknown policy kind `{cls}`. " f"Supported: {', '.join(POLICY_TYPES)}"
        )

    (module_path, class_name) = class_path.rsplit(".", 1)
    module = importlib.import_module(module_path, package=__package__)
    Policy = getattr(module, class_name)
    try:
        return Policy(**kwargs)
    except TypeError as e:
        raise InvalidParameterError(f"Invalid arguments for policy `{cls}`: {e}")
