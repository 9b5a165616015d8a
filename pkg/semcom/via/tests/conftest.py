# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import pytest
import yaml

from semcom.via.model import ChannelParams, RngHandle, SourceParams
from semcom.via.policies import (
    ChangeAwarePolicy,
    RandomizedStationaryPolicy,
    SemanticsAwarePolicy,
)

TEST_SEED = 20260417


@pytest.fixture
def src() -> SourceParams:
    return SourceParams(p=0.3, q=0.3)


@pytest.fixture
def ch() -> ChannelParams:
    return ChannelParams(p_s=0.8)


@pytest.fixture
def rs_policy() -> RandomizedStationaryPolicy:
    return RandomizedStationaryPolicy(p_sample=0.5)


@pytest.fixture
def ca_policy() -> ChangeAwarePolicy:
    return ChangeAwarePolicy()


@pytest.fixture
def sa_policy() -> SemanticsAwarePolicy:
    return SemanticsAwarePolicy()


@pytest.fixture(params=["rs", "ca", "sa"])
def policy(request):
    return {
        "rs": RandomizedStationaryPolicy(p_sample=0.5),
        "ca": ChangeAwarePolicy(),
        "sa": SemanticsAwarePolicy(),
    }[request.param]


@pytest.fixture
def rng() -> RngHandle:
    return RngHandle(TEST_SEED)


@pytest.fixture
def small_config():
    """A quick experiment configuration: a 2x2 grid, short simulations."""
    return {
        "grid": {"p": [0.2, 0.4], "q": [0.3, 0.5], "p_s": [0.7]},
        "simulation": {
            "horizon": 200_000,
            "burn_in": 1_000,
            "seed": 7,
            "batches": 20,
        },
        "validation": {
            "mc_relative_tolerance": 0.05,
            "mc_stderr_factor": 5,
            "truncation": 300,
        },
    }


@pytest.fixture
def config_path(tmp_path, small_config):
    path = tmp_path / "via.yml"
    path.write_text(yaml.safe_dump(small_config))
    return str(path)
