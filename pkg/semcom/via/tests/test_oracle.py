# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import itertools

import numpy as np
import pytest
import scipy.sparse

from semcom.via import analytics, oracle
from semcom.via.exc import InvalidParameterError, ReducibleChainError
from semcom.via.model import ChannelParams, SourceParams
from semcom.via.policies import (
    ChangeAwarePolicy,
    RandomizedStationaryPolicy,
    SemanticsAwarePolicy,
)

FINITE = 1e-12
TRUNCATED = 1e-9

GRID = list(
    itertools.product(
        [0.1, 0.3, 0.5, 0.7, 0.9], [0.1, 0.3, 0.5, 0.7, 0.9], [0.3, 0.6, 0.9]
    )
)
POLICIES = [RandomizedStationaryPolicy(0.5), ChangeAwarePolicy(), SemanticsAwarePolicy()]


def _chain(states, rows, labels=("x",)):
    return oracle.FiniteChain(
        states=states, labels=labels, matrix=scipy.sparse.csr_matrix(rows)
    )


def test_finite_chain_validation():
    with pytest.raises(InvalidParameterError, match="sum to 1"):
        _chain([(0,), (1,)], [[0.5, 0.4], [0.0, 1.0]])
    with pytest.raises(InvalidParameterError, match="negative"):
        _chain([(0,), (1,)], [[1.5, -0.5], [0.0, 1.0]])
    with pytest.raises(InvalidParameterError, match="shape"):
        _chain([(0,)], [[0.5, 0.5], [0.5, 0.5]])


def test_stationary_two_state_source():
    src = SourceParams(0.1, 0.4)
    chain = _chain([(0,), (1,)], src.transition_matrix())
    np.testing.assert_allclose(oracle.stationary(chain), [0.8, 0.2], atol=FINITE)


def test_stationary_identity_is_reducible():
    chain = _chain([(0,), (1,)], np.eye(2))
    assert len(oracle.closed_classes(chain)) == 2
    with pytest.raises(ReducibleChainError, match="2 closed classes"):
        oracle.stationary(chain)


def test_change_aware_reducible_without_returns():
    # once the source sits at 1 with a stale estimate, nothing changes again
    chain = oracle.build_recon_chain(
        ChangeAwarePolicy(), SourceParams(0.4, 0.0), ChannelParams(0.5)
    )
    with pytest.raises(ReducibleChainError):
        oracle.stationary(chain)


@pytest.mark.parametrize("policy", POLICIES, ids=lambda p: p.kind.short_name)
def test_built_chains_are_stochastic(policy, src, ch):
    chains = [
        oracle.build_recon_chain(policy, src, ch),
        oracle.build_aoiv_chain(policy, src, ch),
        oracle.build_via_chain(policy, src, ch, truncation=30),
        oracle.build_aoii_chain(policy, src, ch, truncation=30),
    ]
    for chain in chains:
        rows = np.asarray(chain.matrix.sum(axis=1)).ravel()
        np.testing.assert_allclose(rows, 1.0, atol=FINITE)
        pi = oracle.stationary(chain)
        assert np.abs(chain.matrix.T @ pi - pi).max() < 1e-12


def test_aoiv_chain_has_four_states(policy, src, ch):
    chain = oracle.build_aoiv_chain(policy, src, ch)
    assert chain.size == 4
    assert set(chain.states) == {(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)}
    assert chain.truncation is None


def test_truncation_level_checked(src, ch, rs_policy):
    with pytest.raises(InvalidParameterError, match="at least 2"):
        oracle.build_via_chain(rs_policy, src, ch, truncation=1)
    chain = oracle.build_aoii_chain(rs_policy, src, ch, truncation=10)
    assert chain.truncation == 10
    assert "10" in chain.truncation_note


def test_via_chain_matches_randomized_table(src, ch, rs_policy):
    chain = oracle.build_via_chain(rs_policy, src, ch, truncation=200)
    pi0, pi1 = oracle.via_table(chain, oracle.stationary(chain))
    table = analytics.via_stationary_rs(src, ch, 0.5)
    np.testing.assert_allclose(pi0[:51], table.pi0[:51], atol=TRUNCATED)
    np.testing.assert_allclose(pi1[:51], table.pi1[:51], atol=TRUNCATED)


def test_via_chain_perfect_delivery(src):
    chain = oracle.build_via_chain(
        RandomizedStationaryPolicy(1.0), src, ChannelParams(1.0), truncation=5
    )
    pi0, pi1 = oracle.via_table(chain, oracle.stationary(chain))
    assert pi0[0] + pi1[0] == pytest.approx(1.0, abs=FINITE)


def test_via_chain_truncation_robust(src, ch, rs_policy):
    def head(truncation):
        chain = oracle.build_via_chain(rs_policy, src, ch, truncation)
        pi0, pi1 = oracle.via_table(chain, oracle.stationary(chain))
        return np.concatenate((pi0[:51], pi1[:51]))

    assert np.abs(head(100) - head(200)).max() < 1e-10


def test_semantics_aware_via_chain_tracks_estimate(src, ch, sa_policy):
    chain = oracle.build_via_chain(sa_policy, src, ch, truncation=20)
    assert chain.labels == ("x", "x_hat", "via")


@pytest.mark.parametrize("p,q,p_s", GRID)
def test_finite_chains_match_closed_forms(p, q, p_s):
    src, ch = SourceParams(p, q), ChannelParams(p_s)
    for policy in POLICIES:
        recon = oracle.build_recon_chain(policy, src, ch)
        numeric = oracle.recon_table(recon, oracle.stationary(recon))
        closed = analytics.joint_recon_stationary(policy, src, ch)
        for key, value in closed.entries.items():
            assert numeric[key] == pytest.approx(value, abs=FINITE)

        aoiv = oracle.build_aoiv_chain(policy, src, ch)
        numeric = oracle.aoiv_table(aoiv, oracle.stationary(aoiv))
        closed = analytics.aoiv_stationary(policy, src, ch)
        for key, value in closed.entries.items():
            assert numeric[key] == pytest.approx(value, abs=FINITE)


@pytest.mark.parametrize("p,q,p_s", GRID)
def test_truncated_chains_match_closed_forms(p, q, p_s):
    src, ch = SourceParams(p, q), ChannelParams(p_s)
    truncation = 200
    for policy in POLICIES[:2]:
        chain = oracle.build_via_chain(policy, src, ch, truncation)
        pi0, pi1 = oracle.via_table(chain, oracle.stationary(chain))
        table = analytics.via_stationary(policy, src, ch, truncation)
        # levels below the cut are exact: the tail is lumped into the last one
        np.testing.assert_allclose(pi0[:-1], table.pi0[:-1], atol=TRUNCATED)
        np.testing.assert_allclose(pi1[:-1], table.pi1[:-1], atol=TRUNCATED)

    for policy in POLICIES:
        chain = oracle.build_aoii_chain(policy, src, ch, truncation)
        pmf = oracle.age_pmf(chain, oracle.stationary(chain), "aoii")
        dist = analytics.aoii_distribution(policy, src, ch, truncation)
        np.testing.assert_allclose(pmf[:-1], dist.pmf[:-1], atol=TRUNCATED)
        assert pmf[-1] == pytest.approx(dist.pmf[-1] + dist.tail_mass, abs=TRUNCATED)


@pytest.mark.parametrize("policy", POLICIES[:2], ids=["rs", "ca"])
def test_numeric_avg_via(policy, src, ch):
    assert oracle.numeric_avg_via(policy, src, ch) == pytest.approx(
        analytics.avg_via(policy, src, ch), abs=TRUNCATED
    )


def test_numeric_avg_via_semantics_aware(src, ch, sa_policy):
    # no closed form: check against a longer cut instead
    short = oracle.numeric_avg_via(sa_policy, src, ch, truncation=100)
    long = oracle.numeric_avg_via(sa_policy, src, ch, truncation=300)
    assert short == pytest.approx(long, abs=TRUNCATED)
    assert short > 0


def test_marginal_and_expectation(src, ch, rs_policy):
    chain = oracle.build_aoiv_chain(rs_policy, src, ch)
    pi = oracle.stationary(chain)
    assert sum(oracle.marginal(chain, pi, "x").values()) == pytest.approx(1.0)
    assert oracle.marginal(chain, pi, "x")[(0,)] == pytest.approx(0.5, abs=FINITE)
    assert oracle.expectation(chain, pi, "aoiv") == pytest.approx(
        analytics.avg_aoiv(rs_policy, src, ch), abs=FINITE
    )


def test_recon_chain_symmetry(src, ch, rs_policy):
    chain = oracle.build_recon_chain(rs_policy, src, ch)
    table = oracle.recon_table(chain, oracle.stationary(chain))
    assert table[(0, 0)] == pytest.approx(table[(1, 1)], abs=FINITE)
    perfect = oracle.build_recon_chain(
        RandomizedStationaryPolicy(1.0), src, ChannelParams(1.0)
    )
    table = oracle.recon_table(perfect, oracle.stationary(perfect))
    assert table[(0, 1)] == table[(1, 0)] == 0.0
