# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Closed-form stationary laws and long-run averages.

Notation used throughout:

- ``rho``: per-slot delivery probability of the randomized stationary policy,
  ``p_sample * p_s``. The semantics-aware tables are the randomized ones with
  ``rho`` replaced by ``p_s``.
- ``phi(x, r) = x + (1 - x) * r``.
- ``denominator(src, r) = p + q + (1 - p - q) * r``.
"""

import enum
import logging
import math
from typing import Dict, Tuple

import attr
import numpy as np

from semcom.via.exc import (
    DivergenceError,
    InvalidParameterError,
    UnsupportedPolicyError,
)
from semcom.via.model import ChannelParams, SourceParams
from semcom.via.policies import (
    ChangeAwarePolicy,
    PolicyKind,
    PolicySpec,
    RandomizedStationaryPolicy,
)

logger = logging.getLogger(__name__)

DEFAULT_TRUNCATION = 200
IDENTITY_TOLERANCE = 1e-12

AoivKey = Tuple[int, int, int]
ReconKey = Tuple[int, int]
STRUCTURAL_ZEROS: Tuple[AoivKey, ...] = ((0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 1, 1))


class ViaOrdering(enum.Enum):
    RS_LOWER = "rs_lower"
    CA_LOWER = "ca_lower"
    EQUAL = "equal"


@attr.s(frozen=True, eq=False)
class ViaStationary:
    """Joint law of (X, VIA): ``pi0[i]`` = Pr[X=0, VIA=i], ``pi1[i]`` =
    Pr[X=1, VIA=i] for ``i <= truncation``; ``tail_mass`` is the exact mass
    beyond."""

    policy = attr.ib(type=PolicyKind)
    pi0 = attr.ib(type=np.ndarray)
    pi1 = attr.ib(type=np.ndarray)
    truncation = attr.ib(type=int)
    tail_mass = attr.ib(type=float)

    def pmf(self) -> np.ndarray:
        return self.pi0 + self.pi1

    def mean(self) -> float:
        """Mean over the retained levels only"""
        return float(np.dot(np.arange(self.truncation + 1), self.pmf()))


@attr.s(frozen=True, eq=False)
class AoivStationary:
    """Law of (X, X̂, AoIV) over {0, 1}³."""

    entries = attr.ib(type=Dict[AoivKey, float])

    def __getitem__(self, key: AoivKey) -> float:
        return self.entries[key]

    def error_probability(self) -> float:
        return self.entries[(0, 1, 1)] + self.entries[(1, 0, 1)]


@attr.s(frozen=True, eq=False)
class JointReconStationary:
    """Law of (X, X̂) over {0, 1}²."""

    entries = attr.ib(type=Dict[ReconKey, float])

    def __getitem__(self, key: ReconKey) -> float:
        return self.entries[key]


@attr.s(frozen=True, eq=False)
class AoiiDistribution:
    policy = attr.ib(type=PolicyKind)
    pmf = attr.ib(type=np.ndarray)
    tail_mass = attr.ib(type=float)

    @property
    def truncation(self) -> int:
        return len(self.pmf) - 1

    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.pmf)), self.pmf))


def _phi(x: float, r: float) -> float:
    return x + (1.0 - x) * r


def _denominator(src: SourceParams, r: float) -> float:
    return src.p + src.q + (1.0 - src.p - src.q) * r


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise InvalidParameterError(f"{name} must be a probability, got {value!r}")


def _effective_delivery(policy: PolicySpec, ch: ChannelParams) -> float:
    """Delivery probability of an erroneous slot for the policies whose tables
    share the randomized stationary form."""
    if policy.kind is PolicyKind.CHANGE_AWARE:
        raise UnsupportedPolicyError(
            f"{policy.kind.value} has no randomized-form table"
        )
    return policy.delivery_probability(ch)


# VIA


def check_convergence(src: SourceParams, ch: ChannelParams, p_sample: float) -> bool:
    """Whether the VIA series of the randomized stationary policy converges.

    Returns False when the ratio is undefined (zero denominator).
    """
    _check_probability("p_sample", p_sample)
    rho = RandomizedStationaryPolicy(p_sample).delivery_probability(ch)
    denominator = math.sqrt(_phi(src.p, rho) * _phi(src.q, rho))
    if denominator == 0.0:
        return False
    ratio = math.sqrt(src.p * src.q) * (1.0 - rho) / denominator
    return ratio < 1.0


def _require_convergence(src: SourceParams, ch: ChannelParams, p_sample: float):
    src.require_ergodic()
    if not check_convergence(src, ch, p_sample):
        raise DivergenceError(
            f"VIA series diverges for p={src.p}, q={src.q}, "
            f"p_sample={p_sample}, p_s={ch.p_s}"
        )


def via_stationary_rs(
    src: SourceParams,
    ch: ChannelParams,
    p_sample: float,
    truncation: int = DEFAULT_TRUNCATION,
) -> ViaStationary:
    """Stationary law of (X, VIA) under the randomized stationary policy.

    Even and odd levels form two geometric sequences with common ratio
    ``pq(1-rho)^2 / (phi(p) phi(q))``, which also gives the tail in closed
    form.

    Raises:
        DivergenceError if the convergence condition fails
    """
    _require_convergence(src, ch, p_sample)
    p, q = src.p, src.q
    rho = RandomizedStationaryPolicy(p_sample).delivery_probability(ch)
    phi_p, phi_q = _phi(p, rho), _phi(q, rho)
    scale = rho / (p + q)
    ratio = p * q * (1.0 - rho) ** 2 / (phi_p * phi_q)

    first0, first1 = scale * q / phi_p, scale * p / phi_q
    second = scale * p * q * (1.0 - rho) / (phi_p * phi_q)

    levels = np.arange(truncation + 3)
    even = levels % 2 == 0
    decay = ratio ** (levels // 2)
    pi0 = np.where(even, first0, second) * decay
    pi1 = np.where(even, first1, second) * decay

    overflow = pi0[truncation + 1 :].sum() + pi1[truncation + 1 :].sum()
    tail_mass = float(overflow / (1.0 - ratio))
    return ViaStationary(
        policy=PolicyKind.RANDOMIZED_STATIONARY,
        pi0=pi0[: truncation + 1],
        pi1=pi1[: truncation + 1],
        truncation=truncation,
        tail_mass=tail_mass,
    )


def via_stationary_ca(
    src: SourceParams, ch: ChannelParams, truncation: int = DEFAULT_TRUNCATION
) -> ViaStationary:
    """Stationary law of (X, VIA) under the change-aware policy. With p or q
    at 0 all mass sits at VIA 0.

    Raises:
        InvalidParameterError if p_s = 0 (VIA is never reset)
    """
    src.require_ergodic()
    p, q, p_s = src.p, src.q, ch.p_s
    if p * q == 0.0:
        # the absorbed source never changes again: VIA stays at 0
        geometric = np.zeros(truncation + 1)
        geometric[0] = 1.0
        return ViaStationary(
            policy=PolicyKind.CHANGE_AWARE,
            pi0=q / (p + q) * geometric,
            pi1=p / (p + q) * geometric,
            truncation=truncation,
            tail_mass=0.0,
        )
    if ch.p_s == 0.0:
        raise InvalidParameterError("change-aware VIA has no stationary law at p_s=0")
    geometric = p_s * (1.0 - p_s) ** np.arange(truncation + 1)
    return ViaStationary(
        policy=PolicyKind.CHANGE_AWARE,
        pi0=q / (p + q) * geometric,
        pi1=p / (p + q) * geometric,
        truncation=truncation,
        tail_mass=(1.0 - p_s) ** (truncation + 1),
    )


def via_stationary(
    policy: PolicySpec,
    src: SourceParams,
    ch: ChannelParams,
    truncation: int = DEFAULT_TRUNCATION,
) -> ViaStationary:
    if isinstance(policy, RandomizedStationaryPolicy):
        return via_stationary_rs(src, ch, policy.p_sample, truncation)
    if isinstance(policy, ChangeAwarePolicy):
        return via_stationary_ca(src, ch, truncation)
    raise UnsupportedPolicyError(
        f"no closed-form VIA distribution for {policy.kind.value}"
    )


def via_transition_prob(
    src: SourceParams, ch: ChannelParams, p_sample: float, i: int, j: int
) -> float:
    """One-step VIA transition probability P[VIA(t+1)=j | VIA(t)=i] under the
    randomized stationary policy, with X(t) weighted by its stationary
    conditional law given VIA(t)=i."""
    if i < 0 or j < 0:
        raise InvalidParameterError("VIA levels are non-negative")
    if j not in (0, i, i + 1):
        return 0.0
    table = via_stationary_rs(src, ch, p_sample, truncation=max(i, 1))
    mass = table.pi0[i] + table.pi1[i]
    if mass == 0.0:
        raise InvalidParameterError(
            f"VIA level {i} has zero stationary mass; transition undefined"
        )
    rho = RandomizedStationaryPolicy(p_sample).delivery_probability(ch)

    def row(change: float) -> float:
        value = 0.0
        if j == 0:
            value += rho
        if j == i:
            value += (1.0 - change) * (1.0 - rho)
        if j == i + 1:
            value += change * (1.0 - rho)
        return value

    return (row(src.p) * table.pi0[i] + row(src.q) * table.pi1[i]) / mass


def avg_via_of_rho(src: SourceParams, rho: float) -> float:
    """Randomized stationary average VIA as a function of the delivery
    probability."""
    src.require_ergodic()
    if rho <= 0.0:
        raise DivergenceError("average VIA diverges without deliveries (rho=0)")
    p, q = src.p, src.q
    return 2 * p * q * (1.0 - rho) / ((p + q) * rho)


def avg_via(policy: PolicySpec, src: SourceParams, ch: ChannelParams) -> float:
    """Long-run average VIA.

    Raises:
        DivergenceError if the average is infinite
        UnsupportedPolicyError for the semantics-aware policy
    """
    if isinstance(policy, RandomizedStationaryPolicy):
        _require_convergence(src, ch, policy.p_sample)
        return avg_via_of_rho(src, policy.delivery_probability(ch))
    if isinstance(policy, ChangeAwarePolicy):
        src.require_ergodic()
        if src.p * src.q == 0.0:
            return 0.0
        if ch.p_s == 0.0:
            raise DivergenceError("change-aware average VIA diverges at p_s=0")
        return (1.0 - ch.p_s) / ch.p_s
    raise UnsupportedPolicyError(f"no closed-form average VIA for {policy.kind.value}")


def rs_superiority_threshold(src: SourceParams, ch: ChannelParams) -> float:
    """Smallest p_sample at which the randomized stationary average VIA does
    not exceed the change-aware one."""
    src.require_ergodic()
    p, q, p_s = src.p, src.q, ch.p_s
    if p * q == 0.0:
        return 0.0
    return 2 * p * q / (p + q + (2 * p * q - p - q) * p_s)


def compare_via_rs_ca(
    src: SourceParams, ch: ChannelParams, p_sample: float
) -> ViaOrdering:
    """Which of the randomized stationary and change-aware policies has the
    lower average VIA; a divergent average always loses."""

    def value(policy: PolicySpec) -> float:
        try:
            return avg_via(policy, src, ch)
        except DivergenceError:
            return math.inf

    rs = value(RandomizedStationaryPolicy(p_sample=p_sample))
    ca = value(ChangeAwarePolicy())
    if rs == ca or (
        math.isfinite(rs)
        and math.isfinite(ca)
        and abs(rs - ca) <= IDENTITY_TOLERANCE * max(1.0, abs(rs), abs(ca))
    ):
        return ViaOrdering.EQUAL
    return ViaOrdering.RS_LOWER if rs < ca else ViaOrdering.CA_LOWER


# reconstruction error and AoIV


def reconstruction_error_of_rho(src: SourceParams, r: float) -> float:
    src.require_ergodic()
    p, q = src.p, src.q
    return 2 * p * q * (1.0 - r) / ((p + q) * _denominator(src, r))


def reconstruction_error(
    policy: PolicySpec, src: SourceParams, ch: ChannelParams
) -> float:
    """Long-run fraction of slots in which X ≠ X̂."""
    if policy.kind is PolicyKind.CHANGE_AWARE:
        src.require_ergodic()
        if src.p * src.q == 0.0:
            return 0.0
        return (1.0 - ch.p_s) / (2.0 - ch.p_s)
    return reconstruction_error_of_rho(src, _effective_delivery(policy, ch))


def avg_via_of_pe(policy: PolicySpec, src: SourceParams, ch: ChannelParams) -> float:
    """Average VIA rewritten as a linear function of the policy's own
    reconstruction error."""
    pe = reconstruction_error(policy, src, ch)
    if isinstance(policy, RandomizedStationaryPolicy):
        rho = policy.delivery_probability(ch)
        _require_convergence(src, ch, policy.p_sample)
        return _denominator(src, rho) * pe / rho
    if isinstance(policy, ChangeAwarePolicy):
        if ch.p_s == 0.0:
            raise DivergenceError("change-aware average VIA diverges at p_s=0")
        return (2.0 / ch.p_s - 1.0) * pe
    raise UnsupportedPolicyError(f"no closed-form average VIA for {policy.kind.value}")


def _randomized_form_table(src: SourceParams, r: float) -> Dict[AoivKey, float]:
    src.require_ergodic()
    p, q = src.p, src.q
    norm = (p + q) * _denominator(src, r)
    entries = {key: 0.0 for key in STRUCTURAL_ZEROS}
    entries[(0, 0, 0)] = q * _phi(q, r) / norm
    entries[(0, 1, 1)] = p * q * (1.0 - r) / norm
    entries[(1, 1, 0)] = p * _phi(p, r) / norm
    entries[(1, 0, 1)] = p * q * (1.0 - r) / norm
    return entries


def _synced_table(src: SourceParams) -> Dict[AoivKey, float]:
    """All mass on the synced states, split by the source law."""
    p, q = src.p, src.q
    entries = {key: 0.0 for key in STRUCTURAL_ZEROS + ((0, 1, 1), (1, 0, 1))}
    entries[(0, 0, 0)] = q / (p + q)
    entries[(1, 1, 0)] = p / (p + q)
    return entries


def aoiv_stationary(
    policy: PolicySpec, src: SourceParams, ch: ChannelParams
) -> AoivStationary:
    if policy.kind is PolicyKind.CHANGE_AWARE:
        src.require_ergodic()
        p, q, p_s = src.p, src.q, ch.p_s
        if p * q == 0.0:
            return AoivStationary(entries=_synced_table(src))
        norm = (p + q) * (2.0 - p_s)
        entries = {key: 0.0 for key in STRUCTURAL_ZEROS}
        entries[(0, 0, 0)] = q / norm
        entries[(0, 1, 1)] = q * (1.0 - p_s) / norm
        entries[(1, 1, 0)] = p / norm
        entries[(1, 0, 1)] = p * (1.0 - p_s) / norm
        return AoivStationary(entries=entries)
    return AoivStationary(
        entries=_randomized_form_table(src, _effective_delivery(policy, ch))
    )


def avg_aoiv(policy: PolicySpec, src: SourceParams, ch: ChannelParams) -> float:
    # AoIV of a two-state source is the error indicator
    return aoiv_stationary(policy, src, ch).error_probability()


def joint_recon_stationary(
    policy: PolicySpec, src: SourceParams, ch: ChannelParams
) -> JointReconStationary:
    """Law of (X, X̂), the AoIV table with its age coordinate dropped."""
    table = aoiv_stationary(policy, src, ch)
    return JointReconStationary(
        entries={
            (0, 0): table[(0, 0, 0)],
            (0, 1): table[(0, 1, 1)],
            (1, 0): table[(1, 0, 1)],
            (1, 1): table[(1, 1, 0)],
        }
    )


def joint_recon_stationary_rs(
    src: SourceParams, ch: ChannelParams, p_sample: float
) -> JointReconStationary:
    return joint_recon_stationary(RandomizedStationaryPolicy(p_sample), src, ch)


# AoII


def aoii_distribution(
    policy: PolicySpec,
    src: SourceParams,
    ch: ChannelParams,
    truncation: int = DEFAULT_TRUNCATION,
) -> AoiiDistribution:
    """Pr[AoII = i] for ``i <= truncation`` and the exact mass beyond.

    An error episode started from a synced state stays erroneous for one more
    slot with probability ``(1 - x) * (1 - r)``, ``x`` being the rate at which
    the source returns to the estimate.
    """
    if truncation < 1:
        raise InvalidParameterError("truncation must be at least 1")
    src.require_ergodic()
    p, q = src.p, src.q
    ages = np.arange(1, truncation + 1)
    pmf = np.empty(truncation + 1)

    if policy.kind is PolicyKind.CHANGE_AWARE:
        p_s = ch.p_s
        if p * q == 0.0:
            pmf[:] = 0.0
            pmf[0] = 1.0
            return AoiiDistribution(policy=policy.kind, pmf=pmf, tail_mass=0.0)
        norm = (p + q) * (2.0 - p_s)
        pmf[0] = 1.0 / (2.0 - p_s)
        pmf[1:] = (
            p * q * (1.0 - p_s) * ((1.0 - q) ** (ages - 1) + (1.0 - p) ** (ages - 1))
        ) / norm
        tail = (1.0 - p_s) * (
            p * (1.0 - q) ** truncation + q * (1.0 - p) ** truncation
        ) / norm
    else:
        r = _effective_delivery(policy, ch)
        norm = (p + q) * _denominator(src, r)
        pmf[0] = (p**2 + q**2 + (p + q - p**2 - q**2) * r) / norm
        stay = 1.0 - r
        pmf[1:] = (
            p
            * q
            * stay**ages
            * (
                (1.0 - q) ** (ages - 1) * _phi(q, r)
                + (1.0 - p) ** (ages - 1) * _phi(p, r)
            )
            / norm
        )
        tail = (
            p
            * q
            * stay
            * (((1.0 - q) * stay) ** truncation + ((1.0 - p) * stay) ** truncation)
            / norm
        )
    return AoiiDistribution(policy=policy.kind, pmf=pmf, tail_mass=float(tail))


def avg_aoii(policy: PolicySpec, src: SourceParams, ch: ChannelParams) -> float:
    """Long-run average AoII.

    With p or q at 0 the source ends up absorbed; the average is 0 for every
    policy, the change-aware one included.
    """
    src.require_ergodic()
    p, q = src.p, src.q
    if p * q == 0.0:
        return 0.0
    if policy.kind is PolicyKind.CHANGE_AWARE:
        p_s = ch.p_s
        return (p**2 + q**2) * (1.0 - p_s) / (p * q * (p + q) * (2.0 - p_s))
    r = _effective_delivery(policy, ch)
    return (
        p
        * q
        * (1.0 - r)
        * (p + q + (2.0 - p - q) * r)
        / ((p + q) * _phi(p, r) * _phi(q, r) * _denominator(src, r))
    )


# sampling


def sampling_cost(
    policy: PolicySpec, src: SourceParams, ch: ChannelParams, delta: float
) -> float:
    """Time-averaged sampling cost for a per-sample cost ``delta``."""
    if delta < 0:
        raise InvalidParameterError("sampling cost must be non-negative")
    return delta * policy.sampling_rate(src, ch)
