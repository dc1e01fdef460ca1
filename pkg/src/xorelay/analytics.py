"""Closed-form analysis of queue-length threshold policies.

A threshold policy waits in boundary state (i, 0) iff i <= L1 and in (0, j)
iff j <= L2, and always transmits coded when both queues are nonempty.  The
controlled chain, observed at slot starts, lives on the L1 + L2 + 1 states
(0,0), (1,0), ..., (L1,0), (0,1), ..., (0,L2) and its stationary
distribution is geometric along each arm with ratio

    alpha = (1 - p2) * p1 / ((1 - p1) * p2)

From the stationary distribution the module derives the expected number of
transmissions per slot (tau), the mean number of queued packets at slot
start (lambda), the long-run average cost per slot, and the optimal
thresholds by exhaustive search over the finite range that can contain
them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateParametersError, UnboundedThresholdSearchError
from .model import QState, RelayParams

# Relative width of the alpha ~ 1 window in which the uniform limit form of
# the stationary distribution replaces the geometric one.
ALPHA_ONE_TOL = 1e-9


@dataclass(frozen=True)
class ThresholdPair:
    """Per-queue wait thresholds (L1, L2), both nonnegative."""

    l1: int
    l2: int

    def __post_init__(self) -> None:
        if self.l1 < 0 or self.l2 < 0:
            raise ValueError(f"thresholds must be nonnegative, got ({self.l1}, {self.l2})")


@dataclass(frozen=True)
class StationaryDistribution:
    """Steady state of the threshold-controlled chain at slot starts.

    pi_i0[k] is the probability of state (k+1, 0), for k = 0..L1-1, and
    symmetrically pi_0j[k] is the probability of (0, k+1).  ``alpha`` is the
    geometric ratio the arms follow (math.inf when queue 2 starves).
    """

    pi_00: float
    pi_i0: tuple[float, ...]
    pi_0j: tuple[float, ...]
    alpha: float

    @property
    def l1(self) -> int:
        return len(self.pi_i0)

    @property
    def l2(self) -> int:
        return len(self.pi_0j)

    def prob_arm1(self, i: int) -> float:
        """Probability of state (i, 0); prob_arm1(0) is pi_00."""
        return self.pi_00 if i == 0 else self.pi_i0[i - 1]

    def prob_arm2(self, j: int) -> float:
        """Probability of state (0, j); prob_arm2(0) is pi_00."""
        return self.pi_00 if j == 0 else self.pi_0j[j - 1]

    def as_dict(self) -> dict[QState, float]:
        out = {QState(0, 0): self.pi_00}
        for i, p in enumerate(self.pi_i0, start=1):
            out[QState(i, 0)] = p
        for j, p in enumerate(self.pi_0j, start=1):
            out[QState(0, j)] = p
        return out

    @property
    def total_mass(self) -> float:
        return self.pi_00 + sum(self.pi_i0) + sum(self.pi_0j)


@dataclass(frozen=True)
class PerformancePoint:
    """Per-slot performance of one threshold pair.

    tau             -- expected transmissions per slot
    lam             -- expected packets in the system at slot start
    cost_per_slot   -- c_transmit * tau + c_hold * lam
    cost_per_packet -- cost_per_slot normalized by the packet arrival
                       rate p1 + p2
    """

    tau: float
    lam: float
    cost_per_slot: float
    cost_per_packet: float


def alpha(params: RelayParams) -> float:
    """Geometric ratio of the threshold chain's stationary distribution.

    Returns math.inf when queue 1 always wins the race (p2 == 0 or p1 == 1)
    and 0.0 in the mirror case; raises for the 0/0 corners where the chain
    has no race at all.
    """
    p1, p2 = params.p1, params.p2
    num = (1.0 - p2) * p1
    den = (1.0 - p1) * p2
    if den == 0.0:
        if num == 0.0:
            raise DegenerateParametersError(
                f"alpha is 0/0 for (p1, p2) = ({p1}, {p2}); the empty-system and "
                "always-coded corners have no threshold chain to analyze"
            )
        return math.inf
    return num / den


def stationary_distribution(params: RelayParams, t: ThresholdPair) -> StationaryDistribution:
    """Closed-form steady-state probabilities under thresholds ``t``.

    The two arms are geometric in alpha: pi(i,0) = alpha^i * pi(0,0) and
    pi(0,j) = pi(0,0) / alpha^j.  At alpha == 1 the limiting uniform form
    1 / (L1 + L2 + 1) applies; at alpha in {0, inf} one arm starves and all
    mass concentrates at the top of the other.
    """
    a = alpha(params)
    l1, l2 = t.l1, t.l2

    if math.isinf(a):
        # Queue 2 never receives; queue 1 climbs to its threshold and sits.
        pi_i0 = tuple(0.0 if i < l1 else 1.0 for i in range(1, l1 + 1))
        return StationaryDistribution(
            pi_00=1.0 if l1 == 0 else 0.0, pi_i0=pi_i0, pi_0j=(0.0,) * l2, alpha=a
        )
    if a == 0.0:
        pi_0j = tuple(0.0 if j < l2 else 1.0 for j in range(1, l2 + 1))
        return StationaryDistribution(
            pi_00=1.0 if l2 == 0 else 0.0, pi_i0=(0.0,) * l1, pi_0j=pi_0j, alpha=a
        )
    if abs(a - 1.0) < ALPHA_ONE_TOL:
        u = 1.0 / (l1 + l2 + 1)
        return StationaryDistribution(pi_00=u, pi_i0=(u,) * l1, pi_0j=(u,) * l2, alpha=a)

    arm1 = [a**i for i in range(1, l1 + 1)]
    arm2 = [a**-j for j in range(1, l2 + 1)]
    denom = 1.0 + sum(arm1) + sum(arm2)
    if math.isinf(denom):
        # Extreme alpha with a long arm: numerically indistinguishable from
        # the one-sided limit above.
        top = QState(l1, 0) if a > 1.0 else QState(0, l2)
        pi_i0 = tuple(1.0 if (top.q1 == i) else 0.0 for i in range(1, l1 + 1))
        pi_0j = tuple(1.0 if (top.q2 == j) else 0.0 for j in range(1, l2 + 1))
        return StationaryDistribution(pi_00=0.0, pi_i0=pi_i0, pi_0j=pi_0j, alpha=a)
    pi_00 = 1.0 / denom
    return StationaryDistribution(
        pi_00=pi_00,
        pi_i0=tuple(x * pi_00 for x in arm1),
        pi_0j=tuple(x * pi_00 for x in arm2),
        alpha=a,
    )


def transmissions_per_slot(
    params: RelayParams, t: ThresholdPair, dist: StationaryDistribution
) -> float:
    """Expected transmissions per slot under thresholds ``t``.

    A coded pair counts as one transmission.  The boundary terms use the
    top-of-arm probabilities, which collapse onto pi_00 when a threshold is
    zero; evaluated literally this gives tau(0, 0) = p1 + p2 - p1*p2, the
    rate at which a never-waiting relay transmits.
    """
    p1, p2 = params.p1, params.p2
    return (
        p1 * p2 * dist.pi_00
        + p2 * sum(dist.pi_i0)
        + p1 * sum(dist.pi_0j)
        + p1 * (1.0 - p2) * dist.prob_arm1(t.l1)
        + p2 * (1.0 - p1) * dist.prob_arm2(t.l2)
    )


def mean_queue(t: ThresholdPair, dist: StationaryDistribution) -> float:
    """Expected number of packets in the system at slot start."""
    return sum(i * p for i, p in enumerate(dist.pi_i0, start=1)) + sum(
        j * p for j, p in enumerate(dist.pi_0j, start=1)
    )


def average_cost(params: RelayParams, t: ThresholdPair) -> PerformancePoint:
    """Long-run average cost of the threshold policy ``t``, per slot and per packet."""
    dist = stationary_distribution(params, t)
    tau = transmissions_per_slot(params, t, dist)
    lam = mean_queue(t, dist)
    per_slot = params.c_transmit * tau + params.c_hold * lam
    return PerformancePoint(
        tau=tau,
        lam=lam,
        cost_per_slot=per_slot,
        cost_per_packet=per_slot / (params.p1 + params.p2),
    )


def threshold_search_bound(params: RelayParams) -> int:
    """Largest threshold worth considering: holding a packet longer than
    c_transmit / c_hold slots already costs more than transmitting it."""
    if params.c_hold <= 0.0:
        raise UnboundedThresholdSearchError(
            "c_hold = 0 makes waiting free and the optimal thresholds diverge; "
            "choose a positive holding cost"
        )
    return math.ceil(params.c_transmit / params.c_hold)


def optimize_thresholds(params: RelayParams) -> tuple[ThresholdPair, PerformancePoint]:
    """Exhaustive search for the cost-minimizing threshold pair.

    Enumerates L1, L2 in {0, ..., ceil(c_transmit / c_hold)} and returns the
    argmin of cost per slot.  Cost ties are broken toward smaller L1 + L2
    (lower latency), then smaller L1, so the result is deterministic.
    """
    bound = threshold_search_bound(params)
    best: tuple[ThresholdPair, PerformancePoint] | None = None
    for l1 in range(bound + 1):
        for l2 in range(bound + 1):
            t = ThresholdPair(l1, l2)
            point = average_cost(params, t)
            if best is None:
                best = (t, point)
                continue
            bt, bp = best
            if point.cost_per_slot < bp.cost_per_slot - 1e-12:
                best = (t, point)
            elif point.cost_per_slot <= bp.cost_per_slot + 1e-12 and (
                (l1 + l2, l1) < (bt.l1 + bt.l2, bt.l1)
            ):
                best = (t, point)
    assert best is not None
    return best


def tradeoff_curve(
    params: RelayParams, max_threshold: int
) -> list[tuple[ThresholdPair, PerformancePoint]]:
    """Evaluate every threshold pair on {0..max_threshold}^2.

    The returned grid supports delay-versus-transmissions plots; mean delay
    follows from lam by the Little's-law conversion lam / (p1 + p2).
    """
    if max_threshold < 0:
        raise ValueError("max_threshold must be >= 0")
    return [
        (ThresholdPair(l1, l2), average_cost(params, ThresholdPair(l1, l2)))
        for l1 in range(max_threshold + 1)
        for l2 in range(max_threshold + 1)
    ]


def mean_delay(point: PerformancePoint, params: RelayParams) -> float:
    """Average slots a packet spends queued, from lam by Little's law."""
    return point.lam / (params.p1 + params.p2)
