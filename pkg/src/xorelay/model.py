"""Relay MDP primitives: states, actions, stage costs, one-slot transitions.

A single relay keeps two FIFO queues, one per traffic direction.  Each slot
brings an independent Bernoulli arrival into each queue; at the slot
boundary the relay may transmit one packet (an XOR of two head-of-line
packets when both queues are nonempty, an uncoded packet otherwise) or
wait.  Everything downstream of this module — the exact solvers, the
closed-form analytics, and the simulator — is built on the four operations
defined here.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple

from .errors import InfeasibleActionError


@dataclass(frozen=True)
class RelayParams:
    """Arrival probabilities and cost coefficients of one relay.

    p1, p2     -- per-slot probability of an arrival into queue 1 / queue 2
    c_transmit -- cost charged per transmission (coded or not)
    c_hold     -- cost charged per packet per slot it remains queued
    """

    p1: float
    p2: float
    c_transmit: float
    c_hold: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.p1 <= 1.0 and 0.0 <= self.p2 <= 1.0):
            raise ValueError(f"arrival probabilities must lie in [0, 1], got ({self.p1}, {self.p2})")
        if self.c_transmit < 0.0 or self.c_hold < 0.0:
            raise ValueError("cost coefficients must be nonnegative")


@dataclass(frozen=True, order=True)
class QState:
    """Queue-length pair (q1, q2) with the reachability constraint min(q1, q2) <= 1.

    Whenever both queues are nonempty a coded transmission is forced, so at
    most one queue can ever grow past length 1; states violating that are
    rejected at construction time.
    """

    q1: int
    q2: int

    def __post_init__(self) -> None:
        if self.q1 < 0 or self.q2 < 0:
            raise ValueError(f"queue lengths must be nonnegative, got ({self.q1}, {self.q2})")
        if min(self.q1, self.q2) > 1:
            raise ValueError(f"unreachable state ({self.q1}, {self.q2}): min(q1, q2) must be <= 1")

    @property
    def total(self) -> int:
        return self.q1 + self.q2


class ActionKind(IntEnum):
    """Relay action for one slot, encoded 0/1."""

    WAIT = 0
    TRANSMIT = 1


class ArrivalPattern(NamedTuple):
    """Joint arrival outcome of one slot."""

    a1: bool
    a2: bool


def arrival_distribution(params: RelayParams) -> list[tuple[ArrivalPattern, float]]:
    """All four joint arrival outcomes with their probabilities (which sum to 1)."""
    p1, p2 = params.p1, params.p2
    return [
        (ArrivalPattern(False, False), (1.0 - p1) * (1.0 - p2)),
        (ArrivalPattern(True, False), p1 * (1.0 - p2)),
        (ArrivalPattern(False, True), (1.0 - p1) * p2),
        (ArrivalPattern(True, True), p1 * p2),
    ]


def feasible_actions(s: QState) -> frozenset[ActionKind]:
    """Actions allowed in state ``s``.

    Empty system: waiting is the only option.  Both queues nonempty: a coded
    transmission dominates (it is forced).  Exactly one queue nonempty: both
    actions are available and the wait-or-transmit question is live.
    """
    if s.q1 == 0 and s.q2 == 0:
        return frozenset({ActionKind.WAIT})
    if s.q1 > 0 and s.q2 > 0:
        return frozenset({ActionKind.TRANSMIT})
    return frozenset({ActionKind.WAIT, ActionKind.TRANSMIT})


def _require_feasible(s: QState, a: ActionKind) -> None:
    if a not in feasible_actions(s):
        raise InfeasibleActionError(f"action {a.name} is not feasible in state ({s.q1}, {s.q2})")


def stage_cost(s: QState, a: ActionKind, params: RelayParams) -> float:
    """One-slot cost: holding for every packet left after the action, plus
    the transmission cost if one was made."""
    _require_feasible(s, a)
    held = max(s.q1 - a, 0) + max(s.q2 - a, 0)
    return params.c_hold * held + params.c_transmit * a


def apply_slot(s: QState, a: ActionKind, arr: ArrivalPattern) -> QState:
    """Deterministic sample-path step: apply the action, then the arrivals.

    A transmission removes one packet from each nonempty queue (their XOR
    leaves as a single packet); arrivals of the slot are then appended.
    """
    _require_feasible(s, a)
    return QState(max(s.q1 - a, 0) + arr.a1, max(s.q2 - a, 0) + arr.a2)


def transition_distribution(
    s: QState, a: ActionKind, params: RelayParams
) -> dict[QState, float]:
    """One-slot transition law as a merged distribution over next states.

    Outcomes that coincide are accumulated and zero-probability outcomes are
    dropped, so the result is a proper distribution whose support matches
    the reachable next states exactly.
    """
    _require_feasible(s, a)
    dist: dict[QState, float] = {}
    for arr, prob in arrival_distribution(params):
        if prob == 0.0:
            continue
        nxt = apply_slot(s, a, arr)
        dist[nxt] = dist.get(nxt, 0.0) + prob
    return dist
