"""The five decision-rule families compared in the experiments.

Every policy sees the same observation (queue lengths, head-of-line waiting
times, slot index) and is subject to the same forced actions: an empty
system waits, and two nonempty queues always send a coded packet.  The
families only differ in how they resolve the remaining case of a single
nonempty queue:

* Opportunistic        -- transmit immediately, never wait.
* QThreshold           -- transmit iff the queue length exceeds its
                          threshold (the family containing the optimal
                          policy).
* RandomizedQThreshold -- above the threshold, transmit with probability q.
* WaitThreshold        -- transmit iff the head-of-line packet has waited
                          at least W slots, regardless of queue length.
* QueueOrWait          -- transmit iff either the queue-length or the
                          waiting-time trigger fires.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Union

from .model import ActionKind


class UniformSource(Protocol):
    """Anything with random.Random's ``random()`` — one U[0,1) draw per call."""

    def random(self) -> float: ...


@dataclass(frozen=True)
class Observation:
    """What a policy sees at a transmission opportunity.

    Head-of-line waits count whole slots survived past a transmission
    opportunity; a packet that arrived this slot has hol_wait 0, and the
    fields are 0 whenever the matching queue is empty.
    """

    q1: int
    q2: int
    hol_wait1: int = 0
    hol_wait2: int = 0
    slot_index: int = 0

    def __post_init__(self) -> None:
        if self.q1 < 0 or self.q2 < 0:
            raise ValueError("queue lengths must be nonnegative")
        if self.hol_wait1 < 0 or self.hol_wait2 < 0:
            raise ValueError("waiting times must be nonnegative")
        if (self.q1 == 0 and self.hol_wait1 != 0) or (self.q2 == 0 and self.hol_wait2 != 0):
            raise ValueError("an empty queue has no head-of-line waiting time")


def _check_nonneg(**fields: int) -> None:
    for name, value in fields.items():
        if value < 0:
            raise ValueError(f"{name} must be a nonnegative integer, got {value}")


@dataclass(frozen=True)
class Opportunistic:
    """Code when possible, otherwise transmit immediately."""

    def _lone_queue_action(self, side: int, q: int, hol: int, rng: UniformSource | None) -> ActionKind:
        return ActionKind.TRANSMIT


@dataclass(frozen=True)
class QThreshold:
    """Stationary deterministic rule: transmit iff the queue exceeds its threshold."""

    l1: int
    l2: int

    def __post_init__(self) -> None:
        _check_nonneg(l1=self.l1, l2=self.l2)

    def _lone_queue_action(self, side: int, q: int, hol: int, rng: UniformSource | None) -> ActionKind:
        limit = self.l1 if side == 1 else self.l2
        return ActionKind.TRANSMIT if q > limit else ActionKind.WAIT


@dataclass(frozen=True)
class RandomizedQThreshold:
    """Above the queue threshold, transmit with probability ``transmit_prob``."""

    l1: int
    l2: int
    transmit_prob: float

    def __post_init__(self) -> None:
        _check_nonneg(l1=self.l1, l2=self.l2)
        if not 0.0 <= self.transmit_prob <= 1.0:
            raise ValueError("transmit_prob must lie in [0, 1]")

    def _lone_queue_action(self, side: int, q: int, hol: int, rng: UniformSource | None) -> ActionKind:
        limit = self.l1 if side == 1 else self.l2
        if q <= limit:
            return ActionKind.WAIT
        if rng is None:
            raise ValueError("RandomizedQThreshold needs a random source")
        return ActionKind.TRANSMIT if rng.random() < self.transmit_prob else ActionKind.WAIT


@dataclass(frozen=True)
class WaitThreshold:
    """Transmit iff the head-of-line packet has waited at least W slots."""

    w1: int
    w2: int

    def __post_init__(self) -> None:
        _check_nonneg(w1=self.w1, w2=self.w2)

    def _lone_queue_action(self, side: int, q: int, hol: int, rng: UniformSource | None) -> ActionKind:
        limit = self.w1 if side == 1 else self.w2
        return ActionKind.TRANSMIT if hol >= limit else ActionKind.WAIT


@dataclass(frozen=True)
class QueueOrWait:
    """Transmit when either the queue-length or the waiting-time rule fires."""

    l1: int
    l2: int
    w1: int
    w2: int

    def __post_init__(self) -> None:
        _check_nonneg(l1=self.l1, l2=self.l2, w1=self.w1, w2=self.w2)

    def _lone_queue_action(self, side: int, q: int, hol: int, rng: UniformSource | None) -> ActionKind:
        q_limit = self.l1 if side == 1 else self.l2
        w_limit = self.w1 if side == 1 else self.w2
        if q > q_limit or hol >= w_limit:
            return ActionKind.TRANSMIT
        return ActionKind.WAIT


PolicySpec = Union[Opportunistic, QThreshold, RandomizedQThreshold, WaitThreshold, QueueOrWait]


def decide(spec: PolicySpec, obs: Observation, rng: UniformSource | None = None) -> ActionKind:
    """Action of ``spec`` under observation ``obs``.

    Forced actions apply to every family: Wait on an empty system, Transmit
    (coded) when both queues are nonempty.  At most one uniform draw is
    consumed per call, and only by RandomizedQThreshold above its
    threshold, so a simulation's draw sequence is fully determined by its
    seed.
    """
    if obs.q1 == 0 and obs.q2 == 0:
        return ActionKind.WAIT
    if obs.q1 > 0 and obs.q2 > 0:
        return ActionKind.TRANSMIT
    if obs.q1 > 0:
        return spec._lone_queue_action(1, obs.q1, obs.hol_wait1, rng)
    return spec._lone_queue_action(2, obs.q2, obs.hol_wait2, rng)


def decide_is_stationary(spec: PolicySpec) -> bool:
    """True when the rule is a deterministic function of the queue lengths alone."""
    return isinstance(spec, (Opportunistic, QThreshold))
