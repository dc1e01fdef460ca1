"""Slotted discrete-event simulation of coding relays.

Two scenarios are covered: a single relay fed by independent Bernoulli
arrivals (the setting the exact solvers and closed-form analytics treat),
and a four-node line network where two relays carry a flow in each
direction and every departure toward the neighboring relay becomes that
relay's arrival one slot later — which makes the inner arrival processes
decidedly non-Bernoulli.

Slot order, matching the decision model: arrivals land, the policy sees
the post-arrival queues, an optional transmission removes the head of each
nonempty queue (one coded packet when both are nonempty), and holding cost
is charged to everything still queued.  Runs are deterministic functions
of their seed.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from math import sqrt

from scipy import stats as _sstats

from .errors import UnsupportedMetricError
from .model import ActionKind, QState, RelayParams
from .policies import Observation, PolicySpec, decide


@dataclass
class PacketRecord:
    """One packet's journey: origin slot and per-relay waiting times (slots)."""

    flow_id: int
    created_slot: int
    hop_waits: list[int] = field(default_factory=list)

    @property
    def total_delay(self) -> int:
        # Transmission itself is instantaneous; only queueing counts.
        return sum(self.hop_waits)


@dataclass(frozen=True)
class RelayCosts:
    """Cost coefficients of one relay in a multi-hop run."""

    c_transmit: float
    c_hold: float


@dataclass(frozen=True)
class LineParams:
    """Per-relay cost parameters of the 4-node line (source rates are passed
    to run_line_network directly)."""

    relay_costs: tuple[RelayCosts, RelayCosts]


@dataclass(frozen=True)
class SimConfig:
    params: RelayParams | LineParams
    num_slots: int
    seed: int = 0
    warmup_slots: int | None = None  # None: 10% of num_slots
    batches: int = 20

    def __post_init__(self) -> None:
        if self.num_slots < 1:
            raise ValueError("num_slots must be >= 1")
        if self.warmup_slots is not None and not 0 <= self.warmup_slots < self.num_slots:
            raise ValueError("warmup_slots must lie in [0, num_slots)")
        if self.batches < 1:
            raise ValueError("batches must be >= 1")

    @property
    def warmup(self) -> int:
        return self.num_slots // 10 if self.warmup_slots is None else self.warmup_slots


@dataclass(frozen=True)
class RelayBreakdown:
    """Per-relay slice of a line-network report (measured window only)."""

    name: str
    transmissions_total: int
    coded_transmissions: int
    holding_slot_count: int
    avg_cost_per_slot: float
    avg_wait_per_packet: float


@dataclass
class SimReport:
    """Aggregate metrics of one run.

    Cost and transmission counters cover the measured window (after
    warmup); the conservation fields total_arrivals / total_deliveries /
    packets_in_system_end cover the whole run and balance exactly.
    ``cost_se`` and ``cost_ci95`` come from batch means over the measured
    window.
    """

    scenario: str
    transmissions_total: int
    coded_transmissions: int
    delivered_packets: int
    avg_delay_per_packet: float
    avg_cost_per_slot: float
    avg_cost_per_packet: float
    transmissions_per_delivered_packet: float
    cost_se: float
    cost_ci95: float
    measured_slots: int
    holding_slot_count: int
    total_arrivals: int
    total_deliveries: int
    packets_in_system_end: int
    empirical_state_freq: dict[QState, float] | None = None
    per_relay: tuple[RelayBreakdown, ...] | None = None


def _batch_stats(batch_costs: list[float], batch_slots: list[int]) -> tuple[float, float]:
    """Standard error and 95% half-width of the mean cost per slot."""
    per_slot = [c / s for c, s in zip(batch_costs, batch_slots) if s > 0]
    k = len(per_slot)
    if k < 2:
        return float("nan"), float("nan")
    mean = sum(per_slot) / k
    var = sum((x - mean) ** 2 for x in per_slot) / (k - 1)
    se = sqrt(var / k)
    return se, float(_sstats.t.ppf(0.975, k - 1)) * se


def empirical_state_distribution(report: SimReport) -> dict[QState, float]:
    """Post-action state frequencies of a single-relay run (they sum to 1)."""
    if report.empirical_state_freq is None:
        raise UnsupportedMetricError(
            f"state frequencies are only collected for single-relay runs, not {report.scenario!r}"
        )
    return report.empirical_state_freq


def run_single_relay(spec: PolicySpec, config: SimConfig) -> SimReport:
    """Simulate one relay under ``spec`` and the Bernoulli arrivals in
    ``config.params``; see the module docstring for the slot order."""
    params = config.params
    if not isinstance(params, RelayParams):
        raise TypeError("single-relay runs need RelayParams in config.params")
    p1, p2 = params.p1, params.p2
    c_t, c_h = params.c_transmit, params.c_hold
    rng = random.Random(config.seed)
    warmup = config.warmup
    num_slots = config.num_slots
    measured = num_slots - warmup
    nbatches = min(config.batches, max(measured, 1))

    q1: deque[int] = deque()  # created slots
    q2: deque[int] = deque()
    transmissions = coded = delivered = holding = 0
    delay_sum = 0
    total_arrivals = total_deliveries = 0
    freq: dict[tuple[int, int], int] = {}
    batch_costs = [0.0] * nbatches
    batch_slots = [0] * nbatches

    for t in range(num_slots):
        if rng.random() < p1:
            q1.append(t)
            total_arrivals += 1
        if rng.random() < p2:
            q2.append(t)
            total_arrivals += 1
        n1, n2 = len(q1), len(q2)
        obs = Observation(
            q1=n1,
            q2=n2,
            hol_wait1=t - q1[0] if n1 else 0,
            hol_wait2=t - q2[0] if n2 else 0,
            slot_index=t,
        )
        action = decide(spec, obs, rng)
        assert not (n1 > 0 and n2 > 0 and action == ActionKind.WAIT)
        assert not (n1 + n2 == 0 and action == ActionKind.TRANSMIT)

        tx = 0
        was_coded = False
        departures: list[int] = []
        if action == ActionKind.TRANSMIT:
            tx = 1
            was_coded = n1 > 0 and n2 > 0
            if n1:
                departures.append(q1.popleft())
            if n2:
                departures.append(q2.popleft())
            total_deliveries += len(departures)

        if t >= warmup:
            post1, post2 = len(q1), len(q2)
            transmissions += tx
            coded += was_coded
            holding += post1 + post2
            key = (post1, post2)
            freq[key] = freq.get(key, 0) + 1
            slot_cost = c_t * tx + c_h * (post1 + post2)
            b = (t - warmup) * nbatches // measured
            batch_costs[b] += slot_cost
            batch_slots[b] += 1
            for created in departures:
                delivered += 1
                delay_sum += t - created

    total_cost = c_t * transmissions + c_h * holding
    se, ci95 = _batch_stats(batch_costs, batch_slots)
    return SimReport(
        scenario="relay",
        transmissions_total=transmissions,
        coded_transmissions=coded,
        delivered_packets=delivered,
        avg_delay_per_packet=delay_sum / delivered if delivered else 0.0,
        avg_cost_per_slot=total_cost / measured if measured else 0.0,
        avg_cost_per_packet=total_cost / delivered if delivered else 0.0,
        transmissions_per_delivered_packet=transmissions / delivered if delivered else 0.0,
        cost_se=se,
        cost_ci95=ci95,
        measured_slots=measured,
        holding_slot_count=holding,
        total_arrivals=total_arrivals,
        total_deliveries=total_deliveries,
        packets_in_system_end=len(q1) + len(q2),
        empirical_state_freq={QState(a, b): n / measured for (a, b), n in sorted(freq.items())},
        per_relay=None,
    )


class _LineRelay:
    """One relay of the line: a queue per flow plus measured-window counters."""

    def __init__(self, name: str, costs: RelayCosts):
        self.name = name
        self.costs = costs
        self.queues: tuple[deque, deque] = (deque(), deque())  # (record, arrived_slot)
        self.transmissions = 0
        self.coded = 0
        self.holding = 0
        self.wait_sum = 0
        self.wait_count = 0

    def observe(self, t: int) -> Observation:
        qf1, qf2 = self.queues
        return Observation(
            q1=len(qf1),
            q2=len(qf2),
            hol_wait1=t - qf1[0][1] if qf1 else 0,
            hol_wait2=t - qf2[0][1] if qf2 else 0,
            slot_index=t,
        )


def run_line_network(
    source_rates: tuple[float, float],
    relay_specs: tuple[PolicySpec, PolicySpec],
    config: SimConfig,
) -> SimReport:
    """Simulate the 4-node line: flow 1 runs n1->n2->n3->n4, flow 2 the
    reverse path, and the two relays n2, n3 each run their own policy.

    All relays act on their start-of-slot queues simultaneously; a packet
    forwarded to the neighboring relay joins its queue at the next slot
    boundary (the hop itself adds no counted waiting).  End nodes consume
    packets instantly.
    """
    params = config.params
    if not isinstance(params, LineParams):
        raise TypeError("line runs need LineParams in config.params")
    p1, p2 = source_rates
    if not (0.0 <= p1 <= 1.0 and 0.0 <= p2 <= 1.0):
        raise ValueError("source rates must lie in [0, 1]")
    rng = random.Random(config.seed)
    warmup = config.warmup
    num_slots = config.num_slots
    measured = num_slots - warmup
    nbatches = min(config.batches, max(measured, 1))

    relays = (
        _LineRelay("n2", params.relay_costs[0]),
        _LineRelay("n3", params.relay_costs[1]),
    )
    # Packets in the air toward each relay, arriving next slot: (flow queue index, record).
    inflight: list[list[PacketRecord]] = [[], []]
    delivered = 0
    delay_sum = 0
    total_arrivals = total_deliveries = 0
    batch_costs = [0.0] * nbatches
    batch_slots = [0] * nbatches

    for t in range(num_slots):
        # Last slot's inter-relay departures materialize first.
        for r, arrivals in enumerate(inflight):
            flow_queue = 1 if r == 0 else 0  # n2 receives flow 2, n3 receives flow 1
            for record in arrivals:
                relays[r].queues[flow_queue].append((record, t))
        inflight = [[], []]

        if rng.random() < p1:
            relays[0].queues[0].append((PacketRecord(1, t), t))
            total_arrivals += 1
        if rng.random() < p2:
            relays[1].queues[1].append((PacketRecord(2, t), t))
            total_arrivals += 1

        actions = [decide(relay_specs[r], relays[r].observe(t), rng) for r in range(2)]

        slot_cost = 0.0
        for r, relay in enumerate(relays):
            qf1, qf2 = relay.queues
            tx = 0
            was_coded = False
            if actions[r] == ActionKind.TRANSMIT:
                assert qf1 or qf2
                tx = 1
                was_coded = bool(qf1) and bool(qf2)
                for flow_queue in (0, 1):
                    q = relay.queues[flow_queue]
                    if not q:
                        continue
                    record, arrived = q.popleft()
                    wait = t - arrived
                    record.hop_waits.append(wait)
                    if t >= warmup:
                        relay.wait_sum += wait
                        relay.wait_count += 1
                    # Flow 1 moves right (n2 -> n3 -> n4), flow 2 left; only
                    # the middle hop stays inside the network.
                    if r == 0 and flow_queue == 0:
                        inflight[1].append(record)
                    elif r == 1 and flow_queue == 1:
                        inflight[0].append(record)
                    else:
                        total_deliveries += 1
                        if t >= warmup:
                            delivered += 1
                            delay_sum += record.total_delay
            held = len(qf1) + len(qf2)
            cost = relay.costs.c_transmit * tx + relay.costs.c_hold * held
            slot_cost += cost
            if t >= warmup:
                relay.transmissions += tx
                relay.coded += was_coded
                relay.holding += held
        if t >= warmup:
            b = (t - warmup) * nbatches // measured
            batch_costs[b] += slot_cost
            batch_slots[b] += 1

    transmissions = sum(r.transmissions for r in relays)
    coded = sum(r.coded for r in relays)
    holding = sum(r.holding for r in relays)
    total_cost = sum(
        r.costs.c_transmit * r.transmissions + r.costs.c_hold * r.holding for r in relays
    )
    se, ci95 = _batch_stats(batch_costs, batch_slots)
    in_system = sum(len(q) for r in relays for q in r.queues) + sum(len(x) for x in inflight)
    breakdown = tuple(
        RelayBreakdown(
            name=r.name,
            transmissions_total=r.transmissions,
            coded_transmissions=r.coded,
            holding_slot_count=r.holding,
            avg_cost_per_slot=(
                (r.costs.c_transmit * r.transmissions + r.costs.c_hold * r.holding) / measured
                if measured
                else 0.0
            ),
            avg_wait_per_packet=r.wait_sum / r.wait_count if r.wait_count else 0.0,
        )
        for r in relays
    )
    return SimReport(
        scenario="line",
        transmissions_total=transmissions,
        coded_transmissions=coded,
        delivered_packets=delivered,
        avg_delay_per_packet=delay_sum / delivered if delivered else 0.0,
        avg_cost_per_slot=total_cost / measured if measured else 0.0,
        avg_cost_per_packet=total_cost / delivered if delivered else 0.0,
        transmissions_per_delivered_packet=transmissions / delivered if delivered else 0.0,
        cost_se=se,
        cost_ci95=ci95,
        measured_slots=measured,
        holding_slot_count=holding,
        total_arrivals=total_arrivals,
        total_deliveries=total_deliveries,
        packets_in_system_end=in_system,
        empirical_state_freq=None,
        per_relay=breakdown,
    )
