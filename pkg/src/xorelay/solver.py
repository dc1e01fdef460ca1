"""Exact solvers for the relay MDP on a truncated state space.

Three routes to the optimal control are provided and cross-check each
other:

* discounted value iteration (contraction fixed point, discount beta),
* relative value iteration for the long-run average cost (the workhorse),
* the occupancy-measure linear program, made irreducible by redirecting an
  epsilon fraction of every transition row uniformly over all states and
  solved by the in-repo dense simplex.

Truncation caps each queue at ``cap`` packets: an arrival into a full
coordinate is dropped.  The cap only has to clear the optimal thresholds
(which never exceed c_transmit / c_hold) for the truncation to be
invisible in the results.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .analytics import ThresholdPair
from .errors import ConvergenceError
from .model import (
    ActionKind,
    QState,
    RelayParams,
    arrival_distribution,
    feasible_actions,
    stage_cost,
)
from .simplex import solve_equality_lp

DEFAULT_TOL = 1e-9
# Value gap under which the two actions count as tied; ties resolve to Wait.
TIE_TOL = 1e-9


class TruncatedSpace:
    """All valid states with both queues capped at ``cap`` (4 * cap states).

    The enumeration order is fixed — (0,0), the (i,0) arm, the (0,j) arm,
    then the depth-1 interior states — so solver output is deterministic.
    """

    def __init__(self, cap: int):
        if cap < 1:
            raise ValueError(f"cap must be >= 1, got {cap}")
        self.cap = cap
        states = [QState(0, 0)]
        states += [QState(i, 0) for i in range(1, cap + 1)]
        states += [QState(0, j) for j in range(1, cap + 1)]
        states += [QState(i, 1) for i in range(1, cap + 1)]
        states += [QState(1, j) for j in range(2, cap + 1)]
        self.states: tuple[QState, ...] = tuple(states)
        self.index: dict[QState, int] = {s: k for k, s in enumerate(states)}

    def __len__(self) -> int:
        return len(self.states)

    def __contains__(self, s: QState) -> bool:
        return s in self.index

    def __repr__(self) -> str:
        return f"TruncatedSpace(cap={self.cap}, states={len(self.states)})"


def clamped_transition(
    s: QState, a: ActionKind, params: RelayParams, space: TruncatedSpace
) -> dict[QState, float]:
    """Transition law with arrivals into a full coordinate dropped."""
    cap = space.cap
    dist: dict[QState, float] = {}
    base1 = max(s.q1 - a, 0)
    base2 = max(s.q2 - a, 0)
    for (a1, a2), prob in arrival_distribution(params):
        if prob == 0.0:
            continue
        nxt = QState(min(base1 + a1, cap), min(base2 + a2, cap))
        dist[nxt] = dist.get(nxt, 0.0) + prob
    return dist


@dataclass
class _Kernels:
    """Dense per-action transition matrices and stage-cost vectors.

    Rows of infeasible (state, action) pairs are the identity and carry an
    infinite cost, so elementwise minimization never selects them.
    """

    p_wait: np.ndarray
    p_transmit: np.ndarray
    c_wait: np.ndarray
    c_transmit: np.ndarray

    def backup(self, v: np.ndarray, scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
        q_wait = self.c_wait + scale * (self.p_wait @ v)
        q_transmit = self.c_transmit + scale * (self.p_transmit @ v)
        return q_wait, q_transmit


def _build_kernels(
    params: RelayParams, states: tuple[QState, ...], index: Mapping[QState, int], space: TruncatedSpace
) -> _Kernels:
    n = len(states)
    p = {a: np.eye(n) for a in ActionKind}
    c = {a: np.full(n, np.inf) for a in ActionKind}
    for k, s in enumerate(states):
        for a in feasible_actions(s):
            c[a][k] = stage_cost(s, a, params)
            p[a][k, :] = 0.0
            for nxt, prob in clamped_transition(s, a, params, space).items():
                p[a][k, index[nxt]] += prob
    return _Kernels(
        p_wait=p[ActionKind.WAIT],
        p_transmit=p[ActionKind.TRANSMIT],
        c_wait=c[ActionKind.WAIT],
        c_transmit=c[ActionKind.TRANSMIT],
    )


def reachable_closure(
    params: RelayParams, space: TruncatedSpace, start: QState = QState(0, 0)
) -> tuple[QState, ...]:
    """States reachable from ``start`` under some sequence of feasible actions.

    For interior arrival probabilities this is the whole space; at the 0/1
    corners it shrinks to the states the system can actually occupy, which
    keeps the average-cost iteration on a single communicating part.
    """
    seen = {start}
    frontier = deque([start])
    while frontier:
        s = frontier.popleft()
        for a in feasible_actions(s):
            for nxt in clamped_transition(s, a, params, space):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
    return tuple(s for s in space.states if s in seen)


def _greedy_policy(
    kernels: _Kernels, v: np.ndarray, states: tuple[QState, ...], scale: float = 1.0
) -> dict[QState, ActionKind]:
    q_wait, q_transmit = kernels.backup(v, scale)
    policy = {}
    for k, s in enumerate(states):
        if q_wait[k] <= q_transmit[k] + TIE_TOL:
            policy[s] = ActionKind.WAIT
        else:
            policy[s] = ActionKind.TRANSMIT
    return policy


def always_transmit_value_bound(s: QState, params: RelayParams, beta: float) -> float:
    """Discounted cost of transmitting every slot, an upper bound on the
    optimal discounted value in every state."""
    held = max(s.q1 - 1, 0) + max(s.q2 - 1, 0)
    return (params.c_hold * held + params.c_transmit) / (1.0 - beta)


@dataclass
class DiscountedSolution:
    """Fixed point of the discounted optimality recursion on a truncated space."""

    beta: float
    values: dict[QState, float]
    policy: dict[QState, ActionKind]
    iterations: int
    residual: float


def discounted_value_iteration(
    params: RelayParams,
    beta: float,
    space: TruncatedSpace,
    tol: float = DEFAULT_TOL,
    max_iterations: int = 2_000_000,
) -> DiscountedSolution:
    """Value iteration for the total discounted cost.

    Iterates the optimality recursion until successive sweeps differ by at
    most ``tol`` in sup-norm; the contraction then pins the fixed-point
    residual of the returned table below tol as well.  The returned policy
    is greedy with respect to the final values, waiting on ties.
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"discount must lie in [0, 1), got {beta}")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    kernels = _build_kernels(params, space.states, space.index, space)
    v = np.zeros(len(space))
    history: list[float] = []
    for it in range(1, max_iterations + 1):
        q_wait, q_transmit = kernels.backup(v, beta)
        v_new = np.minimum(q_wait, q_transmit)
        diff = float(np.max(np.abs(v_new - v)))
        history.append(diff)
        v = v_new
        if diff <= tol:
            q_wait, q_transmit = kernels.backup(v, beta)
            residual = float(np.max(np.abs(np.minimum(q_wait, q_transmit) - v)))
            return DiscountedSolution(
                beta=beta,
                values={s: float(v[k]) for k, s in enumerate(space.states)},
                policy=_greedy_policy(kernels, v, space.states, beta),
                iterations=it,
                residual=residual,
            )
    raise ConvergenceError(
        f"discounted value iteration missed tol={tol} after {max_iterations} sweeps",
        residuals=history[-50:],
    )


@dataclass
class AverageCostResult:
    """Solution of the average-cost optimality equation.

    ``gain`` is the long-run cost per slot starting from the empty system;
    ``bias`` the relative values normalized to bias[(0,0)] = 0.  States the
    system cannot reach from empty are omitted.  ``residual`` is the final
    span of the optimality-equation defect.
    """

    gain: float
    bias: dict[QState, float]
    policy: dict[QState, ActionKind]
    iterations: int
    residual: float


def relative_value_iteration(
    params: RelayParams,
    space: TruncatedSpace,
    tol: float = DEFAULT_TOL,
    max_iterations: int = 2_000_000,
    damping: float = 0.5,
) -> AverageCostResult:
    """Relative value iteration with reference state (0, 0).

    Sweeps run on the damped kernel (1 - damping) * I + damping * P, which
    shares gain, optimal actions, and — after rescaling by ``damping`` —
    the optimality-equation residual with the original problem while
    staying convergent on periodic chains.  Stops when the span seminorm of
    the residual drops to ``tol``.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    states = reachable_closure(params, space)
    index = {s: k for k, s in enumerate(states)}
    ref = index[QState(0, 0)]
    kernels = _build_kernels(params, states, index, space)

    w = np.zeros(len(states))
    history: list[float] = []
    for it in range(1, max_iterations + 1):
        q_wait, q_transmit = kernels.backup(w, damping)
        u = (1.0 - damping) * w + np.minimum(q_wait, q_transmit)
        delta = u - w
        span = float(delta.max() - delta.min())
        history.append(span)
        if span <= tol:
            gain = float(delta.max() + delta.min()) / 2.0
            bias_vec = damping * (w - w[ref])
            bias = {s: float(bias_vec[k]) for k, s in enumerate(states)}
            # c + P.(damping * w) is the original-kernel backup of the bias.
            policy = _greedy_policy(kernels, w, states, damping)
            return AverageCostResult(
                gain=gain, bias=bias, policy=policy, iterations=it, residual=span
            )
        w = u - u[ref]
    raise ConvergenceError(
        f"relative value iteration missed tol={tol} after {max_iterations} sweeps",
        residuals=history[-50:],
    )


@dataclass(frozen=True)
class ThresholdExtraction:
    """Outcome of reading thresholds off a policy table.

    Either ``thresholds`` is set, or ``witness`` names a pair of boundary
    states proving the policy is not of threshold type (a Transmit below a
    Wait on the same arm).
    """

    thresholds: ThresholdPair | None
    witness: tuple[QState, QState] | None

    @property
    def is_threshold(self) -> bool:
        return self.thresholds is not None


def extract_thresholds(
    policy: Mapping[QState, ActionKind],
    space: TruncatedSpace,
    *,
    reachable_only: bool = False,
) -> ThresholdExtraction:
    """Read (L1, L2) off a deterministic policy's boundary states.

    Each arm is scanned outward from the empty state; the threshold is the
    number of leading Wait states, and the arm must switch to Transmit at
    most once.  With ``reachable_only`` the scan stops at the first
    Transmit state — everything past it cannot be visited, so a Wait there
    is not evidence against threshold structure.  Without it any Wait above
    a Transmit yields a witness pair instead of thresholds.

    A policy that waits over a whole arm of the truncated space gets that
    arm's threshold reported as the cap.
    """

    def scan(arm_states: list[QState]) -> tuple[int, tuple[QState, QState] | None]:
        first_transmit = -1
        for pos, s in enumerate(arm_states):
            if s not in policy:
                break
            action = policy[s]
            if action == ActionKind.TRANSMIT and first_transmit < 0:
                first_transmit = pos
                if reachable_only:
                    break
            elif action == ActionKind.WAIT and first_transmit >= 0:
                return -1, (arm_states[first_transmit], s)
        if first_transmit < 0:
            # Never transmits on this arm: threshold is the scan horizon.
            count = 0
            for s in arm_states:
                if s not in policy:
                    break
                count += 1
            return count, None
        return first_transmit, None

    arm1 = [QState(i, 0) for i in range(1, space.cap + 1)]
    arm2 = [QState(0, j) for j in range(1, space.cap + 1)]
    l1, witness = scan(arm1)
    if witness is not None:
        return ThresholdExtraction(thresholds=None, witness=witness)
    l2, witness = scan(arm2)
    if witness is not None:
        return ThresholdExtraction(thresholds=None, witness=witness)
    return ThresholdExtraction(thresholds=ThresholdPair(l1, l2), witness=None)


@dataclass(eq=False)
class OccupancyLP:
    """Occupancy-measure LP over (state, feasible action) frequencies.

    Minimizes expected stage cost subject to total mass 1 and per-state
    flow balance under the epsilon-perturbed transition law (a fraction
    ``epsilon`` of every row redistributed uniformly over all states, which
    makes the chain irreducible for epsilon > 0).
    """

    pairs: tuple[tuple[QState, ActionKind], ...]
    costs: np.ndarray
    constraints: np.ndarray
    rhs: np.ndarray
    epsilon: float
    states: tuple[QState, ...] = field(default=())


def build_occupancy_lp(
    params: RelayParams, space: TruncatedSpace, epsilon: float
) -> OccupancyLP:
    """Assemble the LP for ``params`` on ``space``.

    Variables follow the space's state order, Wait before Transmit within a
    state.  Constraint row 0 is the normalization; row 1 + k balances state
    k's inflow and outflow.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    states = space.states
    n = len(states)
    pairs: list[tuple[QState, ActionKind]] = []
    for s in states:
        for a in sorted(feasible_actions(s)):
            pairs.append((s, a))
    nvars = len(pairs)

    costs = np.array([stage_cost(s, a, params) for s, a in pairs])
    constraints = np.zeros((1 + n, nvars))
    constraints[0, :] = 1.0
    uniform = epsilon / n
    for col, (s, a) in enumerate(pairs):
        row_from = space.index[s]
        constraints[1 + row_from, col] += 1.0
        constraints[1:, col] -= uniform
        for nxt, prob in clamped_transition(s, a, params, space).items():
            constraints[1 + space.index[nxt], col] -= (1.0 - epsilon) * prob
    rhs = np.zeros(1 + n)
    rhs[0] = 1.0
    return OccupancyLP(
        pairs=tuple(pairs),
        costs=costs,
        constraints=constraints,
        rhs=rhs,
        epsilon=epsilon,
        states=states,
    )


@dataclass
class LPSolution:
    """Optimal occupancy measure and the policy it induces.

    ``unvisited`` collects states whose total occupancy is (numerically)
    zero; they receive Wait when feasible, Transmit otherwise, and the
    choice carries no meaning.
    """

    occupancy: dict[tuple[QState, ActionKind], float]
    policy: dict[QState, ActionKind]
    unvisited: frozenset[QState]
    objective: float
    pivots: int


def solve_occupancy_lp(lp: OccupancyLP, tol: float = 1e-7) -> LPSolution:
    """Solve ``lp`` with the dense simplex and normalize per state.

    The optimal basic solution puts all of a state's mass on one action
    wherever the state is visited at all; the induced policy is therefore
    deterministic up to numerical dust.
    """
    result = solve_equality_lp(lp.costs, lp.constraints, lp.rhs, pivot_tol=tol)
    occupancy = {pair: float(x) for pair, x in zip(lp.pairs, result.x)}

    by_state: dict[QState, list[tuple[ActionKind, float]]] = {}
    for (s, a), x in occupancy.items():
        by_state.setdefault(s, []).append((a, x))
    policy: dict[QState, ActionKind] = {}
    unvisited = set()
    for s, actions in by_state.items():
        mass = sum(x for _, x in actions)
        if mass <= 1e-12:
            unvisited.add(s)
            feasible = feasible_actions(s)
            policy[s] = ActionKind.WAIT if ActionKind.WAIT in feasible else ActionKind.TRANSMIT
        else:
            policy[s] = max(actions, key=lambda ax: ax[1])[0]
    return LPSolution(
        occupancy=occupancy,
        policy=policy,
        unvisited=frozenset(unvisited),
        objective=result.objective,
        pivots=result.pivots,
    )
