"""xorelay: wait-or-transmit control for an XOR network-coding relay.

The package answers one question three independent ways — should a relay
holding packets of only one direction transmit them uncoded now or wait
for a coding partner? — via exact MDP solvers on a truncated state space,
closed-form analysis of queue-length threshold policies, and a slotted
simulator, and cross-validates the three against each other.
"""

from .analytics import (
    PerformancePoint,
    StationaryDistribution,
    ThresholdPair,
    alpha,
    average_cost,
    mean_delay,
    mean_queue,
    optimize_thresholds,
    stationary_distribution,
    threshold_search_bound,
    tradeoff_curve,
    transmissions_per_slot,
)
from .errors import (
    ConvergenceError,
    DegenerateParametersError,
    InfeasibleActionError,
    SimplexError,
    UnboundedThresholdSearchError,
    UnsupportedMetricError,
    XorelayError,
)
from .model import (
    ActionKind,
    ArrivalPattern,
    QState,
    RelayParams,
    apply_slot,
    arrival_distribution,
    feasible_actions,
    stage_cost,
    transition_distribution,
)
from .policies import (
    Observation,
    Opportunistic,
    PolicySpec,
    QThreshold,
    QueueOrWait,
    RandomizedQThreshold,
    WaitThreshold,
    decide,
    decide_is_stationary,
)
from .sim import (
    LineParams,
    PacketRecord,
    RelayCosts,
    SimConfig,
    SimReport,
    empirical_state_distribution,
    run_line_network,
    run_single_relay,
)
from .solver import (
    AverageCostResult,
    DiscountedSolution,
    LPSolution,
    OccupancyLP,
    ThresholdExtraction,
    TruncatedSpace,
    always_transmit_value_bound,
    build_occupancy_lp,
    clamped_transition,
    discounted_value_iteration,
    extract_thresholds,
    reachable_closure,
    relative_value_iteration,
    solve_occupancy_lp,
)

__version__ = "0.1.0"
