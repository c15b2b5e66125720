"""Relay-assisted slotted random access with multi-packet reception.

Analytical relay-queue and throughput models (two non-symmetric users, n
symmetric users), a lower-Hessenberg Markov chain toolkit with a numeric
oracle, and a slot-level Monte Carlo simulator.
"""

from .channel import (
    BASELINE,
    DEST,
    RELAY,
    LinkKind,
    NetworkGeometry,
    SymmetricLinkParams,
    received_power_factor,
    star_geometry,
    success_probability,
    symmetric_link_params,
    symmetric_success,
)
from .dtmc import (
    HessenbergChain,
    SteadyState,
    build_chain,
    steady_state_closed_form,
    steady_state_oracle,
    steady_state_truncated,
)
from .errors import (
    ChainError,
    ConfigError,
    GeometryError,
    RelayModelError,
    TruncationError,
    UnstableQueueError,
)
from .results import DIVERGED, ArrivalProbabilities, QueueCharacterization, ThroughputReport
from .symmetric import (
    SymmetricScenario,
    arrival_probabilities_n,
    characterize_queue_n,
    optimal_user_count,
    service_rate_n,
    throughput_n,
    throughput_vs_q,
)
from .two_user import (
    TwoUserScenario,
    arrival_probabilities,
    characterize_queue,
    service_rate,
    throughput,
)

__version__ = "0.1.0"
