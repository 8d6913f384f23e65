"""System-level simulator of sensing-based semi-persistent scheduling for
vehicular broadcast messaging, with HARQ retransmissions, one-shot
reselections, congestion control, IPG/PRR statistics and an analytical model
of the IPG tail distribution."""

__version__ = "0.1.0"

from .channel import (  # noqa: F401
    AttemptReception,
    ChannelConfig,
    PathlossParams,
    attempt_sinr,
    harq_combine,
    nakagami_power_fading,
    received_power,
)
from .congestion import CongestionState, frames_per_cycle, itt_from_density  # noqa: F401
from .engine import (  # noqa: F401
    ReplicationResult,
    ScenarioConfig,
    SimEvent,
    merge_replications,
    run_replication,
)
from .metrics import Ccdf, MetricStore, ccdf, distance_bin, prr, tail_slope  # noqa: F401
from .resource_grid import (  # noqa: F401
    ResourcePool,
    TxSlotId,
    harq_window,
    slot_count,
)
from .sps import (  # noqa: F401
    CandidateList,
    CounterConfig,
    SchedulerState,
    SensingHistory,
    build_candidate_list,
    draw_counter,
    expected_reselection_interval,
    on_bsm_transmitted,
)
from .tail_model import (  # noqa: F401
    ReselectionParams,
    TailCurve,
    TailModelConfig,
    compare_slopes,
    oracle_tail,
    p_u,
    q_i,
    q_k,
    tail,
)
