"""Slot-level simulator and schedulers for network-assisted adaptive video streaming."""

from dashsim.scenario import (
    BitrateLadder,
    ClientSpec,
    GenerationParams,
    ScenarioConfig,
    ScenarioError,
    StationSpec,
    WeightConfig,
    desk_params,
    generate_scenario,
    load_scenario,
    paper_params,
    save_scenario,
    validate_scenario,
)
from dashsim.channel import effective_throughputs, theoretical_throughput
from dashsim.engine import (
    ClientSession,
    ScheduleDecision,
    SchedulerContractError,
    SimulationTrace,
    StationState,
    blocks_required,
    run_simulation,
    update_buffer,
)
from dashsim.schedulers import (
    BbaScheduler,
    FixedAssignmentScheduler,
    GreedyScheduler,
    LowestRateScheduler,
    OracleGuardError,
    OracleScheduler,
    RbaScheduler,
    brute_force_schedule,
    make_scheduler,
)
from dashsim.metrics import (
    ClientMetrics,
    RunMetrics,
    SwitchingStats,
    average_quality,
    compute_client_metrics,
    compute_run_metrics,
    jain_index,
    pf_term,
    quality_of_rate,
    rmsd_utilization,
    switching,
    utility,
    utilization,
)

__version__ = "0.1.0"
