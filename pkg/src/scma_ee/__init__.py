"""Energy-efficient subcarrier assignment and power allocation for
uplink SCMA networks."""

from .assignment import (
    AssignmentInfeasibleError,
    CandidatePool,
    ExhaustiveResult,
    SearchSpaceCapError,
    count_factor_graphs,
    ee_increment,
    enumerate_candidates,
    exhaustive_assignment,
    fast_assignment,
    fixed_assignment,
    random_assignment,
    shuffled_pool,
)
from .channel import (
    Scenario,
    generate_channel,
    noise_power_from_density,
    scenario_by_name,
    scenario_presets,
)
from .expcli import (
    CASES,
    ExperimentConfig,
    ResultRow,
    emit_csv,
    run_case,
    run_experiment,
    summarize,
)
from .metrics import (
    energy_efficiency,
    per_user_rate,
    subcarrier_rate,
    sum_rate_exact,
    sum_rate_mac,
    total_power,
)
from .model import (
    AllocationResult,
    ChannelState,
    FactorGraph,
    PowerMatrix,
    SystemParams,
    TraceEntry,
    ValidationResult,
    validate_factor_graph,
    validate_power,
)
from .powalloc import (
    SolverConfig,
    auxiliary_value,
    dinkelbach_allocate,
    equal_split_power,
    kkt_power_update,
    multiplier_update,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationResult",
    "AssignmentInfeasibleError",
    "CASES",
    "CandidatePool",
    "ChannelState",
    "ExhaustiveResult",
    "ExperimentConfig",
    "FactorGraph",
    "PowerMatrix",
    "ResultRow",
    "Scenario",
    "SearchSpaceCapError",
    "SolverConfig",
    "SystemParams",
    "TraceEntry",
    "ValidationResult",
    "auxiliary_value",
    "count_factor_graphs",
    "dinkelbach_allocate",
    "ee_increment",
    "emit_csv",
    "energy_efficiency",
    "enumerate_candidates",
    "equal_split_power",
    "exhaustive_assignment",
    "fast_assignment",
    "fixed_assignment",
    "generate_channel",
    "kkt_power_update",
    "multiplier_update",
    "noise_power_from_density",
    "per_user_rate",
    "random_assignment",
    "run_case",
    "run_experiment",
    "scenario_by_name",
    "scenario_presets",
    "shuffled_pool",
    "subcarrier_rate",
    "sum_rate_exact",
    "sum_rate_mac",
    "summarize",
    "total_power",
    "validate_factor_graph",
    "validate_power",
]
