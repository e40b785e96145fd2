"""Monte Carlo experiment harness and command-line interface.

Four resource-allocation pipelines are compared:

  PA-PPC  greedy assignment + power allocation with the budget as a bound
  PA-PMP  greedy assignment + full-budget power allocation
  RA-PMP  random assignment + full-budget power allocation
  FA-PMP  fixed assignment  + full-budget power allocation

The harness sweeps the per-user power budget (dBm), draws `trials`
channel realizations per point, and writes one CSV row per
(case, pmax, trial). Per-trial seeds derive from the base seed with a
splitmix64-style mixer, so the same trial index sees the same channel in
every case and at every budget, and trial sets can be extended without
reshuffling earlier draws.

Subcommands: `count` (size of the factor-graph search space), `assign`
(print one factor graph), `allocate` (single allocation with trace),
`experiment` (full sweep to CSV).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .assignment import (
    count_factor_graphs,
    fast_assignment,
    fixed_assignment,
    random_assignment,
    shuffled_pool,
)
from .channel import Scenario, generate_channel, noise_power_from_density, scenario_by_name
from .metrics import sum_rate_exact
from .model import AllocationResult, SystemParams
from .powalloc import SolverConfig, dinkelbach_allocate

CASES = ("FA-PMP", "PA-PMP", "PA-PPC", "RA-PMP")

_MASK64 = (1 << 64) - 1


def _mix64(x: int) -> int:
    """splitmix64 finalizer; decorrelates consecutive seed inputs."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def channel_seed(base_seed: int, trial: int) -> int:
    return _mix64((base_seed + trial) & _MASK64)


def assignment_seed(base_seed: int, trial: int) -> int:
    return _mix64((channel_seed(base_seed, trial) + 1) & _MASK64)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment run needs; mirrors the TOML schema."""

    scenario: str = "fig1_equal"
    num_subcarriers: int = 4
    num_users: int = 6
    codeword_sparsity: int = 2
    noise_density_dbm_per_hz: float = -174.0
    subcarrier_bandwidth_hz: float = 180e3
    circuit_power_w: float = 1e-3
    pathloss_exponent: float = 3.67
    cell_radius_m: float = 100.0
    pmax_sweep_dbm: tuple = tuple(range(-30, -7, 2))
    trials: int = 150
    seed: int = 1
    cases: tuple = CASES
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: str = "results.csv"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.pmax_sweep_dbm:
            raise ValueError("pmax_sweep_dbm must be non-empty")
        if not self.cases:
            raise ValueError("cases must be non-empty")
        for c in self.cases:
            if c not in CASES:
                raise ValueError(f"unknown case {c!r}; choose from {CASES}")
        object.__setattr__(self, "pmax_sweep_dbm", tuple(self.pmax_sweep_dbm))
        object.__setattr__(self, "cases", tuple(self.cases))

    def system_params(self, pmax_dbm: float) -> SystemParams:
        sigma2 = noise_power_from_density(
            self.noise_density_dbm_per_hz, self.subcarrier_bandwidth_hz
        )
        return SystemParams(
            num_subcarriers=self.num_subcarriers,
            num_users=self.num_users,
            codeword_sparsity=self.codeword_sparsity,
            noise_power=sigma2,
            circuit_power=self.circuit_power_w,
            max_power_per_user=np.full(self.num_users, dbm_to_watts(pmax_dbm)),
            subcarrier_bandwidth_hz=self.subcarrier_bandwidth_hz,
        )

    def scenario_object(self) -> Scenario:
        base = scenario_by_name(self.scenario)
        return dataclasses.replace(
            base,
            pathloss_exponent=self.pathloss_exponent,
            cell_radius_m=self.cell_radius_m,
        )


@dataclass(frozen=True)
class ResultRow:
    case: str
    scenario: str
    pmax_dbm: float
    trial: int
    seed: int
    ee_mac: float
    ee_exact: float
    sum_rate_mac: float
    sum_rate_exact: float
    total_power_w: float
    dinkelbach_iters: int
    converged: bool


CSV_COLUMNS = (
    "case",
    "scenario",
    "pmax_dbm",
    "trial",
    "seed",
    "ee_mac",
    "ee_exact",
    "sum_rate_mac",
    "sum_rate_exact",
    "total_power_w",
    "dinkelbach_iters",
    "converged",
)


def _build_factor_graph(case: str, channel, params: SystemParams, assign_seed: int):
    if case in ("PA-PPC", "PA-PMP"):
        pool = shuffled_pool(
            params.num_subcarriers, params.codeword_sparsity, assign_seed
        )
        return fast_assignment(channel, params, pool)
    if case == "RA-PMP":
        return random_assignment(params, assign_seed)
    if case == "FA-PMP":
        return fixed_assignment(params)
    raise ValueError(f"unknown case {case!r}; choose from {CASES}")


def run_case(
    case: str,
    channel,
    params: SystemParams,
    solver_config: SolverConfig,
    assign_seed: int = 0,
) -> AllocationResult:
    """Run one pipeline on one channel realization.

    PA cases build the factor graph greedily (pool shuffled by
    assign_seed) and allocate power in PPC or PMP mode; RA samples the
    graph randomly; FA uses the canonical fixed graph. The solver mode is
    forced to match the case suffix.
    """
    F = _build_factor_graph(case, channel, params, assign_seed)
    mode = "PPC" if case.endswith("PPC") else "PMP"
    config = dataclasses.replace(solver_config, mode=mode)
    return dinkelbach_allocate(F, channel, params, config)


def _exact_rate(result: AllocationResult, channel, params: SystemParams) -> float:
    # Entries assigned but unpowered contribute no rate or interference,
    # so the power support stands in for the factor graph here.
    support = (np.asarray(result.power.p) > 0).astype(np.int64).T
    return sum_rate_exact(support, result.power, channel, params)


def run_experiment(config: ExperimentConfig) -> list:
    """Full sweep: every (case, pmax, trial) combination, sorted by
    (case, pmax, trial). The same trial index reuses the same channel
    realization across cases and budgets (paired comparisons)."""
    scenario = config.scenario_object()
    rows = []
    channels = {}
    for case in sorted(config.cases):
        for pmax_dbm in sorted(config.pmax_sweep_dbm):
            params = config.system_params(pmax_dbm)
            for trial in range(config.trials):
                cseed = channel_seed(config.seed, trial)
                if trial not in channels:
                    channels[trial] = generate_channel(scenario, params, cseed)
                chan = channels[trial]
                result = run_case(
                    case,
                    chan,
                    params,
                    config.solver,
                    assign_seed=assignment_seed(config.seed, trial),
                )
                sr_exact = _exact_rate(result, chan, params)
                rows.append(
                    ResultRow(
                        case=case,
                        scenario=config.scenario,
                        pmax_dbm=pmax_dbm,
                        trial=trial,
                        seed=cseed,
                        ee_mac=result.ee,
                        ee_exact=sr_exact / result.total_power,
                        sum_rate_mac=result.sum_rate,
                        sum_rate_exact=sr_exact,
                        total_power_w=result.total_power,
                        dinkelbach_iters=len(result.dinkelbach_trace),
                        converged=result.converged,
                    )
                )
    return rows


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(table: list, path: str) -> None:
    """Write the result table; bytes are a pure function of the table."""
    if not table:
        raise ValueError("refusing to write an empty result table")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in table:
            writer.writerow(
                [_format_cell(getattr(row, col)) for col in CSV_COLUMNS]
            )


def summarize(table: list) -> str:
    """Per-(case, pmax) mean and standard error of ee_mac."""
    if not table:
        raise ValueError("cannot summarize an empty result table")
    groups = {}
    for row in table:
        groups.setdefault((row.case, row.pmax_dbm), []).append(row.ee_mac)
    lines = []
    for (case, pmax_dbm), values in sorted(groups.items()):
        arr = np.asarray(values)
        stderr = arr.std(ddof=1) / math.sqrt(len(arr)) if len(arr) > 1 else 0.0
        lines.append(
            f"{case}  pmax={pmax_dbm} dBm  ee_mac={arr.mean():.4f} "
            f"+- {stderr:.4f}  (n={len(arr)})"
        )
    return "\n".join(lines)


def _toml_to_config(data: dict) -> ExperimentConfig:
    known_sections = {"experiment", "system", "channel", "solver"}
    unknown = set(data) - known_sections
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    kwargs = {}
    section_fields = {
        "experiment": {
            "scenario": "scenario",
            "trials": "trials",
            "seed": "seed",
            "cases": "cases",
            "pmax_sweep_dbm": "pmax_sweep_dbm",
            "output": "output",
        },
        "system": {
            "num_subcarriers": "num_subcarriers",
            "num_users": "num_users",
            "codeword_sparsity": "codeword_sparsity",
            "noise_density_dbm_per_hz": "noise_density_dbm_per_hz",
            "subcarrier_bandwidth_hz": "subcarrier_bandwidth_hz",
            "circuit_power_w": "circuit_power_w",
        },
        "channel": {
            "pathloss_exponent": "pathloss_exponent",
            "cell_radius_m": "cell_radius_m",
        },
    }
    for section, mapping in section_fields.items():
        content = data.get(section, {})
        unknown_keys = set(content) - set(mapping)
        if unknown_keys:
            raise ValueError(
                f"unknown keys in [{section}]: {sorted(unknown_keys)}"
            )
        for key, attr in mapping.items():
            if key in content:
                value = content[key]
                if isinstance(value, list):
                    value = tuple(value)
                kwargs[attr] = value
    solver_data = data.get("solver", {})
    valid_solver = {f.name for f in dataclasses.fields(SolverConfig)}
    unknown_solver = set(solver_data) - valid_solver
    if unknown_solver:
        raise ValueError(f"unknown keys in [solver]: {sorted(unknown_solver)}")
    if isinstance(solver_data.get("beta"), list):
        solver_data = dict(solver_data, beta=tuple(solver_data["beta"]))
    kwargs["solver"] = SolverConfig(**solver_data)
    return ExperimentConfig(**kwargs)


def load_config(path: Optional[str]) -> ExperimentConfig:
    """ExperimentConfig from a TOML file, or all defaults when no path."""
    if path is None:
        return ExperimentConfig()
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return _toml_to_config(data)


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed & _MASK64
    if getattr(args, "trials", None) is not None:
        updates["trials"] = args.trials
    if getattr(args, "scenario", None) is not None:
        updates["scenario"] = args.scenario
    if getattr(args, "case", None) is not None:
        updates["cases"] = tuple(c.strip() for c in args.case.split(",") if c.strip())
    if getattr(args, "out", None) is not None:
        updates["output"] = args.out
    return dataclasses.replace(config, **updates) if updates else config


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="TOML config file")
    parser.add_argument("--seed", type=int, metavar="U64", help="base seed")
    parser.add_argument("--scenario", metavar="NAME", help="scenario preset name")


def _cmd_count(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    print(
        count_factor_graphs(
            config.num_subcarriers, config.codeword_sparsity, config.num_users
        )
    )
    return 0


def _single_instance(config: ExperimentConfig, args):
    pmax_dbm = args.pmax_dbm
    if pmax_dbm is None:
        pmax_dbm = max(config.pmax_sweep_dbm)
    params = config.system_params(pmax_dbm)
    chan = generate_channel(
        config.scenario_object(), params, channel_seed(config.seed, 0)
    )
    aseed = assignment_seed(config.seed, 0)
    return params, chan, aseed, pmax_dbm


def _cmd_assign(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    params, chan, aseed, _ = _single_instance(config, args)
    if args.method == "fast":
        pool = shuffled_pool(
            params.num_subcarriers, params.codeword_sparsity, aseed
        )
        F = fast_assignment(chan, params, pool)
    elif args.method == "random":
        F = random_assignment(params, aseed)
    else:
        F = fixed_assignment(params)
    for k in range(params.num_subcarriers):
        print(" ".join(str(int(v)) for v in F.entries[k]))
    return 0


def _cmd_allocate(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    params, chan, aseed, pmax_dbm = _single_instance(config, args)
    solver = dataclasses.replace(config.solver, mode=args.mode)
    F = _build_factor_graph(
        {"fast": "PA-PPC", "random": "RA-PMP", "fixed": "FA-PMP"}[args.method],
        chan,
        params,
        aseed,
    )
    result = dinkelbach_allocate(F, chan, params, solver)
    print(f"scenario={config.scenario} pmax_dbm={pmax_dbm} mode={args.mode}")
    for entry in result.dinkelbach_trace:
        print(f"t={entry.t} omega={entry.omega!r} A={entry.aux!r}")
    print(f"ee={result.ee!r}")
    print(f"sum_rate={result.sum_rate!r}")
    print(f"total_power_w={result.total_power!r}")
    print(f"converged={'true' if result.converged else 'false'}")
    return 0


def _cmd_experiment(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    table = run_experiment(config)
    emit_csv(table, config.output)
    print(summarize(table))
    print(f"wrote {len(table)} rows to {config.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scma-ee",
        description=(
            "Energy-efficient subcarrier assignment and power allocation "
            "experiments for uplink SCMA"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_count = sub.add_parser(
        "count", help="size of the factor-graph search space"
    )
    _add_common_flags(p_count)
    p_count.set_defaults(func=_cmd_count)

    p_assign = sub.add_parser("assign", help="print one factor graph")
    _add_common_flags(p_assign)
    p_assign.add_argument(
        "--method", choices=("fast", "random", "fixed"), default="fast"
    )
    p_assign.add_argument("--pmax-dbm", type=float, default=None)
    p_assign.set_defaults(func=_cmd_assign)

    p_alloc = sub.add_parser(
        "allocate", help="single-instance power allocation with trace"
    )
    _add_common_flags(p_alloc)
    p_alloc.add_argument(
        "--method", choices=("fast", "random", "fixed"), default="fast"
    )
    p_alloc.add_argument("--pmax-dbm", type=float, default=None)
    p_alloc.add_argument("--mode", choices=("PPC", "PMP"), default="PPC")
    p_alloc.set_defaults(func=_cmd_allocate)

    p_exp = sub.add_parser("experiment", help="full sweep to CSV")
    _add_common_flags(p_exp)
    p_exp.add_argument("--trials", type=int, metavar="N")
    p_exp.add_argument("--out", metavar="PATH", help="CSV output path")
    p_exp.add_argument(
        "--case", metavar="LIST", help="comma-separated subset of cases"
    )
    p_exp.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
