"""MV network model, Newton-Raphson load flow and comparison harness."""
from .network import (
    Bus,
    Line,
    NetworkError,
    NetworkModel,
    Transformer,
    build_ybus,
    fixture_path,
    format_network,
    load_fixture,
    load_network_file,
    parse_network,
)
from .scenario import (
    Band,
    ComparisonStats,
    ScenarioResult,
    compare_results,
    default_assignment,
    error_stats,
    load_buses,
    read_scenario_csv,
    repeat_and_band,
    scenario_run,
)
from .solver import (
    BusInjection,
    LoadFlowResult,
    branch_flows,
    bus_power,
    jacobian,
    losses,
    mismatch,
    nr_solve,
    slack_power,
)

__all__ = [
    "Bus", "Line", "NetworkError", "NetworkModel", "Transformer", "build_ybus", "fixture_path",
    "format_network", "load_fixture", "load_network_file", "parse_network", "Band",
    "ComparisonStats", "ScenarioResult", "compare_results", "default_assignment", "error_stats",
    "load_buses", "read_scenario_csv", "repeat_and_band", "scenario_run", "BusInjection",
    "LoadFlowResult", "branch_flows", "bus_power", "jacobian", "losses", "mismatch", "nr_solve",
    "slack_power",
]
