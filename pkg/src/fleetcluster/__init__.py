"""Integer-clustering MILP for co-designing bus fleets, depot charging, DER and hydrogen supply."""

from .config import ScenarioConfig, ValidationReport, load_config, scenario_from_config, validate_scenario
from .der import DerParameters, GridUpgrade, PeakGroup
from .errors import FleetClusterError, RecoveryFailed, ScenarioError, TooLarge, ValidationFailed
from .fleet import ChargerType, DepartureEnergyMode, VehicleType, compute_driving_efficiency, temperature_multiplier
from .hydrogen import H2Parameters
from .milp import ModelInstance, SolveConfig, count_variables, export_model, solve_model
from .objective import CostBook, EmissionBook
from .report import SolutionReport, solve_scenario
from .scenario import BuiltModel, Scenario, build_model, expected_variable_counts
from .sweep import SweepSpec, run_sweep
from .time_grid import TimeGrid, TripBlock, build_trip_matrices, discretize_block

__version__ = "0.1.0"


def run_scenario(config, out_dir=None):
    """Validate, build, solve and (optionally) write report tables for a
    configuration file or a parsed :class:`ScenarioConfig`."""
    sc = scenario_from_config(config)
    _, _, rep = solve_scenario(sc)
    if out_dir is not None:
        rep.write(out_dir)
    return rep
