"""Scenario bundle and the end-to-end model assembly."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .der import DerHandles, DerParameters, add_battery_constraints, add_der_variables, add_grid_and_peak, add_power_balance
from .fleet import (
    DIESEL,
    HYDROGEN,
    ChargerType,
    DepartureEnergyMode,
    FleetHandles,
    VehicleType,
    build_cluster_fleet,
    efficiency_table,
    new_handles,
)
from .hydrogen import H2Handles, H2Parameters, add_h2_dynamics, add_h2_limits, add_h2_variables
from .milp import LinExpr, ModelInstance, SolveConfig
from .objective import (
    CostBook,
    Coupling,
    EmissionBook,
    add_carbon_cap,
    add_coupling,
    assemble_objective,
    emissions_expr,
)
from .time_grid import TimeGrid, TripBlock, TripMatrices, build_trip_matrices


@dataclass
class Scenario:
    name: str
    grid: TimeGrid
    blocks: list[TripBlock]
    vehicles: list[VehicleType]
    chargers: list[ChargerType]
    der: DerParameters
    h2: H2Parameters = field(default_factory=H2Parameters)
    costs: CostBook = field(default_factory=CostBook)
    emissions: EmissionBook = field(default_factory=EmissionBook)
    temperatures: np.ndarray | None = None  # (S, T_d) degrees F
    efficiency_overrides: Mapping[tuple[str, str], float] = field(default_factory=dict)
    mode: DepartureEnergyMode = DepartureEnergyMode.SURPLUS
    allow_diesel: bool = True
    solve: SolveConfig = field(default_factory=SolveConfig)
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def active_vehicles(self) -> list[VehicleType]:
        return [v for v in self.vehicles if self.allow_diesel or v.fuel_kind != DIESEL]

    def active_chargers(self) -> list[ChargerType]:
        return [c for c in self.chargers if self.allow_diesel or c.fuel_kind != DIESEL]

    def has_fcev(self) -> bool:
        return any(v.fuel_kind == HYDROGEN for v in self.active_vehicles())

    def with_mode(self, mode) -> "Scenario":
        return replace(self, mode=DepartureEnergyMode(mode))


@dataclass
class BuiltModel:
    scenario: Scenario
    model: ModelInstance
    trips: TripMatrices
    fleet: FleetHandles
    der: DerHandles
    h2: H2Handles | None
    coupling: Coupling
    terms: dict[str, LinExpr]
    emissions: LinExpr


def build_model(sc: Scenario, fleet_builder=None, freeze: bool = True) -> BuiltModel:
    """Emit every subsystem in dependency order: time grid, fleet, DER,
    hydrogen, then coupling, objective and carbon cap.

    ``fleet_builder`` swaps the clustered fleet formulation for another one
    that fills the same handles (the per-vehicle oracle uses this).
    """
    grid = sc.grid
    model = ModelInstance(sc.name)
    tm = build_trip_matrices(sc.blocks, grid)
    vehicles, chargers = sc.active_vehicles(), sc.active_chargers()
    eta = efficiency_table(sc.blocks, vehicles, grid, sc.temperatures, _filter_overrides(sc, vehicles))
    fh = new_handles(grid, sc.blocks, vehicles, chargers, eta)
    (fleet_builder or build_cluster_fleet)(model, fh, tm, sc.mode)

    der = add_der_variables(model, sc.der, grid)
    h2 = None
    if sc.h2.enabled:
        h2 = add_h2_variables(model, sc.h2, grid)
    coupling = add_coupling(model, fh, h2, sc.h2.energy_content_kwh_per_kg)
    add_battery_constraints(model, der, grid)
    add_grid_and_peak(model, der, grid)
    add_power_balance(model, der, grid, coupling.bev_demand, h2.electric_loads if h2 else ())
    if h2 is not None:
        add_h2_dynamics(model, h2, grid)
        add_h2_limits(model, h2, grid, has_fcev=sc.has_fcev())

    terms = assemble_objective(model, sc.costs, grid, fh, der, coupling, h2)
    em = emissions_expr(grid, sc.emissions, der, coupling, h2)
    add_carbon_cap(model, sc.emissions, em)
    if freeze:
        model.freeze()
    return BuiltModel(sc, model, tm, fh, der, h2, coupling, terms, em)


def _filter_overrides(sc: Scenario, vehicles: list[VehicleType]) -> dict:
    """Drop overrides for vehicle types switched off by toggles."""
    ids = {v.id for v in vehicles}
    return {k: v for k, v in sc.efficiency_overrides.items() if k[1] in ids}


def expected_variable_counts(sc: Scenario) -> dict[str, int]:
    """Closed-form variable counts for the clustered model, derived from the
    emission rules rather than by inspecting a built instance."""
    grid = sc.grid
    S, T = grid.num_days, grid.intervals_per_day
    vehicles, chargers = sc.active_vehicles(), sc.active_chargers()
    I, J = len(vehicles), len(chargers)
    eta = efficiency_table(sc.blocks, vehicles, grid, sc.temperatures, _filter_overrides(sc, vehicles))
    F = sum(1 for b in sc.blocks for v in vehicles if eta[(b.id, v.id)] * b.distance_km <= v.energy_capacity_kwh * (1 + 1e-12))
    C = sum(1 for v in vehicles for c in chargers if c.rating(v.id) > 0)
    L = len(sc.der.peak_groups)
    batt = sc.der.battery_enabled
    integer = I + J
    binary = F + (S * T if batt else 0)
    cont = F + C * S * T + I * S * T + I * S * (T + 1)
    cont += 1 + (2 if batt else 0) + (1 if sc.der.grid_upgrade is not None else 0)
    cont += 2 * S * T + (2 * S * T + S * (T + 1) if batt else 0) + L
    if sc.h2.enabled:
        cont += 6 + 5 * S * T + 2 * S * (T + 1)
    return {"continuous": cont, "integer": integer, "binary": binary}
