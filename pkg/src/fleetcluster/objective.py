"""Annualized cost objective, carbon cap and the fleet-to-supply coupling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .der import DerHandles
from .errors import ScenarioError, UnregisteredVariable
from .fleet import BATTERY, DIESEL, HYDROGEN, FleetHandles
from .hydrogen import H2Handles, initial_inventory_cost
from .milp import LinExpr, ModelInstance, lin_sum
from .time_grid import TimeGrid

DIESEL_KWH_PER_GALLON = 40.7


def diesel_price_per_kwh(price_per_gallon: float, kwh_per_gallon: float = DIESEL_KWH_PER_GALLON) -> float:
    return price_per_gallon / kwh_per_gallon


def _series(value, shape: tuple[int, int], name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), shape).copy()
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{name} has non-finite entries")
    return arr


@dataclass
class CostBook:
    """Operating price series are ``(S, T_d)`` arrays (scalars broadcast).

    Hydrogen equipment rates are per kg/h of throughput; capacities in kW are
    converted through the matching kWh/kg factor.
    """

    grid_price: np.ndarray | float = 0.0  # $/kWh
    diesel_price: np.ndarray | float = 0.0  # $/kWh of diesel energy
    h2_delivered_price: np.ndarray | float = 0.0  # $/kg
    solar_per_kw: float = 152.0
    battery_per_kwh: float = 27.4
    battery_power_per_kw: float = 0.0
    tank_per_kg: float = 20.9
    buffer_per_kg: float = 33.3
    elz_per_kgph: float = 80.0
    lcpr_per_kgph: float = 15.4
    cpr_per_kgph: float = 308.3
    cl_per_kgph: float = 94.1

    def resolved(self, grid: TimeGrid) -> "CostBook":
        shape = (grid.num_days, grid.intervals_per_day)
        out = CostBook(**self.__dict__)
        out.grid_price = _series(self.grid_price, shape, "grid price")
        out.diesel_price = _series(self.diesel_price, shape, "diesel price")
        out.h2_delivered_price = _series(self.h2_delivered_price, shape, "delivered hydrogen price")
        for k, v in out.__dict__.items():
            if np.any(np.asarray(v) < 0):
                raise ScenarioError(f"cost {k} is negative")
        return out


@dataclass
class EmissionBook:
    grid_factor: np.ndarray | float = 0.0  # kg CO2 / kWh
    diesel_factor: float = 0.25  # kg CO2 / kWh diesel energy
    delivered_h2_factor: float = 0.0  # kg CO2 / kg H2
    annual_cap_kg: float | None = None

    def resolved(self, grid: TimeGrid) -> "EmissionBook":
        shape = (grid.num_days, grid.intervals_per_day)
        out = EmissionBook(_series(self.grid_factor, shape, "grid emission factor"), self.diesel_factor,
                           self.delivered_h2_factor, self.annual_cap_kg)
        if np.any(out.grid_factor < 0) or out.diesel_factor < 0 or out.delivered_h2_factor < 0:
            raise ScenarioError("emission factors must be >= 0")
        if out.annual_cap_kg is not None and out.annual_cap_kg < 0:
            raise ScenarioError("emission cap must be >= 0")
        return out


@dataclass
class Coupling:
    bev_demand: dict[tuple[int, int], LinExpr]
    diesel_demand: dict[tuple[int, int], LinExpr]
    h2_demand: dict[tuple[int, int], LinExpr]


def add_coupling(
    model: ModelInstance, fh: FleetHandles, h2: H2Handles | None, energy_content_kwh_per_kg: float = 33.3
) -> Coupling:
    """Split pooled charging power by fuel kind; tie FCEV refuelling to the dispenser cooling load."""
    g = fh.grid
    kinds = {k: fh.ids_of_kind(k) for k in (BATTERY, DIESEL, HYDROGEN)}
    out = Coupling({}, {}, {})
    for s in g.days:
        for t in g.intervals:
            for kind, store in ((BATTERY, out.bev_demand), (DIESEL, out.diesel_demand), (HYDROGEN, out.h2_demand)):
                store[(s, t)] = lin_sum(fh.charge_power[(i, s, t)] for i in kinds[kind])
    if h2 is None:
        if kinds[HYDROGEN]:
            raise ScenarioError("hydrogen vehicles present but the hydrogen station is disabled")
        return out
    ratio = energy_content_kwh_per_kg / h2.params.cl_kwh_per_kg
    for s in g.days:
        for t in g.intervals:
            model.eq(out.h2_demand[(s, t)], ratio * h2.cl[(s, t)], f"coupling.h2[{s},{t}]")
    return out


def _require(cond: bool, what: str) -> None:
    if not cond:
        raise UnregisteredVariable(f"objective references {what}, which is not registered")


def assemble_objective(
    model: ModelInstance,
    costs: CostBook,
    grid: TimeGrid,
    fh: FleetHandles,
    der: DerHandles,
    coupling: Coupling,
    h2: H2Handles | None = None,
) -> dict[str, LinExpr]:
    """Build the annualized cost as named terms, set it as the objective and
    return the terms so a breakdown can be evaluated from any solution."""
    c = costs.resolved(grid)
    for v in fh.vtypes:
        _require(v.id in fh.vehicle_count, f"vehicle count for {v.id}")
    for ch in fh.chargers:
        _require(ch.id in fh.charger_count, f"charger count for {ch.id}")
    _require(all(k in fh.assign for k in fh.pairs), "block assignment variables")
    _require(bool(der.grid), "grid draw variables")

    dT = grid.interval_hours
    w = grid.day_weights
    terms: dict[str, LinExpr] = {}
    terms["vehicle_capital"] = lin_sum(fh.vehicle_count[v.id] * v.capital_cost_per_year for v in fh.vtypes)
    terms["charger_capital"] = lin_sum(fh.charger_count[j.id] * j.capital_cost_per_year for j in fh.chargers)
    dist = {b.id: b.distance_km for b in fh.blocks}
    maint = {v.id: v.maintenance_cost_per_km for v in fh.vtypes}
    terms["maintenance"] = lin_sum(fh.assign[(k, i)] * (dist[k] * maint[i]) for k, i in fh.pairs)
    terms["demand_charge"] = lin_sum(der.peak[g.name] * g.rate_per_kw for g in der.params.peak_groups)
    grid_e, diesel_e = LinExpr(), LinExpr()
    for s in grid.days:
        for t in grid.intervals:
            grid_e.add_term(der.grid[(s, t)], w[s] * dT * c.grid_price[s, t - 1])
            diesel_e.add_term(coupling.diesel_demand[(s, t)], w[s] * dT * c.diesel_price[s, t - 1])
    terms["grid_energy"] = grid_e
    terms["diesel_fuel"] = diesel_e
    terms["solar_capital"] = der.pv_cap * c.solar_per_kw
    terms["battery_capital"] = LinExpr().add_term(der.batt_energy_cap, c.battery_per_kwh)
    terms["battery_power_capital"] = LinExpr().add_term(der.batt_power_cap, c.battery_power_per_kw)
    up = der.params.grid_upgrade
    terms["grid_upgrade"] = der.grid_upgrade * up.cost_per_kw if up is not None else LinExpr()
    if h2 is not None:
        p = h2.params
        deliv = LinExpr()
        for s in grid.days:
            for t in grid.intervals:
                deliv.add_term(h2.delivered[(s, t)], w[s] * c.h2_delivered_price[s, t - 1])
        terms["h2_delivered"] = deliv
        terms["h2_initial_inventory"] = initial_inventory_cost(h2, grid, c.h2_delivered_price)
        terms["h2_tank_capital"] = h2.tank_cap * c.tank_per_kg
        terms["h2_buffer_capital"] = h2.buffer_cap * c.buffer_per_kg
        terms["h2_elz_capital"] = h2.elz_cap * (c.elz_per_kgph / p.elz_kwh_per_kg)
        terms["h2_lcpr_capital"] = h2.lcpr_cap * (c.lcpr_per_kgph / p.lcpr_kwh_per_kg)
        terms["h2_cpr_capital"] = h2.cpr_cap * (c.cpr_per_kgph / p.cpr_kwh_per_kg)
        terms["h2_cl_capital"] = h2.cl_cap * (c.cl_per_kgph / p.cl_kwh_per_kg)
    model.set_objective(lin_sum(terms.values()))
    return terms


def emissions_expr(
    grid: TimeGrid, emissions: EmissionBook, der: DerHandles, coupling: Coupling, h2: H2Handles | None
) -> LinExpr:
    """Annual kg CO2 from grid draw, diesel energy and delivered hydrogen."""
    e = emissions.resolved(grid)
    dT, w = grid.interval_hours, grid.day_weights
    out = LinExpr()
    for s in grid.days:
        for t in grid.intervals:
            out.add_term(der.grid[(s, t)], w[s] * dT * e.grid_factor[s, t - 1])
            out.add_term(coupling.diesel_demand[(s, t)], w[s] * dT * e.diesel_factor)
            if h2 is not None:
                out.add_term(h2.delivered[(s, t)], w[s] * e.delivered_h2_factor)
    return out


def add_carbon_cap(model: ModelInstance, emissions: EmissionBook, expr: LinExpr):
    cap = emissions.annual_cap_kg
    if cap is None or math.isinf(cap):
        return None
    return model.le(expr, cap, "carbon.cap")


def breakdown(terms: Mapping[str, LinExpr], x: np.ndarray) -> dict[str, float]:
    return {k: float(v.value(x)) for k, v in terms.items()}
