"""Integer-clustering fleet model.

Vehicles are tracked per type: a count at the depot, a pooled charging power
and a pooled state of energy (SOE). Blocks are assigned to types with binary
indicators; departure energies move energy out of the pool and returns bring
the unused remainder back.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import InfeasibleBlockWarning, MissingTemperature, ScenarioError
from .milp import BINARY, CONTINUOUS, INTEGER, LinExpr, ModelInstance, Var, lin_sum
from .time_grid import TimeGrid, TripBlock, TripMatrices, discretize_block

BATTERY = "battery"
HYDROGEN = "hydrogen"
DIESEL = "diesel"
FUEL_KINDS = (BATTERY, HYDROGEN, DIESEL)

NEUTRAL_TEMP_F = 65.0


class DepartureEnergyMode(str, enum.Enum):
    EXACT = "exact"
    SURPLUS = "surplus"


@dataclass(frozen=True)
class VehicleType:
    id: str
    energy_capacity_kwh: float
    capital_cost_per_year: float
    maintenance_cost_per_km: float
    nominal_efficiency_kwh_per_km: float
    fuel_kind: str = BATTERY
    hot_coeff_pct_per_degF: float = 0.0
    cold_coeff_pct_per_degF: float = 0.0
    max_count: int | None = None

    def __post_init__(self):
        if self.energy_capacity_kwh <= 0:
            raise ScenarioError(f"vehicle {self.id}: energy capacity must be > 0")
        if self.nominal_efficiency_kwh_per_km <= 0:
            raise ScenarioError(f"vehicle {self.id}: efficiency must be > 0")
        if self.hot_coeff_pct_per_degF < 0 or self.cold_coeff_pct_per_degF < 0:
            raise ScenarioError(f"vehicle {self.id}: temperature coefficients must be >= 0")
        if self.fuel_kind not in FUEL_KINDS:
            raise ScenarioError(f"vehicle {self.id}: unknown fuel kind {self.fuel_kind!r}")


@dataclass(frozen=True)
class ChargerType:
    id: str
    capital_cost_per_year: float
    power_rating_kw_by_vehicle: Mapping[str, float]
    fuel_kind: str = BATTERY
    max_count: int | None = None

    def __post_init__(self):
        if any(p < 0 for p in self.power_rating_kw_by_vehicle.values()):
            raise ScenarioError(f"charger {self.id}: negative power rating")
        if self.fuel_kind not in FUEL_KINDS:
            raise ScenarioError(f"charger {self.id}: unknown fuel kind {self.fuel_kind!r}")

    def rating(self, vehicle_id: str) -> float:
        return float(self.power_rating_kw_by_vehicle.get(vehicle_id, 0.0))


# ----------------------------------------------------------------- efficiency
def temperature_multiplier(temp_f: float, vtype: VehicleType) -> float:
    delta = temp_f - NEUTRAL_TEMP_F
    if delta < 0:
        return 1.0 + vtype.cold_coeff_pct_per_degF / 100.0 * -delta
    if delta > 0:
        return 1.0 + vtype.hot_coeff_pct_per_degF / 100.0 * delta
    return 1.0


def compute_driving_efficiency(
    block: TripBlock,
    vtype: VehicleType,
    temp_profile: Sequence[float] | Mapping[int, float] | None,
    grid: TimeGrid,
) -> float:
    """kWh/km for ``block`` driven by ``vtype``: the nominal efficiency times the
    mean temperature multiplier over the block's active intervals.

    ``temp_profile`` is indexed by interval (a length-``T_d`` sequence, position
    ``t-1``, or a mapping keyed by ``t``). ``None`` means nominal conditions.
    """
    if temp_profile is None:
        return vtype.nominal_efficiency_kwh_per_km
    t0, t1 = discretize_block(block, grid)
    mults = []
    for t in range(t0, t1 + 1):
        if isinstance(temp_profile, Mapping):
            temp = temp_profile.get(t)
        else:
            temp = temp_profile[t - 1] if t - 1 < len(temp_profile) else None
        if temp is None or (isinstance(temp, float) and math.isnan(temp)):
            raise MissingTemperature(f"block {block.id}: no temperature for interval {t}")
        mults.append(temperature_multiplier(float(temp), vtype))
    return vtype.nominal_efficiency_kwh_per_km * float(np.mean(mults))


def efficiency_table(
    blocks: Sequence[TripBlock],
    vtypes: Sequence[VehicleType],
    grid: TimeGrid,
    temperatures: np.ndarray | None = None,
    overrides: Mapping[tuple[str, str], float] | None = None,
) -> dict[tuple[str, str], float]:
    """``eta[(block_id, vehicle_id)]`` for every pair."""
    out = {}
    for b in blocks:
        profile = None if temperatures is None else temperatures[b.day]
        for v in vtypes:
            out[(b.id, v.id)] = compute_driving_efficiency(b, v, profile, grid)
    for key, val in (overrides or {}).items():
        if key not in out:
            raise ScenarioError(f"efficiency override for unknown pair {key}")
        out[key] = float(val)
    return out


def feasible_pairs(
    blocks: Sequence[TripBlock], vtypes: Sequence[VehicleType], eta: Mapping[tuple[str, str], float]
) -> list[tuple[str, str]]:
    """(block, type) pairs whose trip energy fits in one vehicle."""
    return [
        (b.id, v.id)
        for b in blocks
        for v in vtypes
        if eta[(b.id, v.id)] * b.distance_km <= v.energy_capacity_kwh * (1 + 1e-12)
    ]


# ----------------------------------------------------------------- handles
@dataclass
class FleetHandles:
    """Everything downstream modules need from a fleet formulation.

    Entries are variables for the cluster model; the individual-vehicle model
    fills the same slots with aggregating expressions.
    """

    grid: TimeGrid
    blocks: list[TripBlock]
    vtypes: list[VehicleType]
    chargers: list[ChargerType]
    eta: dict[tuple[str, str], float]
    pairs: list[tuple[str, str]]
    vehicle_count: dict[str, Var | LinExpr] = field(default_factory=dict)
    charger_count: dict[str, Var | LinExpr] = field(default_factory=dict)
    assign: dict[tuple[str, str], Var | LinExpr] = field(default_factory=dict)
    departure: dict[tuple[str, str], Var | LinExpr] = field(default_factory=dict)
    charging_count: dict[tuple[str, str, int, int], Var | LinExpr] = field(default_factory=dict)
    charge_power: dict[tuple[str, int, int], Var | LinExpr] = field(default_factory=dict)
    soe: dict[tuple[str, int, int], Var | LinExpr] = field(default_factory=dict)
    at_depot: dict[tuple[str, int, int], LinExpr] = field(default_factory=dict)

    def vtype(self, i: str) -> VehicleType:
        return next(v for v in self.vtypes if v.id == i)

    def ids_of_kind(self, kind: str) -> list[str]:
        return [v.id for v in self.vtypes if v.fuel_kind == kind]

    def compatible(self) -> list[tuple[str, str]]:
        return [(v.id, c.id) for v in self.vtypes for c in self.chargers if c.rating(v.id) > 0]


def new_handles(
    grid: TimeGrid,
    blocks: Sequence[TripBlock],
    vtypes: Sequence[VehicleType],
    chargers: Sequence[ChargerType],
    eta: Mapping[tuple[str, str], float],
) -> FleetHandles:
    for c in chargers:
        for v in vtypes:
            if c.rating(v.id) > 0 and v.fuel_kind != c.fuel_kind:
                raise ScenarioError(f"charger {c.id} ({c.fuel_kind}) rates {v.id} ({v.fuel_kind})")
    return FleetHandles(grid, list(blocks), list(vtypes), list(chargers), dict(eta), feasible_pairs(blocks, vtypes, eta))


# ----------------------------------------------------------------- emission
def add_fleet_variables(model: ModelInstance, fh: FleetHandles) -> None:
    g = fh.grid
    for v in fh.vtypes:
        fh.vehicle_count[v.id] = model.add_var(
            f"fleet.Nv[{v.id}]", INTEGER, 0, math.inf if v.max_count is None else v.max_count
        )
    for c in fh.chargers:
        fh.charger_count[c.id] = model.add_var(
            f"fleet.Nc[{c.id}]", INTEGER, 0, math.inf if c.max_count is None else c.max_count
        )
    cap = {v.id: v.energy_capacity_kwh for v in fh.vtypes}
    for k, i in fh.pairs:
        fh.assign[(k, i)] = model.add_var(f"fleet.b[{k},{i}]", BINARY)
    for k, i in fh.pairs:
        fh.departure[(k, i)] = model.add_var(f"fleet.d[{k},{i}]", CONTINUOUS, 0, cap[i])
    for i, j in fh.compatible():
        for s in g.days:
            for t in g.intervals:
                fh.charging_count[(i, j, s, t)] = model.add_var(f"fleet.m[{i},{j},{s},{t}]")
    for v in fh.vtypes:
        for s in g.days:
            for t in g.intervals:
                fh.charge_power[(v.id, s, t)] = model.add_var(f"fleet.pv[{v.id},{s},{t}]")
    for v in fh.vtypes:
        for s in g.days:
            for t in range(1, g.intervals_per_day + 2):
                fh.soe[(v.id, s, t)] = model.add_var(f"fleet.q[{v.id},{s},{t}]")


def add_assignment_constraints(model: ModelInstance, fh: FleetHandles) -> list:
    """Each block goes to exactly one vehicle type."""
    by_block: dict[str, list[str]] = {b.id: [] for b in fh.blocks}
    for k, i in fh.pairs:
        by_block[k].append(i)
    handles = []
    for b in fh.blocks:
        if not by_block[b.id]:
            need = min(fh.eta[(b.id, v.id)] * b.distance_km for v in fh.vtypes) if fh.vtypes else math.inf
            warnings.warn(
                InfeasibleBlockWarning(
                    f"block {b.id}: no vehicle type can carry {need:.1f} kWh for {b.distance_km} km"
                ),
                stacklevel=2,
            )
        handles.append(
            model.eq(lin_sum(fh.assign[(b.id, i)] for i in by_block[b.id]), 1.0, f"fleet.assign[{b.id}]")
        )
    return handles


def add_depot_balance(model: ModelInstance, fh: FleetHandles, tm: TripMatrices) -> list:
    """Depot counts, charger occupancy and pooled charging-power limits."""
    g = fh.grid
    handles = []
    pairs_by_type: dict[str, list[str]] = {v.id: [] for v in fh.vtypes}
    for k, i in fh.pairs:
        pairs_by_type[i].append(k)
    for v in fh.vtypes:
        i = v.id
        for s in g.days:
            ks = [k for k in pairs_by_type[i] if fh.blocks[tm.index(k)].day == s]
            for t in g.intervals:
                n = LinExpr().add_term(fh.vehicle_count[i])
                for k in ks:
                    if tm.is_active(tm.index(k), t):
                        n.add_term(fh.assign[(k, i)], -1.0)
                fh.at_depot[(i, s, t)] = n
                handles.append(model.ge(n, 0.0, f"fleet.depot_nonneg[{i},{s},{t}]"))
    comp = fh.compatible()
    for v in fh.vtypes:
        i = v.id
        js = [j for (ii, j) in comp if ii == i]
        for s in g.days:
            for t in g.intervals:
                if js:
                    handles.append(
                        model.le(
                            lin_sum(fh.charging_count[(i, j, s, t)] for j in js),
                            fh.at_depot[(i, s, t)],
                            f"fleet.plugged[{i},{s},{t}]",
                        )
                    )
                rhs = LinExpr()
                for j in js:
                    rhs.add_term(fh.charging_count[(i, j, s, t)], next(c for c in fh.chargers if c.id == j).rating(i))
                handles.append(model.le(fh.charge_power[(i, s, t)], rhs, f"fleet.charge_power[{i},{s},{t}]"))
    for c in fh.chargers:
        is_ = [i for (i, j) in comp if j == c.id]
        if not is_:
            continue
        for s in g.days:
            for t in g.intervals:
                handles.append(
                    model.le(
                        lin_sum(fh.charging_count[(i, c.id, s, t)] for i in is_),
                        fh.charger_count[c.id],
                        f"fleet.charger_cap[{c.id},{s},{t}]",
                    )
                )
    return handles


def add_soe_dynamics(
    model: ModelInstance, fh: FleetHandles, tm: TripMatrices, mode: DepartureEnergyMode | str
) -> list:
    """Pooled SOE recursion, capacity limit, cyclic condition and the
    departure-energy bounds for the chosen mode."""
    mode = DepartureEnergyMode(mode)
    g = fh.grid
    T = g.intervals_per_day
    dT = g.interval_hours
    handles = []
    dist = {b.id: b.distance_km for b in fh.blocks}
    cap = {v.id: v.energy_capacity_kwh for v in fh.vtypes}

    for k, i in fh.pairs:
        need = fh.eta[(k, i)] * dist[k]
        b, d = fh.assign[(k, i)], fh.departure[(k, i)]
        if mode is DepartureEnergyMode.EXACT:
            handles.append(model.eq(d, need * b, f"fleet.dep_exact[{k},{i}]"))
        else:
            handles.append(model.ge(d, need * b, f"fleet.dep_lo[{k},{i}]"))
        handles.append(model.le(d, cap[i] * b, f"fleet.dep_hi[{k},{i}]"))

    for v in fh.vtypes:
        i = v.id
        for s in g.days:
            departs: dict[int, list[str]] = {}
            arrives: dict[int, list[str]] = {}
            for k, ii in fh.pairs:
                if ii != i:
                    continue
                kk = tm.index(k)
                if int(tm.days[kk]) != s:
                    continue
                departs.setdefault(tm.depart_index(kk), []).append(k)
                arrives.setdefault(tm.arrive_index(kk), []).append(k)
            for t in g.intervals:
                rhs = LinExpr().add_term(fh.soe[(i, s, t)]).add_term(fh.charge_power[(i, s, t)], dT)
                for k in departs.get(t + 1, ()):
                    rhs.add_term(fh.departure[(k, i)], -1.0)
                for k in arrives.get(t + 1, ()):
                    rhs.add_term(fh.departure[(k, i)], 1.0)
                    rhs.add_term(fh.assign[(k, i)], -fh.eta[(k, i)] * dist[k])
                handles.append(model.eq(fh.soe[(i, s, t + 1)], rhs, f"fleet.soe_dyn[{i},{s},{t}]"))
            for t in g.intervals:
                handles.append(
                    model.le(fh.soe[(i, s, t)], cap[i] * fh.at_depot[(i, s, t)], f"fleet.soe_cap[{i},{s},{t}]")
                )
            handles.append(model.eq(fh.soe[(i, s, 1)], fh.soe[(i, s, T + 1)], f"fleet.soe_cyclic[{i},{s}]"))
    return handles


def build_cluster_fleet(
    model: ModelInstance, fh: FleetHandles, tm: TripMatrices, mode: DepartureEnergyMode | str
) -> FleetHandles:
    add_fleet_variables(model, fh)
    add_assignment_constraints(model, fh)
    add_depot_balance(model, fh, tm)
    add_soe_dynamics(model, fh, tm, mode)
    return fh
