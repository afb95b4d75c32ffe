"""Depot distributed energy resources: solar, battery, grid connection and the
demand-charge peak trackers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BigMTooSmall, MissingCoupling, ScenarioError
from .milp import BINARY, LinExpr, ModelInstance, Var
from .time_grid import TimeGrid

DEFAULT_BIG_M_KW = 10_000.0


@dataclass(frozen=True)
class PeakGroup:
    name: str
    days: tuple[int, ...]
    rate_per_kw: float


@dataclass(frozen=True)
class GridUpgrade:
    """Grid capacity becomes ``base + upgrade`` with the upgrade priced per kW-year."""

    base_kw: float = 1000.0
    cost_per_kw: float = 500.0


@dataclass
class DerParameters:
    solar_cap_factor: np.ndarray
    solar_cap_max_kw: float = math.inf
    charge_eff: float = 0.9
    discharge_eff: float = 0.9
    soc_lower_frac: float = 0.2
    soc_upper_frac: float = 0.9
    grid_cap_kw: float = math.inf
    curtail_cap_kw: float = math.inf
    big_m_kw: float | None = None
    battery_power_max_kw: float | None = None
    battery_energy_max_kwh: float = math.inf
    peak_groups: list[PeakGroup] = field(default_factory=list)
    battery_enabled: bool = True
    grid_upgrade: GridUpgrade | None = None

    def __post_init__(self):
        self.solar_cap_factor = np.asarray(self.solar_cap_factor, dtype=float)
        if not 0 <= self.soc_lower_frac < self.soc_upper_frac <= 1:
            raise ScenarioError("battery SOC fractions must satisfy 0 <= lower < upper <= 1")
        for eff in (self.charge_eff, self.discharge_eff):
            if not 0 < eff <= 1:
                raise ScenarioError("battery efficiencies must lie in (0, 1]")

    def big_m(self) -> float:
        """Complementarity constant; also the cap on battery power capacity."""
        pmax = self.battery_power_max_kw
        if pmax is not None and math.isfinite(pmax):
            if self.big_m_kw is not None and self.big_m_kw < pmax:
                raise BigMTooSmall(f"big-M {self.big_m_kw} kW below battery power bound {pmax} kW")
            return float(pmax)
        m = DEFAULT_BIG_M_KW if self.big_m_kw is None else float(self.big_m_kw)
        if not (m > 0 and math.isfinite(m)):
            raise BigMTooSmall(f"big-M must be positive and finite, got {m}")
        return m

    def check_groups(self, num_days: int) -> None:
        seen: list[int] = []
        for g in self.peak_groups:
            seen.extend(g.days)
        if sorted(seen) != list(range(num_days)):
            raise ScenarioError(f"peak groups {[g.days for g in self.peak_groups]} do not partition {num_days} days")


@dataclass
class DerHandles:
    params: DerParameters
    big_m: float
    pv_cap: Var
    batt_power_cap: Var | float
    batt_energy_cap: Var | float
    grid_upgrade: Var | None
    grid: dict[tuple[int, int], Var] = field(default_factory=dict)
    curtail: dict[tuple[int, int], Var] = field(default_factory=dict)
    batt_charge: dict[tuple[int, int], Var | float] = field(default_factory=dict)
    batt_discharge: dict[tuple[int, int], Var | float] = field(default_factory=dict)
    batt_soe: dict[tuple[int, int], Var] = field(default_factory=dict)
    charge_indicator: dict[tuple[int, int], Var] = field(default_factory=dict)
    peak: dict[str, Var] = field(default_factory=dict)

    def solar(self, s: int, t: int) -> LinExpr:
        return LinExpr({self.pv_cap.index: float(self.params.solar_cap_factor[s, t - 1])})


def add_der_variables(model: ModelInstance, params: DerParameters, grid: TimeGrid) -> DerHandles:
    S, T = grid.num_days, grid.intervals_per_day
    if params.solar_cap_factor.shape != (S, T):
        raise ScenarioError(f"solar capacity factors have shape {params.solar_cap_factor.shape}, expected {(S, T)}")
    params.check_groups(S)
    M = params.big_m() if params.battery_enabled else 0.0
    pv = model.add_var("der.pv_cap", lb=0, ub=params.solar_cap_max_kw)
    if params.battery_enabled:
        pb = model.add_var("der.batt_power_cap", lb=0, ub=M)
        eb = model.add_var("der.batt_energy_cap", lb=0, ub=params.battery_energy_max_kwh)
    else:
        pb, eb = 0.0, 0.0
    up = model.add_var("der.grid_upgrade", lb=0) if params.grid_upgrade is not None else None
    h = DerHandles(params, M, pv, pb, eb, up)
    grid_ub = math.inf if params.grid_upgrade is not None else params.grid_cap_kw
    for s in grid.days:
        for t in grid.intervals:
            h.grid[(s, t)] = model.add_var(f"der.pg[{s},{t}]", lb=0, ub=grid_ub)
    for s in grid.days:
        for t in grid.intervals:
            h.curtail[(s, t)] = model.add_var(f"der.pcurt[{s},{t}]", lb=0, ub=params.curtail_cap_kw)
    if params.battery_enabled:
        for s in grid.days:
            for t in grid.intervals:
                h.batt_charge[(s, t)] = model.add_var(f"der.pbc[{s},{t}]")
        for s in grid.days:
            for t in grid.intervals:
                h.batt_discharge[(s, t)] = model.add_var(f"der.pbd[{s},{t}]")
        for s in grid.days:
            for t in range(1, T + 2):
                h.batt_soe[(s, t)] = model.add_var(f"der.eb[{s},{t}]")
        for s in grid.days:
            for t in grid.intervals:
                h.charge_indicator[(s, t)] = model.add_var(f"der.gamma[{s},{t}]", BINARY)
    for g in params.peak_groups:
        h.peak[g.name] = model.add_var(f"der.peak[{g.name}]")
    return h


def add_battery_constraints(model: ModelInstance, h: DerHandles, grid: TimeGrid) -> list:
    p = h.params
    if not p.battery_enabled:
        return []
    dT, T, M = grid.interval_hours, grid.intervals_per_day, h.big_m
    out = []
    for s in grid.days:
        for t in grid.intervals:
            nxt = (
                LinExpr()
                .add_term(h.batt_soe[(s, t)])
                .add_term(h.batt_charge[(s, t)], p.charge_eff * dT)
                .add_term(h.batt_discharge[(s, t)], -dT / p.discharge_eff)
            )
            out.append(model.eq(h.batt_soe[(s, t + 1)], nxt, f"der.batt_dyn[{s},{t}]"))
        out.append(model.eq(h.batt_soe[(s, 1)], h.batt_soe[(s, T + 1)], f"der.batt_cyclic[{s}]"))
        for t in grid.intervals:
            e = h.batt_soe[(s, t)]
            out.append(model.ge(e, p.soc_lower_frac * h.batt_energy_cap, f"der.batt_lo[{s},{t}]"))
            out.append(model.le(e, p.soc_upper_frac * h.batt_energy_cap, f"der.batt_hi[{s},{t}]"))
            out.append(
                model.le(h.batt_charge[(s, t)] + h.batt_discharge[(s, t)], h.batt_power_cap, f"der.batt_power[{s},{t}]")
            )
            g = h.charge_indicator[(s, t)]
            out.append(model.le(h.batt_charge[(s, t)], M * g, f"der.batt_chg[{s},{t}]"))
            out.append(model.le(h.batt_discharge[(s, t)], M - M * g, f"der.batt_dis[{s},{t}]"))
    return out


def add_grid_and_peak(model: ModelInstance, h: DerHandles, grid: TimeGrid) -> list:
    """Peak trackers per season group; the grid cap when it is a decision."""
    out = []
    for g in h.params.peak_groups:
        for s in g.days:
            for t in grid.intervals:
                out.append(model.ge(h.peak[g.name], h.grid[(s, t)], f"der.peak[{g.name},{s},{t}]"))
    up = h.params.grid_upgrade
    if up is not None:
        for s in grid.days:
            for t in grid.intervals:
                out.append(model.le(h.grid[(s, t)], up.base_kw + h.grid_upgrade, f"der.grid_cap[{s},{t}]"))
    return out


def add_power_balance(
    model: ModelInstance,
    h: DerHandles,
    grid: TimeGrid,
    bev_demand: dict[tuple[int, int], LinExpr] | None,
    h2_loads: Sequence[dict[tuple[int, int], Var]] = (),
) -> list:
    """Solar + grid = BEV charging + battery net charge + curtailment + hydrogen loads."""
    if bev_demand is None:
        raise MissingCoupling("BEV demand must be coupled before the power balance is emitted")
    out = []
    for s in grid.days:
        for t in grid.intervals:
            supply = h.solar(s, t).add_term(h.grid[(s, t)])
            use = LinExpr().add_term(bev_demand[(s, t)]).add_term(h.curtail[(s, t)])
            if h.params.battery_enabled:
                use.add_term(h.batt_charge[(s, t)]).add_term(h.batt_discharge[(s, t)], -1.0)
            for load in h2_loads:
                use.add_term(load[(s, t)])
            out.append(model.eq(supply, use, f"der.balance[{s},{t}]"))
    return out
