"""On-site hydrogen station: truck delivery, electrolysis, low-pressure tank,
compression into the high-pressure buffer, and cooling at the dispenser."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDeliveryWindow, ScenarioError
from .milp import LinExpr, ModelInstance, Var
from .time_grid import TimeGrid


@dataclass
class H2Parameters:
    elz_kwh_per_kg: float = 41.97
    lcpr_kwh_per_kg: float = 0.15
    cpr_kwh_per_kg: float = 3.0
    cl_kwh_per_kg: float = 0.2
    tank_lower_frac: float = 0.057
    buffer_lower_frac: float = 0.029
    tank_upper_frac: float = 1.0
    buffer_upper_frac: float = 1.0
    delivery_window: tuple[float, float] = (8.0, 18.0)  # clock hours
    delivery_intervals: tuple[int, ...] | None = None  # overrides the window
    delivery_cap_kg: float = math.inf
    energy_content_kwh_per_kg: float = 33.3
    enabled: bool = True
    electrolysis_enabled: bool = True

    def __post_init__(self):
        for name in ("elz_kwh_per_kg", "lcpr_kwh_per_kg", "cpr_kwh_per_kg", "cl_kwh_per_kg", "energy_content_kwh_per_kg"):
            if getattr(self, name) <= 0:
                raise ScenarioError(f"{name} must be > 0")
        for lo, hi in ((self.tank_lower_frac, self.tank_upper_frac), (self.buffer_lower_frac, self.buffer_upper_frac)):
            if not (0 <= lo < 1 and lo < hi <= 1):
                raise ScenarioError("storage fractions must satisfy 0 <= lower < 1 and lower < upper <= 1")

    def delivery_set(self, grid: TimeGrid) -> set[int]:
        if self.delivery_intervals is not None:
            bad = [t for t in self.delivery_intervals if not 1 <= t <= grid.intervals_per_day]
            if bad:
                raise ScenarioError(f"delivery intervals {bad} outside 1..{grid.intervals_per_day}")
            return set(self.delivery_intervals)
        return set(grid.intervals_for_clock_window(*self.delivery_window))


@dataclass
class H2Handles:
    params: H2Parameters
    tank_cap: Var
    buffer_cap: Var
    elz_cap: Var
    lcpr_cap: Var
    cpr_cap: Var
    cl_cap: Var
    delivered: dict[tuple[int, int], Var] = field(default_factory=dict)
    elz: dict[tuple[int, int], Var] = field(default_factory=dict)
    lcpr: dict[tuple[int, int], Var] = field(default_factory=dict)
    cpr: dict[tuple[int, int], Var] = field(default_factory=dict)
    cl: dict[tuple[int, int], Var] = field(default_factory=dict)
    tank: dict[tuple[int, int], Var] = field(default_factory=dict)
    buffer: dict[tuple[int, int], Var] = field(default_factory=dict)

    @property
    def electric_loads(self) -> list[dict[tuple[int, int], Var]]:
        return [self.elz, self.lcpr, self.cpr, self.cl]


def add_h2_variables(model: ModelInstance, p: H2Parameters, grid: TimeGrid) -> H2Handles:
    T = grid.intervals_per_day
    elz_ub = math.inf if p.electrolysis_enabled else 0.0
    h = H2Handles(
        p,
        model.add_var("h2.tank_cap"),
        model.add_var("h2.buffer_cap"),
        model.add_var("h2.elz_cap", ub=elz_ub),
        model.add_var("h2.lcpr_cap", ub=elz_ub),
        model.add_var("h2.cpr_cap"),
        model.add_var("h2.cl_cap"),
    )
    window = p.delivery_set(grid)
    for s in grid.days:
        for t in grid.intervals:
            ub = p.delivery_cap_kg if t in window else 0.0
            h.delivered[(s, t)] = model.add_var(f"h2.wdel[{s},{t}]", ub=ub)
    for store, tag in ((h.elz, "pelz"), (h.lcpr, "plcpr"), (h.cpr, "pcpr"), (h.cl, "pcl")):
        for s in grid.days:
            for t in grid.intervals:
                store[(s, t)] = model.add_var(f"h2.{tag}[{s},{t}]")
    for store, tag in ((h.tank, "wh"), (h.buffer, "wbf")):
        for s in grid.days:
            for t in range(1, T + 2):
                store[(s, t)] = model.add_var(f"h2.{tag}[{s},{t}]")
    return h


def add_h2_dynamics(model: ModelInstance, h: H2Handles, grid: TimeGrid) -> list:
    p = h.params
    dT, T = grid.interval_hours, grid.intervals_per_day
    out = []
    for s in grid.days:
        for t in grid.intervals:
            tank = (
                LinExpr()
                .add_term(h.tank[(s, t)])
                .add_term(h.lcpr[(s, t)], dT / p.lcpr_kwh_per_kg)
                .add_term(h.cpr[(s, t)], -dT / p.cpr_kwh_per_kg)
                .add_term(h.delivered[(s, t)])
            )
            out.append(model.eq(h.tank[(s, t + 1)], tank, f"h2.tank_dyn[{s},{t}]"))
        for t in grid.intervals:
            out.append(
                model.eq(
                    h.elz[(s, t)] * (1.0 / p.elz_kwh_per_kg),
                    h.lcpr[(s, t)] * (1.0 / p.lcpr_kwh_per_kg),
                    f"h2.elz_lockstep[{s},{t}]",
                )
            )
        for t in grid.intervals:
            buf = (
                LinExpr()
                .add_term(h.buffer[(s, t)])
                .add_term(h.cpr[(s, t)], dT / p.cpr_kwh_per_kg)
                .add_term(h.cl[(s, t)], -dT / p.cl_kwh_per_kg)
            )
            out.append(model.eq(h.buffer[(s, t + 1)], buf, f"h2.buffer_dyn[{s},{t}]"))
        out.append(model.eq(h.tank[(s, 1)], h.tank[(s, T + 1)], f"h2.tank_cyclic[{s}]"))
        out.append(model.eq(h.buffer[(s, 1)], h.buffer[(s, T + 1)], f"h2.buffer_cyclic[{s}]"))
    return out


def add_h2_limits(model: ModelInstance, h: H2Handles, grid: TimeGrid, has_fcev: bool = False) -> list:
    p = h.params
    if has_fcev and not p.electrolysis_enabled and not p.delivery_set(grid):
        warnings.warn(EmptyDeliveryWindow("FCEVs present but no delivery interval and no electrolysis"), stacklevel=2)
    out = []
    for s in grid.days:
        for t in grid.intervals:
            out.append(model.ge(h.tank[(s, t)], p.tank_lower_frac * h.tank_cap, f"h2.tank_lo[{s},{t}]"))
            out.append(model.le(h.tank[(s, t)], p.tank_upper_frac * h.tank_cap, f"h2.tank_hi[{s},{t}]"))
            out.append(model.ge(h.buffer[(s, t)], p.buffer_lower_frac * h.buffer_cap, f"h2.buffer_lo[{s},{t}]"))
            out.append(model.le(h.buffer[(s, t)], p.buffer_upper_frac * h.buffer_cap, f"h2.buffer_hi[{s},{t}]"))
        for store, cap, tag in (
            (h.elz, h.elz_cap, "elz"),
            (h.lcpr, h.lcpr_cap, "lcpr"),
            (h.cpr, h.cpr_cap, "cpr"),
            (h.cl, h.cl_cap, "cl"),
        ):
            for t in grid.intervals:
                out.append(model.le(store[(s, t)], cap, f"h2.{tag}_cap[{s},{t}]"))
    return out


def initial_inventory_cost(h: H2Handles, grid: TimeGrid, delivered_price: np.ndarray) -> LinExpr:
    """Hydrogen sitting in the tank and buffer at the start of each day,
    priced at that day's first-interval delivered price."""
    out = LinExpr()
    for s in grid.days:
        price = float(delivered_price[s, 0])
        out.add_term(h.tank[(s, 1)], price).add_term(h.buffer[(s, 1)], price)
    return out


def add_initial_inventory_cost(objective: LinExpr, h: H2Handles, grid: TimeGrid, delivered_price: np.ndarray) -> LinExpr:
    term = initial_inventory_cost(h, grid, delivered_price)
    objective.add_term(term)
    return term
