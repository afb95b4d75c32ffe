"""Reference catalogs and seeded random scenario generation."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .der import DerParameters, PeakGroup
from .fleet import BATTERY, DIESEL, HYDROGEN, ChargerType, VehicleType
from .hydrogen import H2Parameters
from .objective import CostBook, EmissionBook, diesel_price_per_kwh
from .scenario import Scenario
from .time_grid import TimeGrid, TripBlock

KM_PER_MILE = 1.609344

# purchase price, service life (years), capacity kWh, range miles, $/km, kind,
# hot / cold temperature coefficients (% per degF)
_VEHICLES = {
    "bev_short": (800_000.0, 12, 225.0, 106.0, 0.64, BATTERY, 0.69, 0.85),
    "bev_long": (821_944.0, 12, 450.0, 197.0, 0.64, BATTERY, 0.69, 0.85),
    "fcev": (949_105.0, 12, 700.0, 350.0, 0.64, HYDROGEN, 0.42, 0.69),
    "diesel": (0.0, 1, 5013.0, 730.0, 0.88, DIESEL, 0.72, 0.01),
}

# purchase + installation, life, rating kW, kind
_CHARGERS = {
    "dcfc_l3": (37_000.0 + 22_626.0, 28, 50.0, BATTERY),
    "dcfc_l4": (45_000.0 + 22_626.0, 28, 150.0, BATTERY),
    "dcfc_l5": (349_000.0 + 250_000.0, 28, 500.0, BATTERY),
    "h2_dispenser": (65_000.0, 28, 7000.0, HYDROGEN),
    "diesel_dispenser": (0.0, 1, 72_000.0, DIESEL),
}


def vehicle_catalog(ids=None) -> list[VehicleType]:
    """Vehicle types with straight-line annualized capital and nominal
    efficiency taken as capacity over rated range."""
    out = []
    for vid, (price, life, cap, miles, maint, kind, hot, cold) in _VEHICLES.items():
        if ids is not None and vid not in ids:
            continue
        out.append(VehicleType(vid, cap, price / life, maint, cap / (miles * KM_PER_MILE), kind, hot, cold))
    return out


def charger_catalog(vehicles: list[VehicleType], ids=None) -> list[ChargerType]:
    out = []
    for cid, (price, life, kw, kind) in _CHARGERS.items():
        if ids is not None and cid not in ids:
            continue
        ratings = {v.id: kw for v in vehicles if v.fuel_kind == kind}
        if ids is None and not ratings:
            continue
        out.append(ChargerType(cid, price / life, ratings, kind))
    return out


def solar_profile(grid: TimeGrid, peak: float = 0.8, rng: np.random.Generator | None = None) -> np.ndarray:
    """Half-sine daylight capacity factor between 06:00 and 18:00 clock time."""
    S, T = grid.num_days, grid.intervals_per_day
    out = np.zeros((S, T))
    for t in range(1, T + 1):
        clock = (grid.reference_time + (t - 0.5) * grid.interval_hours) % 24.0
        if 6.0 <= clock <= 18.0:
            out[:, t - 1] = peak * math.sin(math.pi * (clock - 6.0) / 12.0)
    if rng is not None:
        out *= rng.uniform(0.6, 1.0, size=(S, 1))
    return np.clip(out, 0.0, 1.0)


def tou_price(grid: TimeGrid, off_peak: float = 0.05, on_peak: float = 0.15) -> np.ndarray:
    """Time-of-use energy price ($/kWh): on-peak 12:00-20:00 clock time."""
    T = grid.intervals_per_day
    row = np.full(T, off_peak)
    for t in grid.intervals_for_clock_window(12.0, 20.0):
        row[t - 1] = on_peak
    return np.tile(row, (grid.num_days, 1))


def default_peak_groups(num_days: int, summer_rate: float = 24.09, other_rate: float = 17.92) -> list[PeakGroup]:
    """First half of the days as summer, the rest non-summer."""
    half = max(1, num_days // 2)
    groups = [PeakGroup("summer", tuple(range(half)), summer_rate)]
    if num_days > half:
        groups.append(PeakGroup("non_summer", tuple(range(half, num_days)), other_rate))
    return groups


def random_blocks(
    rng: np.random.Generator,
    grid: TimeGrid,
    num_blocks: int,
    vehicles: list[VehicleType],
    duration_range: tuple[float, float] = (1.0, 6.0),
    speed_kmh: tuple[float, float] = (12.0, 25.0),
    start_window: tuple[float, float] = (1.0, 18.0),
    range_margin: float = 1.5,
) -> list[TripBlock]:
    """Blocks with Poisson arrivals over the start window.

    Distances are clipped so the longest-range vehicle type can serve every
    block even with efficiency degraded by ``range_margin``, which keeps each
    block range-feasible under any generated temperature profile.
    """
    max_range = max(v.energy_capacity_kwh / v.nominal_efficiency_kwh_per_km for v in vehicles)
    span = start_window[1] - start_window[0]
    out: list[TripBlock] = []
    per_day = [num_blocks // grid.num_days + (1 if s < num_blocks % grid.num_days else 0) for s in grid.days]
    for s, n in enumerate(per_day):
        rate = n / span if span > 0 else 1.0
        times = []
        t = start_window[0]
        while len(times) < n:
            t += rng.exponential(1.0 / rate)
            if t >= start_window[1]:
                t = start_window[0] + rng.uniform(0, span)
            times.append(t)
        for x0 in sorted(times):
            dur = rng.uniform(*duration_range)
            x1 = min(x0 + dur, 24.0)
            dist = min(rng.uniform(*speed_kmh) * (x1 - x0), 0.95 * max_range / range_margin)
            out.append(TripBlock(f"b{len(out)}", s, round(x0, 4), round(x1, 4), round(dist, 3)))
    return out


def random_scenario(
    seed: int,
    num_blocks: int = 8,
    num_days: int = 1,
    intervals_per_day: int = 24,
    vehicle_ids=("bev_short", "bev_long"),
    charger_ids=None,
    with_battery: bool = True,
    with_h2: bool | None = None,
    temperatures: bool = True,
    mode: str = "surplus",
    peak_price_range: tuple[float, float] = (0.10, 0.25),
    **block_kw,
) -> Scenario:
    """Seeded small scenario built from the reference catalogs."""
    rng = np.random.default_rng(seed)
    grid = TimeGrid.uniform(num_days, intervals_per_day)
    vehicles = vehicle_catalog(vehicle_ids)
    chargers = charger_catalog(vehicles, charger_ids)
    blocks = random_blocks(rng, grid, num_blocks, vehicles, **block_kw)
    temps = None
    if temperatures:
        base = rng.uniform(20.0, 90.0, size=(num_days, 1))
        swing = 10.0 * np.sin(np.linspace(0, 2 * np.pi, intervals_per_day, endpoint=False))[None, :]
        temps = np.round(base + swing, 2)
    has_fcev = any(v.fuel_kind == HYDROGEN for v in vehicles)
    der = DerParameters(
        solar_cap_factor=solar_profile(grid, rng=rng),
        solar_cap_max_kw=1500.0,
        peak_groups=default_peak_groups(num_days),
        battery_enabled=with_battery,
        battery_power_max_kw=2000.0 if with_battery else None,
    )
    costs = CostBook(
        grid_price=tou_price(grid, *np.round(rng.uniform([0.03, peak_price_range[0]], [0.08, peak_price_range[1]]), 4)),
        diesel_price=diesel_price_per_kwh(4.0),
        h2_delivered_price=8.0,
    )
    return Scenario(
        name=f"random-{seed}",
        grid=grid,
        blocks=blocks,
        vehicles=vehicles,
        chargers=chargers,
        der=der,
        h2=H2Parameters(enabled=has_fcev if with_h2 is None else with_h2),
        costs=costs,
        emissions=EmissionBook(grid_factor=np.round(rng.uniform(0.2, 0.5, size=(num_days, intervals_per_day)), 4)),
        temperatures=temps,
        mode=mode,
        seed=seed,
    )


def mixed_fleet_scenario(seed: int = 7, num_blocks: int = 12, diesel_capital_per_year: float = 1000.0) -> Scenario:
    """BEV, FCEV and diesel options on one day, used by the carbon and
    hydrogen-price sweeps. Diesel carries a small capital cost so its count is
    pinned down at the optimum rather than being free."""
    sc = random_scenario(
        seed,
        num_blocks=num_blocks,
        vehicle_ids=("bev_short", "bev_long", "fcev", "diesel"),
        charger_ids=("dcfc_l3", "dcfc_l4", "h2_dispenser", "diesel_dispenser"),
        with_h2=True,
    )
    sc.vehicles = [replace(v, capital_cost_per_year=diesel_capital_per_year) if v.fuel_kind == DIESEL else v for v in sc.vehicles]
    sc.name = f"mixed-{seed}"
    return sc


def diesel_only(sc: Scenario) -> Scenario:
    vehicles = [v for v in sc.vehicles if v.fuel_kind == DIESEL]
    chargers = [c for c in sc.chargers if c.fuel_kind == DIESEL]
    if not vehicles:
        vehicles = vehicle_catalog(("diesel",))
        chargers = charger_catalog(vehicles, ("diesel_dispenser",))
    return replace(sc, name=f"{sc.name}-diesel", vehicles=vehicles, chargers=chargers,
                   h2=replace(sc.h2, enabled=False), allow_diesel=True)
