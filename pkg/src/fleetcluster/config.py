"""Scenario configuration files: loading, validation and scenario assembly.

A configuration is one YAML document. Tabular inputs (blocks, tariffs,
capacity factors, temperatures, emission factors) live in CSV files whose
paths are resolved relative to the configuration file. Per-interval series
use a long layout with columns ``day_index,interval,value``; any series may
instead be given inline as a scalar.

Validation never stops at the first problem: every issue is collected with
the file and line it came from, warnings are kept separate from errors, and
only errors block a run.
"""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .der import DerParameters, GridUpgrade, PeakGroup
from .errors import ScenarioError, ValidationFailed
from .fleet import DIESEL, FUEL_KINDS, ChargerType, DepartureEnergyMode, VehicleType
from .hydrogen import H2Parameters
from .milp import SolveConfig
from .objective import CostBook, EmissionBook, diesel_price_per_kwh
from .scenario import Scenario
from .synthetic import charger_catalog, random_scenario, vehicle_catalog
from .time_grid import BLOCK_COLUMNS, TimeGrid, TripBlock, block_from_clock, parse_clock

SERIES_COLUMNS = ("day_index", "interval", "value")


# ------------------------------------------------------------------ reporting
@dataclass
class Issue:
    level: str  # "error" | "warning"
    message: str
    source: str = ""  # "file:line" when known

    def __str__(self) -> str:
        return f"{self.source}: {self.message}" if self.source else self.message


@dataclass
class ValidationReport:
    issues: list[Issue] = field(default_factory=list)

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.level == "error"]

    @property
    def warnings(self) -> list[Issue]:
        return [i for i in self.issues if i.level == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def error(self, msg: str, source: str = "") -> None:
        self.issues.append(Issue("error", msg, source))

    def warn(self, msg: str, source: str = "") -> None:
        self.issues.append(Issue("warning", msg, source))

    def lines(self) -> list[str]:
        return [f"{i.level.upper()} {i}" for i in self.issues]


# ------------------------------------------------------------------ raw config
@dataclass
class ScenarioConfig:
    """Parsed configuration document plus where it came from."""

    data: dict
    path: Path | None = None
    lines: dict[tuple, int] = field(default_factory=dict)  # key path -> 1-based line

    @property
    def base_dir(self) -> Path:
        return self.path.parent if self.path else Path.cwd()

    def where(self, *keys) -> str:
        name = self.path.name if self.path else "<config>"
        for n in range(len(keys), 0, -1):
            if keys[:n] in self.lines:
                return f"{name}:{self.lines[keys[:n]]}"
        return name

    def get(self, *keys, default=None):
        cur: Any = self.data
        for k in keys:
            if not isinstance(cur, dict) or k not in cur:
                return default
            cur = cur[k]
        return cur

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p

    def with_value(self, dotted: str, value) -> "ScenarioConfig":
        data = copy.deepcopy(self.data)
        cur = data
        keys = dotted.split(".")
        for k in keys[:-1]:
            cur = cur.setdefault(k, {})
        cur[keys[-1]] = value
        return ScenarioConfig(data, self.path, self.lines)


def _line_map(node, prefix=()) -> dict[tuple, int]:
    out = {prefix: node.start_mark.line + 1}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            out.update(_line_map(v, prefix + (k.value,)))
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            out.update(_line_map(v, prefix + (i,)))
    return out


def parse_config(text: str, path: str | Path | None = None) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text) or {}
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path or '<config>'}: cannot parse YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{path or '<config>'}: top level must be a mapping")
    return ScenarioConfig(data, Path(path) if path else None, _line_map(node) if node is not None else {})


def load_config(path: str | Path) -> ScenarioConfig:
    p = Path(path)
    if not p.exists():
        raise ScenarioError(f"config file {p} does not exist")
    return parse_config(p.read_text(), p)


# ------------------------------------------------------------------ tables
def load_series_csv(path: Path, shape: tuple[int, int], rep: ValidationReport) -> np.ndarray | None:
    """Long-format ``day_index,interval,value`` table to an (S, T) array.
    Missing cells are errors; so are duplicates and out-of-range indices."""
    S, T = shape
    if not path.exists():
        rep.error(f"file {path} does not exist")
        return None
    out = np.full(shape, np.nan)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in SERIES_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            rep.error(f"missing columns {missing}", f"{path.name}:1")
            return None
        for line, row in enumerate(reader, start=2):
            where = f"{path.name}:{line}"
            try:
                s, t, v = int(row["day_index"]), int(row["interval"]), float(row["value"])
            except (TypeError, ValueError):
                rep.error(f"unparseable row {row}", where)
                continue
            if not (0 <= s < S and 1 <= t <= T):
                rep.error(f"index (day {s}, interval {t}) outside the {S}x{T} grid", where)
                continue
            if not math.isnan(out[s, t - 1]):
                rep.error(f"duplicate entry for day {s}, interval {t}", where)
            out[s, t - 1] = v
    holes = int(np.isnan(out).sum())
    if holes:
        rep.error(f"{holes} of {S * T} day/interval cells missing", path.name)
        return None
    return out


def write_series_csv(path: str | Path, values: np.ndarray) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for s in range(values.shape[0]):
            for t in range(values.shape[1]):
                w.writerow([s, t + 1, repr(float(values[s, t]))])


def _series(cfg: ScenarioConfig, keys: tuple, shape, rep: ValidationReport, default=None):
    """Scalar, nested list, or a CSV path for an (S, T) series."""
    raw = cfg.get(*keys, default=default)
    where = cfg.where(*keys)
    if raw is None:
        return None
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, str):
        return load_series_csv(cfg.resolve(raw), shape, rep)
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        rep.error(f"{'.'.join(map(str, keys))}: expected a number, a table path or a nested list", where)
        return None
    if arr.shape != shape:
        rep.error(f"{'.'.join(map(str, keys))}: shape {arr.shape}, expected {shape}", where)
        return None
    return arr


# ------------------------------------------------------------------ sections
def _blocks(path: Path, grid: TimeGrid, rep: ValidationReport) -> list[TripBlock]:
    out = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in BLOCK_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            rep.error(f"missing columns {missing}", f"{path.name}:1")
            return out
        for line, row in enumerate(reader, start=2):
            where = f"{path.name}:{line}"
            try:
                start, end = parse_clock(row["start_hhmm"]), parse_clock(row["end_hhmm"])
                if end - start > 24.0:
                    rep.warn(f"block {row['block_id']} is longer than 24 h", where)
                out.append(block_from_clock(
                    row["block_id"].strip(), int(row["day_index"]), start, end, float(row["distance_km"]), grid
                ))
            except (ScenarioError, ValueError, TypeError) as exc:
                rep.error(str(exc), where)
    return out


def _grid(cfg: ScenarioConfig, rep: ValidationReport) -> TimeGrid | None:
    g = cfg.get("grid", default={}) or {}
    try:
        T = int(g.get("intervals_per_day", 24))
        return TimeGrid(
            num_days=int(g.get("num_days", 1)),
            intervals_per_day=T,
            interval_hours=float(g.get("interval_hours", 24.0 / T)),
            reference_time=float(g.get("reference_time", 3.0)),
            day_weights=tuple(g.get("day_weights", ())),
            year_length=float(g.get("year_length", 365.0)),
        )
    except (ScenarioError, TypeError, ValueError) as exc:
        rep.error(f"grid: {exc}", cfg.where("grid"))
        return None


def _vehicles(cfg: ScenarioConfig, rep: ValidationReport) -> list[VehicleType]:
    out = []
    for n, raw in enumerate(cfg.get("vehicles", default=[]) or []):
        where = cfg.where("vehicles", n)
        raw = dict(raw)
        base = raw.pop("catalog", None)
        try:
            if base is not None:
                found = vehicle_catalog((base,))
                if not found:
                    rep.error(f"unknown catalog vehicle {base!r}", where)
                    continue
                v = found[0]
                fields = {**v.__dict__, "id": raw.pop("id", base), **raw}
            else:
                fields = raw
            out.append(VehicleType(**fields))
        except (ScenarioError, TypeError) as exc:
            rep.error(f"vehicle entry: {exc}", where)
    return out


def _chargers(cfg: ScenarioConfig, vehicles: list[VehicleType], rep: ValidationReport) -> list[ChargerType]:
    out = []
    vids = {v.id for v in vehicles}
    for n, raw in enumerate(cfg.get("chargers", default=[]) or []):
        where = cfg.where("chargers", n)
        raw = dict(raw)
        base = raw.pop("catalog", None)
        try:
            if base is not None:
                found = charger_catalog(vehicles, (base,))
                if not found:
                    rep.error(f"unknown catalog charger {base!r}", where)
                    continue
                c = found[0]
                fields = {**c.__dict__, "id": raw.pop("id", base), **raw}
            else:
                fields = raw
            fields["power_rating_kw_by_vehicle"] = dict(fields.get("power_rating_kw_by_vehicle", {}))
            unknown = sorted(set(fields["power_rating_kw_by_vehicle"]) - vids)
            if unknown:
                rep.error(f"charger {fields.get('id')}: rating for unknown vehicle ids {unknown}", where)
                continue
            out.append(ChargerType(**fields))
        except (ScenarioError, TypeError) as exc:
            rep.error(f"charger entry: {exc}", where)
    return out


def _der(cfg, grid: TimeGrid, rep) -> DerParameters | None:
    d = dict(cfg.get("der", default={}) or {})
    shape = (grid.num_days, grid.intervals_per_day)
    cf = _series(cfg, ("der", "solar_cap_factor"), shape, rep, default=0.0)
    if cf is None:
        return None
    cf = np.broadcast_to(np.asarray(cf, dtype=float), shape).copy()
    if (cf > 1.0).any():
        rep.warn(f"solar capacity factor reaches {cf.max():g} (> 1)", cfg.where("der", "solar_cap_factor"))
    if (cf < 0.0).any():
        rep.error("solar capacity factor is negative somewhere", cfg.where("der", "solar_cap_factor"))
    d.pop("solar_cap_factor", None)
    groups_raw = d.pop("peak_groups", None)
    if groups_raw is None:
        groups = [PeakGroup("all", tuple(grid.days), 0.0)]
    else:
        groups = [PeakGroup(g["name"], tuple(g["days"]), float(g["rate_per_kw"])) for g in groups_raw]
    upgrade = d.pop("grid_upgrade", None)
    if upgrade is True:
        upgrade = GridUpgrade()
    elif isinstance(upgrade, dict):
        upgrade = GridUpgrade(**upgrade)
    elif not upgrade:
        upgrade = None
    for key in ("solar_cap_max_kw", "grid_cap_kw", "curtail_cap_kw", "battery_energy_max_kwh"):
        if d.get(key) is None:
            d.pop(key, None)
    try:
        p = DerParameters(solar_cap_factor=cf, peak_groups=groups, grid_upgrade=upgrade, **d)
        p.check_groups(grid.num_days)
        p.big_m()
        return p
    except (ScenarioError, TypeError) as exc:
        rep.error(f"der: {exc}", cfg.where("der"))
        return None


def _h2(cfg, rep) -> H2Parameters:
    d = dict(cfg.get("h2", default={}) or {})
    if "delivery_window" in d:
        d["delivery_window"] = tuple(d["delivery_window"])
    if d.get("delivery_intervals") is not None:
        d["delivery_intervals"] = tuple(d["delivery_intervals"])
    try:
        return H2Parameters(**d)
    except (ScenarioError, TypeError) as exc:
        rep.error(f"h2: {exc}", cfg.where("h2"))
        return H2Parameters()


def _costs(cfg, grid: TimeGrid, rep) -> CostBook:
    d = dict(cfg.get("costs", default={}) or {})
    shape = (grid.num_days, grid.intervals_per_day)
    out = {}
    for key in ("grid_price", "h2_delivered_price", "diesel_price"):
        if key in d:
            out[key] = _series(cfg, ("costs", key), shape, rep)
            d.pop(key)
    gal = d.pop("diesel_price_per_gallon", None)
    if gal is not None:
        out["diesel_price"] = diesel_price_per_kwh(float(gal))
    for key, val in out.items():
        if val is not None and np.min(val) < 0:
            rep.warn(f"{key} is negative somewhere", cfg.where("costs", key))
    try:
        return CostBook(**{k: v for k, v in out.items() if v is not None}, **d)
    except (ScenarioError, TypeError) as exc:
        rep.error(f"costs: {exc}", cfg.where("costs"))
        return CostBook()


def _emissions(cfg, grid: TimeGrid, rep) -> EmissionBook:
    d = dict(cfg.get("emissions", default={}) or {})
    shape = (grid.num_days, grid.intervals_per_day)
    if "grid_factor" in d:
        d["grid_factor"] = _series(cfg, ("emissions", "grid_factor"), shape, rep)
        if d["grid_factor"] is None:
            d.pop("grid_factor")
    try:
        return EmissionBook(**d)
    except (ScenarioError, TypeError) as exc:
        rep.error(f"emissions: {exc}", cfg.where("emissions"))
        return EmissionBook()


def _solve(cfg, rep) -> SolveConfig:
    d = dict(cfg.get("solve", default={}) or {})
    try:
        return SolveConfig(**d)
    except (TypeError, ValueError) as exc:
        rep.error(f"solve: {exc}", cfg.where("solve"))
        return SolveConfig()


def _synthetic(cfg, rep) -> Scenario | None:
    d = dict(cfg.get("synthetic"))
    seed = int(d.pop("seed", 0))
    diesel_capital = d.pop("diesel_capital_per_year", None)
    try:
        sc = random_scenario(seed, **d)
    except (ScenarioError, TypeError) as exc:
        rep.error(f"synthetic: {exc}", cfg.where("synthetic"))
        return None
    if diesel_capital is not None:
        sc.vehicles = [replace(v, capital_cost_per_year=float(diesel_capital)) if v.fuel_kind == DIESEL else v
                       for v in sc.vehicles]
    return sc


# ------------------------------------------------------------------ assembly
def build_scenario(cfg: ScenarioConfig) -> tuple[Scenario | None, ValidationReport]:
    """Assemble a :class:`Scenario` and collect every issue found on the way."""
    rep = ValidationReport()
    name = str(cfg.get("name", default=cfg.path.stem if cfg.path else "scenario"))
    if cfg.get("synthetic") is not None:
        sc = _synthetic(cfg, rep)
        if sc is None:
            return None, rep
        sc.name = name
        _apply_toggles(cfg, sc, rep)
        sc.solve = _solve(cfg, rep) if cfg.get("solve") else sc.solve
        _structural_checks(cfg, sc, rep)
        return (sc if rep.ok else None), rep

    grid = _grid(cfg, rep)
    if grid is None:
        return None, rep
    blocks = []
    blocks_path = cfg.get("blocks")
    if blocks_path is None:
        rep.error("no 'blocks' table given", cfg.where())
    else:
        p = cfg.resolve(blocks_path)
        if not p.exists():
            rep.error(f"blocks file {p} does not exist", cfg.where("blocks"))
        else:
            blocks = _blocks(p, grid, rep)
    vehicles = _vehicles(cfg, rep)
    chargers = _chargers(cfg, vehicles, rep)
    der = _der(cfg, grid, rep)
    temps = _series(cfg, ("temperatures",), (grid.num_days, grid.intervals_per_day), rep)
    if isinstance(temps, float):
        temps = np.full((grid.num_days, grid.intervals_per_day), temps)
    overrides = {}
    vids = {v.id for v in vehicles}
    bids = {b.id for b in blocks}
    for n, row in enumerate(cfg.get("efficiency_overrides", default=[]) or []):
        where = cfg.where("efficiency_overrides", n)
        if row.get("vehicle") not in vids:
            rep.error(f"efficiency override names unknown vehicle id {row.get('vehicle')!r}", where)
            continue
        if blocks and row.get("block") not in bids:
            rep.error(f"efficiency override names unknown block id {row.get('block')!r}", where)
            continue
        overrides[(row["block"], row["vehicle"])] = float(row["kwh_per_km"])
    sc = None
    if der is not None:
        sc = Scenario(
            name=name,
            grid=grid,
            blocks=blocks,
            vehicles=vehicles,
            chargers=chargers,
            der=der,
            h2=_h2(cfg, rep),
            costs=_costs(cfg, grid, rep),
            emissions=_emissions(cfg, grid, rep),
            temperatures=temps,
            efficiency_overrides=overrides,
            solve=_solve(cfg, rep),
            seed=cfg.get("seed"),
            meta={"currency": cfg.get("currency", default="USD")},
        )
        _apply_toggles(cfg, sc, rep)
        _structural_checks(cfg, sc, rep)
    return (sc if rep.ok else None), rep


def _apply_toggles(cfg, sc: Scenario, rep) -> None:
    t = cfg.get("toggles", default={}) or {}
    if "mode" in t:
        try:
            sc.mode = DepartureEnergyMode(t["mode"])
        except ValueError:
            rep.error(f"unknown departure energy mode {t['mode']!r}", cfg.where("toggles", "mode"))
    if "allow_diesel" in t:
        sc.allow_diesel = bool(t["allow_diesel"])
    if t.get("carbon_cap_kg") is not None:
        sc.emissions = EmissionBook(**{**sc.emissions.__dict__, "annual_cap_kg": float(t["carbon_cap_kg"])})
    if t.get("grid_upgrade"):
        up = t["grid_upgrade"]
        sc.der.grid_upgrade = GridUpgrade(**up) if isinstance(up, dict) else GridUpgrade()


def _structural_checks(cfg, sc: Scenario, rep) -> None:
    g = sc.grid
    seen = set()
    for b in sc.blocks:
        if b.id in seen:
            rep.error(f"duplicate block id {b.id}", cfg.where("blocks"))
        seen.add(b.id)
        if not 0 <= b.day < g.num_days:
            rep.error(f"block {b.id} on day {b.day}, grid has {g.num_days} days", cfg.where("blocks"))
        if b.end_time - b.start_time > 24.0 - 1e-9:
            rep.warn(f"block {b.id} lasts 24 h or more", cfg.where("blocks"))
    ids = [v.id for v in sc.vehicles]
    if len(set(ids)) != len(ids):
        rep.error("duplicate vehicle ids", cfg.where("vehicles"))
    cids = [c.id for c in sc.chargers]
    if len(set(cids)) != len(cids):
        rep.error("duplicate charger ids", cfg.where("chargers"))
    if not sc.vehicles:
        rep.error("no vehicle types configured", cfg.where("vehicles"))
    for v in sc.vehicles:
        if v.fuel_kind not in FUEL_KINDS:
            rep.error(f"vehicle {v.id}: unknown fuel kind", cfg.where("vehicles"))
        if not any(c.rating(v.id) > 0 for c in sc.chargers):
            rep.warn(f"vehicle {v.id} has no charger rated for it", cfg.where("chargers"))
    if sc.has_fcev() and not sc.h2.enabled:
        rep.error("hydrogen vehicles configured but the hydrogen station is disabled", cfg.where("h2"))
    if sc.temperatures is not None and np.isnan(sc.temperatures).any():
        rep.error("temperature table has gaps", cfg.where("temperatures"))
    if any(v.hot_coeff_pct_per_degF or v.cold_coeff_pct_per_degF for v in sc.vehicles) and sc.temperatures is None:
        rep.warn("temperature coefficients set but no temperatures given; nominal efficiency used", cfg.where())


def validate_scenario(cfg: ScenarioConfig | str | Path) -> ValidationReport:
    if not isinstance(cfg, ScenarioConfig):
        cfg = load_config(cfg)
    return build_scenario(cfg)[1]


def scenario_from_config(cfg: ScenarioConfig | str | Path) -> Scenario:
    """Validated scenario or :class:`ValidationFailed` carrying the full report."""
    if not isinstance(cfg, ScenarioConfig):
        cfg = load_config(cfg)
    sc, rep = build_scenario(cfg)
    if sc is None:
        raise ValidationFailed(rep)
    return sc
