"""Solution extraction: design summary, cost breakdown, time series and audits."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .milp import AUDIT_FAILED, SolveResult, audit_residuals, flagged_families, value_of
from .objective import breakdown
from .scenario import BuiltModel

AUDIT_TOL = 1e-6


def _clean(v: float) -> float:
    # -0.0 from rounding integer columns reads badly in tables
    return 0.0 if v == 0 else float(v)


@dataclass
class SolutionReport:
    instance_id: str
    status: str
    objective: float
    bound: float
    gap: float
    wall_seconds: float
    backend: str
    design: dict = field(default_factory=dict)
    breakdown: dict = field(default_factory=dict)
    emissions_kg: float = math.nan
    series: list[dict] = field(default_factory=list)
    audit: dict = field(default_factory=dict)
    energy_audit: dict = field(default_factory=dict)
    flagged: list[str] = field(default_factory=list)
    seed: int | None = None
    meta: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)

    # ---------------------------------------------------------------- serde
    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, allow_nan=True)

    @classmethod
    def from_json(cls, text: str) -> "SolutionReport":
        return cls(**json.loads(text))

    @property
    def feasible(self) -> bool:
        return bool(self.values)

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "report.json": self.to_json(),
            "design.csv": _table([{"item": k, "value": v} for k, v in self.design.items()]),
            "breakdown.csv": _table(
                [{"term": k, "cost": v} for k, v in self.breakdown.items()] + [{"term": "total", "cost": self.objective}]
            ),
            "series.csv": _table(self.series),
            "audit.csv": _table(list(self.audit.values())),
        }
        paths = []
        for name, text in files.items():
            p = out / name
            p.write_text(text)
            paths.append(p)
        return paths


def _table(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def design_summary(bm: BuiltModel, x: np.ndarray) -> dict:
    fh, der, h2 = bm.fleet, bm.der, bm.h2
    d = {f"vehicles.{i}": _clean(round(value_of(v, x))) for i, v in fh.vehicle_count.items()}
    d.update({f"chargers.{j}": _clean(round(value_of(v, x))) for j, v in fh.charger_count.items()})
    d["solar_kw"] = _clean(value_of(der.pv_cap, x))
    d["battery_kw"] = _clean(value_of(der.batt_power_cap, x))
    d["battery_kwh"] = _clean(value_of(der.batt_energy_cap, x))
    if der.grid_upgrade is not None:
        d["grid_upgrade_kw"] = _clean(value_of(der.grid_upgrade, x))
    if h2 is not None:
        for key, var in (
            ("h2_tank_kg", h2.tank_cap),
            ("h2_buffer_kg", h2.buffer_cap),
            ("electrolyzer_kw", h2.elz_cap),
            ("lp_compressor_kw", h2.lcpr_cap),
            ("hp_compressor_kw", h2.cpr_cap),
            ("cooling_kw", h2.cl_cap),
        ):
            d[key] = _clean(value_of(var, x))
    return d


def dispatch_series(bm: BuiltModel, x: np.ndarray) -> list[dict]:
    g, fh, der, h2, cp = bm.scenario.grid, bm.fleet, bm.der, bm.h2, bm.coupling
    rows = []
    for s in g.days:
        for t in g.intervals:
            r = {
                "day": s,
                "interval": t,
                "clock_h": (g.reference_time + (t - 1) * g.interval_hours) % 24.0,
                "grid_kw": value_of(der.grid[(s, t)], x),
                "solar_kw": der.solar(s, t).value(x),
                "curtail_kw": value_of(der.curtail[(s, t)], x),
                "batt_charge_kw": value_of(der.batt_charge.get((s, t), 0.0), x),
                "batt_discharge_kw": value_of(der.batt_discharge.get((s, t), 0.0), x),
                "batt_soe_kwh": value_of(der.batt_soe.get((s, t), 0.0), x),
                "bev_kw": cp.bev_demand[(s, t)].value(x),
                "diesel_kw": cp.diesel_demand[(s, t)].value(x),
                "fcev_kw": cp.h2_demand[(s, t)].value(x),
            }
            if h2 is not None:
                r.update(
                    {
                        "elz_kw": value_of(h2.elz[(s, t)], x),
                        "lcpr_kw": value_of(h2.lcpr[(s, t)], x),
                        "cpr_kw": value_of(h2.cpr[(s, t)], x),
                        "cl_kw": value_of(h2.cl[(s, t)], x),
                        "h2_delivered_kg": value_of(h2.delivered[(s, t)], x),
                        "h2_tank_kg": value_of(h2.tank[(s, t)], x),
                        "h2_buffer_kg": value_of(h2.buffer[(s, t)], x),
                    }
                )
            for v in fh.vtypes:
                r[f"charge_kw.{v.id}"] = value_of(fh.charge_power[(v.id, s, t)], x)
                r[f"soe_kwh.{v.id}"] = value_of(fh.soe[(v.id, s, t)], x)
                r[f"at_depot.{v.id}"] = value_of(fh.at_depot[(v.id, s, t)], x)
            rows.append(r)
    return rows


def energy_audits(bm: BuiltModel, x: np.ndarray) -> dict:
    """Conservation identities recomputed from the solution, each as a max
    relative residual (plus the raw complementarity product)."""
    g, fh, der, h2 = bm.scenario.grid, bm.fleet, bm.der, bm.h2
    dT = g.interval_hours
    out: dict[str, float] = {}

    worst = 0.0
    dist = {b.id: b.distance_km for b in fh.blocks}
    day_of = {b.id: b.day for b in fh.blocks}
    for v in fh.vtypes:
        for s in g.days:
            charged = sum(value_of(fh.charge_power[(v.id, s, t)], x) * dT for t in g.intervals)
            used = sum(
                value_of(fh.assign[(k, i)], x) * fh.eta[(k, i)] * dist[k]
                for (k, i) in fh.pairs
                if i == v.id and day_of[k] == s
            )
            worst = max(worst, abs(charged - used) / max(1.0, charged, used))
    out["soe_telescoping"] = worst

    worst = 0.0
    if h2 is not None:
        p = h2.params
        for s in g.days:
            inflow = sum(value_of(h2.delivered[(s, t)], x) for t in g.intervals)
            inflow += sum(value_of(h2.lcpr[(s, t)], x) / p.lcpr_kwh_per_kg * dT for t in g.intervals)
            outflow = sum(value_of(h2.cl[(s, t)], x) / p.cl_kwh_per_kg * dT for t in g.intervals)
            worst = max(worst, abs(inflow - outflow) / max(1.0, inflow, outflow))
    out["h2_mass_balance"] = worst

    worst, product = 0.0, 0.0
    pr = der.params
    for s in g.days:
        if not der.batt_charge:
            break
        net, through = 0.0, 0.0
        for t in g.intervals:
            c = value_of(der.batt_charge[(s, t)], x)
            d = value_of(der.batt_discharge[(s, t)], x)
            net += (c * pr.charge_eff - d / pr.discharge_eff) * dT
            through += (c * pr.charge_eff + d / pr.discharge_eff) * dT
            product = max(product, c * d)
        worst = max(worst, abs(net) / max(1.0, through))
    out["battery_cyclic"] = worst
    out["complementarity_product"] = product
    out["complementarity_limit"] = 1e-6 * der.big_m if der.big_m else 0.0

    spill = 0.0
    for key, gv in der.grid.items():
        spill = max(spill, min(value_of(gv, x), value_of(der.curtail[key], x)))
    out["buy_and_spill_kw"] = spill

    em = bm.emissions.value(x)
    e = bm.scenario.emissions.resolved(g)
    recomputed = 0.0
    w = g.day_weights
    for s in g.days:
        for t in g.intervals:
            recomputed += w[s] * dT * value_of(der.grid[(s, t)], x) * e.grid_factor[s, t - 1]
            recomputed += w[s] * dT * bm.coupling.diesel_demand[(s, t)].value(x) * e.diesel_factor
            if h2 is not None:
                recomputed += w[s] * value_of(h2.delivered[(s, t)], x) * e.delivered_h2_factor
    out["carbon_recompute"] = abs(em - recomputed) / max(1.0, abs(em))
    return out


def make_report(bm: BuiltModel, res: SolveResult, audit_tol: float = AUDIT_TOL, keep_values: bool = True) -> SolutionReport:
    rep = SolutionReport(
        instance_id=bm.model.name,
        status=res.status,
        objective=res.objective,
        bound=res.bound,
        gap=res.gap,
        wall_seconds=res.wall_seconds,
        backend=res.backend,
        seed=bm.scenario.seed,
        meta=dict(bm.scenario.meta),
    )
    if res.x is None:
        rep.meta["hint"] = res.hint
        return rep
    x = res.x
    rep.design = design_summary(bm, x)
    rep.breakdown = breakdown(bm.terms, x)
    rep.emissions_kg = float(bm.emissions.value(x))
    rep.series = dispatch_series(bm, x)
    audit = audit_residuals(bm.model, x)
    rep.audit = {k: v.to_dict() for k, v in audit.items()}
    rep.energy_audit = energy_audits(bm, x)
    rep.flagged = flagged_families(audit, audit_tol)
    if rep.flagged:
        rep.status = AUDIT_FAILED
    if keep_values:
        rep.values = {info.name: float(x[j]) for j, info in enumerate(bm.model.variables)}
    return rep


def solve_scenario(sc, cfg=None, fleet_builder=None):
    """Build, solve and report one scenario; returns ``(built, result, report)``."""
    from .milp import solve_model
    from .scenario import build_model

    bm = build_model(sc, fleet_builder)
    res = solve_model(bm.model, cfg or sc.solve, instance_id=sc.name)
    return bm, res, make_report(bm, res)
