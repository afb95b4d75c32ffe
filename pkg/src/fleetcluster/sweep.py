"""Parameter sweeps: one independent solve per value, optionally in parallel."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, is_dataclass, replace
from pathlib import Path

import numpy as np

from .errors import FleetClusterError, ScenarioError
from .report import solve_scenario
from .scenario import Scenario
from .synthetic import diesel_only

log = logging.getLogger(__name__)

# sweeps over this path scale the carbon cap by the diesel-only benchmark
CAP_FRACTION = "emissions.cap_fraction"


@dataclass
class SweepSpec:
    parameter: str
    values: list[float]
    jobs: int = 1

    def __post_init__(self):
        if not self.values:
            raise ScenarioError("sweep needs at least one value")
        if self.jobs < 1:
            raise ScenarioError("jobs must be >= 1")


@dataclass
class SweepPoint:
    value: float
    status: str
    objective: float = math.nan
    bound: float = math.nan
    gap: float = math.nan
    emissions_kg: float = math.nan
    design: dict = field(default_factory=dict)
    breakdown: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and not math.isnan(self.objective)


@dataclass
class SweepResult:
    parameter: str
    points: list[SweepPoint]
    benchmark_emissions_kg: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def table(self) -> str:
        keys = sorted({k for p in self.points for k in p.design})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["value", "status", "objective", "bound", "gap", "emissions_kg", *keys, "error"])
        for p in self.points:
            w.writerow([p.value, p.status, repr(p.objective), repr(p.bound), repr(p.gap), repr(p.emissions_kg),
                        *[p.design.get(k, "") for k in keys], p.error or ""])
        return buf.getvalue()


def set_path(obj, dotted: str, value):
    """Copy of a nested dataclass with one attribute replaced."""
    head, _, rest = dotted.partition(".")
    if not is_dataclass(obj) or not hasattr(obj, head):
        raise ScenarioError(f"sweep parameter {dotted!r} does not resolve")
    if not rest:
        return replace(obj, **{head: value})
    return replace(obj, **{head: set_path(getattr(obj, head), rest, value)})


def benchmark_emissions(sc: Scenario) -> float:
    _, res, rep = solve_scenario(diesel_only(sc))
    if not res.has_solution:
        raise FleetClusterError(f"diesel benchmark for {sc.name} ended {res.status}")
    return rep.emissions_kg


def _point(args) -> SweepPoint:
    sc, value = args
    try:
        _, res, rep = solve_scenario(sc)
    except FleetClusterError as exc:
        return SweepPoint(value, "error", error=f"{type(exc).__name__}: {exc}")
    log.info("sweep point %s=%r status=%s objective=%r", sc.name, value, res.status, res.objective)
    return SweepPoint(value, rep.status, rep.objective, rep.bound, rep.gap, rep.emissions_kg, rep.design, rep.breakdown)


def monotonicity(points: list[SweepPoint], rel_tol: float = 1e-6) -> dict:
    """Sound checks on the optimal cost as a function of the parameter.

    Bounds and incumbents from separate MILP solves are only comparable across
    points through ``objective(a) >= bound(b)``: if point ``a`` is the more
    restrictive problem, its incumbent can never drop below the other's proven
    lower bound. The diagnostic records, for each direction, the pairs that
    contradict that direction.
    """
    good = sorted((p for p in points if p.ok), key=lambda p: p.value)
    out = {}
    for label, sign in (("nondecreasing", 1), ("nonincreasing", -1)):
        bad = []
        for a, b in zip(good, good[1:]):
            # under `label`, the larger-cost side is b for +1, a for -1
            hi, lo = (b, a) if sign > 0 else (a, b)
            slack = rel_tol * max(1.0, abs(lo.bound))
            if hi.objective < lo.bound - slack:
                bad.append((a.value, b.value))
        out[f"cost_{label}"] = not bad
        out[f"cost_{label}_violations"] = bad
    out["bounds"] = [(p.value, p.bound, p.objective) for p in good]
    return out


def count_trend(points: list[SweepPoint], key: str) -> str:
    """``nondecreasing``, ``nonincreasing``, ``constant`` or ``mixed`` in the
    parameter value, for one design-summary entry."""
    vals = [p.design.get(key, 0.0) for p in sorted((p for p in points if p.ok), key=lambda p: p.value)]
    inc = all(b >= a for a, b in zip(vals, vals[1:]))
    dec = all(b <= a for a, b in zip(vals, vals[1:]))
    if inc and dec:
        return "constant"
    return "nondecreasing" if inc else "nonincreasing" if dec else "mixed"


def run_sweep(sc: Scenario, spec: SweepSpec) -> SweepResult:
    """Solve ``sc`` once per sweep value. Failures are recorded per point and
    the sweep carries on; results come back sorted by value."""
    bench = None
    scenarios = []
    for v in spec.values:
        if spec.parameter == CAP_FRACTION:
            if bench is None:
                bench = benchmark_emissions(sc)
            s = set_path(sc, "emissions.annual_cap_kg", float(v) * bench)
        else:
            s = set_path(sc, spec.parameter, v)
        scenarios.append((replace(s, name=f"{sc.name}[{spec.parameter}={v}]"), v))
    if spec.jobs > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            points = list(pool.map(_point, scenarios))
    else:
        points = [_point(a) for a in scenarios]
    points.sort(key=lambda p: p.value)
    res = SweepResult(spec.parameter, points, bench)
    res.diagnostics = monotonicity(points)
    keys = sorted({k for p in points for k in p.design if k.startswith("vehicles.")})
    res.diagnostics["vehicle_trends"] = {k: count_trend(points, k) for k in keys}
    return res


def write_sweep(res: SweepResult, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = out / "sweep.csv"
    p.write_text(res.table())
    (out / "sweep_diagnostics.json").write_text(
        json.dumps({"parameter": res.parameter, "benchmark_emissions_kg": res.benchmark_emissions_kg,
                    **res.diagnostics}, indent=2, default=_jsonable)
    )
    return p


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))
