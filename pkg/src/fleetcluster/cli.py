"""Command-line driver.

Exit codes: 0 success, 1 solve ended without a usable solution (or the
residual audit failed), 2 invalid input, 3 disaggregation could not recover a
per-vehicle schedule.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import load_config, scenario_from_config, validate_scenario
from .errors import FleetClusterError, RecoveryFailed, ScenarioError, ValidationFailed
from .milp import GAP_FEASIBLE, OPTIMAL, export_model
from .oracle import aggregation_residual, disaggregate, oracle_compare
from .report import solve_scenario
from .scenario import build_model
from .sweep import SweepSpec, run_sweep, write_sweep

EXIT_OK, EXIT_SOLVE, EXIT_INPUT, EXIT_RECOVERY = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fleetcluster", description="Depot fleet and energy-system planning MILP")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", required=True, type=Path, help="scenario YAML file")
        if out:
            sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--mip-gap", type=float, default=None)
        sp.add_argument("--time-limit", type=float, default=None)
        sp.add_argument("--mode", choices=("exact", "surplus"), default=None, help="departure energy mode")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("validate", help="check a scenario and list every problem"), out=False)
    common(sub.add_parser("run", help="build, solve and write report tables"))
    sw = sub.add_parser("sweep", help="solve once per value of one parameter")
    common(sw)
    sw.add_argument("--jobs", type=int, default=None)
    sw.add_argument("--parameter", default=None, help="overrides the config's sweep.parameter")
    sw.add_argument("--values", default=None, help="comma separated; overrides sweep.values")
    ex = sub.add_parser("export-model", help="write the model as MPS or LP text")
    common(ex)
    ex.add_argument("--format", choices=("mps", "lp"), default="mps")
    common(sub.add_parser("disaggregate", help="solve, then recover per-vehicle schedules"))
    common(sub.add_parser("oracle-compare", help="bound table: surplus, exact, per-vehicle"), out=False)
    return p


def _scenario(args):
    sc = scenario_from_config(args.config)
    solve = sc.solve
    if args.mip_gap is not None:
        solve = replace(solve, mip_gap=args.mip_gap)
    if args.time_limit is not None:
        solve = replace(solve, time_limit=args.time_limit)
    sc = replace(sc, solve=solve)
    if args.mode:
        sc = sc.with_mode(args.mode)
    return sc


def _status_code(status: str) -> int:
    return EXIT_OK if status in (OPTIMAL, GAP_FEASIBLE) else EXIT_SOLVE


def cmd_validate(args) -> int:
    rep = validate_scenario(args.config)
    for line in rep.lines():
        print(line)
    print(f"{len(rep.errors)} error(s), {len(rep.warnings)} warning(s)")
    return EXIT_OK if rep.ok else EXIT_INPUT


def cmd_run(args) -> int:
    sc = _scenario(args)
    _, res, rep = solve_scenario(sc)
    rep.write(args.out)
    print(json.dumps({"instance_id": rep.instance_id, "status": rep.status, "objective": rep.objective,
                      "gap": rep.gap, "out": str(args.out)}))
    return _status_code(rep.status)


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    cfg = load_config(args.config)
    raw = cfg.get("sweep", default={}) or {}
    param = args.parameter or raw.get("parameter")
    values = [float(v) for v in args.values.split(",")] if args.values else raw.get("values")
    if not param or not values:
        raise ScenarioError("sweep needs a parameter and values (config 'sweep' section or flags)")
    jobs = args.jobs or int(raw.get("jobs", 1))
    res = run_sweep(sc, SweepSpec(param, list(values), jobs))
    path = write_sweep(res, args.out)
    sys.stdout.write(res.table())
    print(f"wrote {path}")
    failed = [p for p in res.points if not p.ok]
    return EXIT_SOLVE if failed else EXIT_OK


def cmd_export(args) -> int:
    sc = _scenario(args)
    bm = build_model(sc)
    ex = export_model(bm.model, args.format)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"model.{args.format}"
    path.write_bytes(ex.data)
    (args.out / "names.csv").write_text(ex.mangling_table())
    counts = bm.model.count_variables()
    print(json.dumps({"file": str(path), **counts, "constraints": len(bm.model.constraints)}))
    return EXIT_OK


def cmd_disaggregate(args) -> int:
    sc = _scenario(args)
    bm, res, rep = solve_scenario(sc)
    rep.write(args.out)
    if not res.has_solution:
        print(f"no cluster solution: {res.status}")
        return EXIT_SOLVE
    try:
        sched = disaggregate(bm, res.x)
    except RecoveryFailed as exc:
        (args.out / "certificate.json").write_text(json.dumps(exc.certificate, indent=2))
        print(f"recovery failed: {exc}")
        return EXIT_RECOVERY
    with (args.out / "schedule.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vehicle", "vtype", "day", "interval", "soe_kwh", "charge_kw", "blocks"])
        for v in sched.vehicles:
            blocks = ";".join(f"{k}:{d!r}" for k, d in v.blocks)
            for t, p in enumerate(v.charge_kw, start=1):
                w.writerow([v.vehicle, v.vtype, v.day, t, repr(v.soe_kwh[t - 1]), repr(p), blocks if t == 1 else ""])
    print(json.dumps({"vehicles": len(sched.vehicles), "aggregation_residual": aggregation_residual(bm, res.x, sched)}))
    return EXIT_OK


def cmd_oracle(args) -> int:
    sc = _scenario(args)
    r = oracle_compare(sc)
    print("seed,surplus,exact,individual")
    print(f"{r.seed},{r.row()}")
    print(f"# surplus<=individual: {r.lower_bound_holds}; surplus<=exact: {r.mode_order_holds}; "
          f"exact vs individual: {r.exact_vs_individual}")
    return EXIT_OK if r.lower_bound_holds else EXIT_SOLVE


COMMANDS = {
    "validate": cmd_validate,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "export-model": cmd_export,
    "disaggregate": cmd_disaggregate,
    "oracle-compare": cmd_oracle,
}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.verb](args)
    except ValidationFailed as exc:
        for line in exc.report.lines():
            print(line, file=sys.stderr)
        return EXIT_INPUT
    except ScenarioError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FleetClusterError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
