import json
import shutil
from pathlib import Path

import numpy as np
import pytest
import yaml

from fleetcluster import run_scenario
from fleetcluster.cli import EXIT_INPUT, EXIT_OK, EXIT_RECOVERY, main
from fleetcluster.config import (
    build_scenario,
    load_series_csv,
    parse_config,
    scenario_from_config,
    validate_scenario,
    write_series_csv,
)
from fleetcluster.errors import ScenarioError, ValidationFailed
from fleetcluster.milp import audit_residuals
from fleetcluster.report import SolutionReport
from fleetcluster.sweep import SweepSpec, run_sweep, set_path
from fleetcluster.synthetic import random_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def demo(tmp_path):
    """Copy of the demo scenario directory that tests may edit."""
    for f in SCENARIOS.iterdir():
        shutil.copy(f, tmp_path / f.name)
    return tmp_path / "demo.yaml"


def edit(path, **changes):
    data = yaml.safe_load(path.read_text())
    for dotted, value in changes.items():
        cur = data
        keys = dotted.split("__")
        for k in keys[:-1]:
            cur = cur.setdefault(k, {})
        cur[keys[-1]] = value
    path.write_text(yaml.safe_dump(data, sort_keys=False))
    return path


class TestValidation:
    def test_demo_is_clean(self, demo):
        rep = validate_scenario(demo)
        assert rep.ok and not rep.warnings

    def test_capacity_factor_above_one_warns(self, demo):
        rep = validate_scenario(edit(demo, der__solar_cap_factor=1.2))
        assert rep.ok
        assert any("capacity factor" in w.message for w in rep.warnings)

    def test_unknown_vehicle_in_override(self, demo):
        edit(demo, efficiency_overrides=[{"block": "am1", "vehicle": "tram", "kwh_per_km": 1.5}])
        rep = validate_scenario(demo)
        assert not rep.ok
        err = rep.errors[0]
        assert "tram" in err.message and err.source.startswith("demo.yaml:")

    def test_eight_representative_days(self, demo):
        weights = [45.625] * 8
        edit(demo, grid__num_days=8, grid__day_weights=weights, der__solar_cap_factor=0.3, costs__grid_price=0.1,
             temperatures=60.0, der__peak_groups=[{"name": "all", "days": list(range(8)), "rate_per_kw": 1.0}])
        sc = scenario_from_config(demo)
        assert sc.grid.num_days == 8 and sum(sc.grid.day_weights) == pytest.approx(365.0)

    def test_bad_weights_error(self, demo):
        rep = validate_scenario(edit(demo, grid__day_weights=[300]))
        assert not rep.ok and "weights" in rep.errors[0].message

    def test_errors_aggregate_with_provenance(self, demo):
        blocks = demo.parent / "blocks.csv"
        blocks.write_text(blocks.read_text() + "bad1,0,05:00,04:00,10\nbad2,3,06:00,07:00,10\n")
        edit(demo, costs__grid_price=-0.1)
        rep = validate_scenario(demo)
        sources = [i.source for i in rep.errors]
        assert any(s.startswith("blocks.csv:7") for s in sources)
        assert any("day 3" in i.message for i in rep.errors)
        assert any("negative" in w.message for w in rep.warnings)
        with pytest.raises(ValidationFailed):
            scenario_from_config(demo)

    def test_unknown_vehicle_in_charger_rating(self, demo):
        edit(demo, chargers=[{"id": "x", "capital_cost_per_year": 1.0, "ratings": {"ghost": 50}}])
        assert not validate_scenario(demo).ok

    def test_missing_file(self, demo):
        edit(demo, blocks="nowhere.csv")
        rep = validate_scenario(demo)
        assert any("does not exist" in e.message for e in rep.errors)

    def test_series_csv_round_trip(self, tmp_path):
        from fleetcluster.config import ValidationReport

        vals = np.arange(12, dtype=float).reshape(2, 6) / 7
        write_series_csv(tmp_path / "s.csv", vals)
        rep = ValidationReport()
        assert np.array_equal(load_series_csv(tmp_path / "s.csv", (2, 6), rep), vals)
        assert load_series_csv(tmp_path / "s.csv", (2, 7), rep) is None and not rep.ok

    def test_yaml_errors(self):
        with pytest.raises(ScenarioError):
            parse_config("a: [1, 2")
        with pytest.raises(ScenarioError):
            parse_config("- 1\n- 2\n")


class TestRuns:
    def test_run_writes_report(self, demo, tmp_path):
        out = tmp_path / "out"
        rep = run_scenario(demo, out)
        assert rep.status in ("optimal", "gap-feasible")
        for name in ("report.json", "design.csv", "breakdown.csv", "series.csv"):
            assert (out / name).exists(), name

    def test_report_round_trip_reproduces_audit(self, demo, tmp_path):
        rep = run_scenario(demo, tmp_path / "out")
        back = SolutionReport.from_json((tmp_path / "out" / "report.json").read_text())
        assert back.audit == rep.audit
        sc = scenario_from_config(demo)
        from fleetcluster import build_model

        bm = build_model(sc)
        x = np.array([back.values[v.name] for v in bm.model.variables])
        again = {k: v.to_dict() for k, v in audit_residuals(bm.model, x).items()}
        assert again == back.audit

    def test_diesel_only_has_no_capital(self):
        from fleetcluster import solve_scenario

        sc = random_scenario(8, num_blocks=8, vehicle_ids=("diesel",), charger_ids=("diesel_dispenser",))
        _, _, rep = solve_scenario(sc)
        capital = sum(v for k, v in rep.breakdown.items() if "capital" in k)
        assert capital == 0.0
        assert rep.breakdown["diesel_fuel"] > 0.0

    def test_free_grid_needs_no_solar(self):
        from dataclasses import replace

        from fleetcluster import solve_scenario

        sc = random_scenario(9, num_blocks=6)
        sc = replace(sc, costs=replace(sc.costs, grid_price=0.0))
        sc.der.peak_groups = [replace(g, rate_per_kw=0.0) for g in sc.der.peak_groups]
        _, _, rep = solve_scenario(sc)
        assert rep.design["solar_kw"] == pytest.approx(0.0, abs=1e-9)

    def test_sweep_is_deterministic(self):
        sc = random_scenario(2, num_blocks=6, vehicle_ids=("bev_short", "diesel"),
                             charger_ids=("dcfc_l4", "diesel_dispenser"))
        spec = SweepSpec("costs.h2_delivered_price", [8.0, 2.0])
        a = run_sweep(sc, spec)
        b = run_sweep(sc, SweepSpec("costs.h2_delivered_price", [2.0, 8.0], jobs=2))
        assert [p.value for p in a.points] == [2.0, 8.0]
        assert [p.design for p in a.points] == [p.design for p in b.points]

    def test_sweep_records_failures(self):
        sc = random_scenario(2, num_blocks=4, vehicle_ids=("diesel",), charger_ids=("diesel_dispenser",))
        res = run_sweep(sc, SweepSpec("emissions.annual_cap_kg", [0.0, 1e12]))
        assert not res.points[0].ok and res.points[0].status == "infeasible"
        assert res.points[1].ok

    def test_bad_sweep_path(self):
        with pytest.raises(ScenarioError):
            set_path(random_scenario(0), "costs.nonsense", 1.0)
        with pytest.raises(ScenarioError):
            SweepSpec("x", [])


class TestCli:
    def test_validate(self, demo, capsys):
        assert main(["validate", "--config", str(demo)]) == EXIT_OK
        assert "0 error(s)" in capsys.readouterr().out

    def test_validate_bad_input(self, demo, capsys):
        edit(demo, efficiency_overrides=[{"block": "am1", "vehicle": "tram", "kwh_per_km": 1.5}])
        assert main(["validate", "--config", str(demo)]) == EXIT_INPUT
        assert "ERROR" in capsys.readouterr().out

    def test_run_and_export(self, demo, tmp_path, capsys):
        out = tmp_path / "o"
        assert main(["run", "--config", str(demo), "--out", str(out), "--mip-gap", "0.001"]) == EXIT_OK
        line = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert line["status"] in ("optimal", "gap-feasible")
        for fmt in ("mps", "lp"):
            assert main(["export-model", "--config", str(demo), "--out", str(out), "--format", fmt]) == EXIT_OK
            assert (out / f"model.{fmt}").stat().st_size > 0
        assert (out / "names.csv").read_text().startswith("kind,original,exported")

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "none.yaml")]) == EXIT_INPUT

    def test_disaggregate_exit_codes(self, demo, tmp_path, capsys):
        # the demo's cluster optimum pools energy between buses
        out = tmp_path / "d"
        assert main(["disaggregate", "--config", str(demo), "--out", str(out)]) == EXIT_RECOVERY
        cert = json.loads((out / "certificate.json").read_text())
        assert cert["block"] and cert["deficit_kwh"] > 0
        # a single short block has nothing to pool
        blocks = demo.parent / "blocks.csv"
        blocks.write_text("block_id,day_index,start_hhmm,end_hhmm,distance_km\nsolo,0,06:00,09:00,40\n")
        out2 = tmp_path / "d2"
        assert main(["disaggregate", "--config", str(demo), "--out", str(out2)]) == EXIT_OK
        assert (out2 / "schedule.csv").exists()
        resid = json.loads(capsys.readouterr().out.strip().splitlines()[-1])["aggregation_residual"]
        assert max(resid.values()) <= 1e-6

    def test_oracle_compare(self, demo, capsys):
        blocks = demo.parent / "blocks.csv"
        rows = blocks.read_text().splitlines()[:4]
        blocks.write_text("\n".join(rows) + "\n")
        assert main(["oracle-compare", "--config", str(demo)]) == EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "seed,surplus,exact,individual"
        surplus, exact, individual = (float(v) for v in out[1].split(",")[1:4])
        assert surplus <= individual * (1 + 1e-6) and surplus <= exact * (1 + 1e-6)

    def test_sweep_verb(self, demo, tmp_path, capsys):
        out = tmp_path / "s"
        code = main(["sweep", "--config", str(demo), "--out", str(out), "--parameter", "costs.solar_per_kw",
                     "--values", "300,152"])
        assert code == EXIT_OK
        diag = json.loads((out / "sweep_diagnostics.json").read_text())
        assert diag["parameter"] == "costs.solar_per_kw"
        assert diag["cost_nondecreasing"]

    def test_sweep_needs_parameter(self, demo, tmp_path):
        assert main(["sweep", "--config", str(demo), "--out", str(tmp_path)]) == EXIT_INPUT
