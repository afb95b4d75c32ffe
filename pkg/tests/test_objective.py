from dataclasses import replace

import numpy as np
import pytest

from conftest import implied
from fleetcluster import (
    ChargerType,
    DerParameters,
    EmissionBook,
    H2Parameters,
    PeakGroup,
    TripBlock,
    VehicleType,
    build_model,
    solve_scenario,
)
from fleetcluster.errors import ScenarioError, UnregisteredVariable
from fleetcluster.fleet import DIESEL, HYDROGEN
from fleetcluster.milp import INFEASIBLE, ModelInstance, SolveConfig, value_of
from fleetcluster.objective import CostBook, assemble_objective, diesel_price_per_kwh
from fleetcluster.synthetic import random_scenario
from instances import tiny_scenario

EV = VehicleType("ev", 225.0, 800_000.0, 0.64, 2.0)
L4 = ChargerType("l4", 0.0, {"ev": 150.0})
FC = VehicleType("fc", 700.0, 0.0, 0.64, 1.2, HYDROGEN)
DISP = ChargerType("disp", 0.0, {"fc": 7000.0}, HYDROGEN)


def test_vehicle_capital_term():
    sc = tiny_scenario([TripBlock("k", 0, 6.0, 12.0, 10.0)], [EV], [L4])
    _, res, rep = solve_scenario(sc)
    assert rep.breakdown["vehicle_capital"] == pytest.approx(800_000.0)


def test_maintenance_term():
    sc = tiny_scenario([TripBlock("k", 0, 6.0, 12.0, 100.0)], [EV], [L4])
    _, _, rep = solve_scenario(sc)
    assert rep.breakdown["maintenance"] == pytest.approx(64.0)


def test_electrolyzer_capital_per_kg_per_hour():
    sc = tiny_scenario([], [FC], [DISP], h2=H2Parameters(), costs=CostBook(elz_per_kgph=80.0))
    bm = build_model(sc)
    x = np.zeros(bm.model.num_vars)
    x[bm.h2.elz_cap.index] = 41.97
    assert bm.terms["h2_elz_capital"].value(x) == pytest.approx(80.0)


def test_fcev_refuelling_sets_cooling_load():
    sc = tiny_scenario([TripBlock("k", 0, 6.0, 12.0, 50.0)], [FC], [DISP], h2=H2Parameters())
    bm = build_model(sc)
    cl = implied(bm.model, "coupling.h2[0,1]", {"fleet.pv[fc,0,1]": 7000.0}, "h2.pcl[0,1]")
    assert cl == pytest.approx(7000.0 * 0.2 / 33.3)
    assert cl == pytest.approx(42.04, abs=5e-3)


def test_no_fcev_means_no_hydrogen_demand():
    sc = tiny_scenario([TripBlock("k", 0, 6.0, 12.0, 50.0)], [EV], [L4], h2=H2Parameters())
    bm = build_model(sc)
    assert all(len(e.terms) == 0 for e in bm.coupling.h2_demand.values())
    assert all(len(e.terms) > 0 for e in bm.coupling.bev_demand.values())


def test_fcev_without_station_rejected():
    sc = tiny_scenario([TripBlock("k", 0, 6.0, 12.0, 50.0)], [FC], [DISP])
    with pytest.raises(ScenarioError):
        build_model(sc)


def test_objective_requires_registered_fleet():
    from fleetcluster.fleet import new_handles

    sc = tiny_scenario([TripBlock("k", 0, 6.0, 12.0, 50.0)], [EV], [L4])
    bm = build_model(sc)
    bare = new_handles(sc.grid, sc.blocks, [EV], [L4], {("k", "ev"): 2.0})
    with pytest.raises(UnregisteredVariable):
        assemble_objective(ModelInstance("x"), sc.costs, sc.grid, bare, bm.der, bm.coupling)


def test_diesel_price_conversion():
    assert diesel_price_per_kwh(4.07) == pytest.approx(0.1)


def test_negative_cost_rejected():
    sc = tiny_scenario([], [EV], [L4], costs=CostBook(solar_per_kw=-1.0))
    with pytest.raises(ScenarioError):
        build_model(sc)


class TestCarbon:
    def _solar_depot(self, cap):
        T = 4
        der = DerParameters(np.ones((1, T)), solar_cap_max_kw=1e4, battery_enabled=False,
                            peak_groups=[PeakGroup("all", (0,), 0.0)])
        return tiny_scenario([TripBlock("k", 0, 6.0, 12.0, 50.0)], [EV], [L4], intervals_per_day=T, der=der,
                             costs=CostBook(grid_price=0.1, solar_per_kw=152.0),
                             emissions=EmissionBook(grid_factor=0.4, annual_cap_kg=cap))

    def test_zero_cap_forces_zero_grid(self):
        bm, res, rep = solve_scenario(self._solar_depot(0.0))
        assert res.has_solution
        assert all(value_of(v, res.x) <= 1e-7 for v in bm.der.grid.values())
        assert rep.emissions_kg == pytest.approx(0.0, abs=1e-6)

    def test_zero_cap_rules_out_diesel(self):
        d = VehicleType("df", 5013.0, 0.0, 0.88, 10.0, DIESEL)
        disp = ChargerType("dd", 0.0, {"df": 72_000.0}, DIESEL)
        sc = tiny_scenario([TripBlock("k", 0, 6.0, 12.0, 50.0)], [d], [disp],
                           emissions=EmissionBook(annual_cap_kg=0.0))
        _, res, _ = solve_scenario(sc)
        assert res.status == INFEASIBLE

    def test_cap_removal_never_costs_more(self):
        sc = random_scenario(3, num_blocks=6, vehicle_ids=("bev_short", "diesel"),
                             charger_ids=("dcfc_l4", "diesel_dispenser"))
        sc = replace(sc, solve=SolveConfig(mip_gap=0.0))
        _, _, free = solve_scenario(sc)
        capped_sc = replace(sc, emissions=replace(sc.emissions, annual_cap_kg=0.5 * free.emissions_kg))
        _, _, capped = solve_scenario(capped_sc)
        assert capped.objective >= free.bound - 1e-6 * abs(free.bound)
        assert capped.emissions_kg <= 0.5 * free.emissions_kg * (1 + 1e-6)

    def test_emissions_match_series(self):
        sc = random_scenario(4, num_blocks=5)
        bm, res, rep = solve_scenario(sc)
        w, dT = sc.grid.day_weights, sc.grid.interval_hours
        manual = sum(w[s] * dT * value_of(v, res.x) * sc.emissions.grid_factor[s, t - 1]
                     for (s, t), v in bm.der.grid.items())
        assert rep.emissions_kg == pytest.approx(manual, rel=1e-9)


def test_breakdown_sums_to_objective():
    sc = random_scenario(5, num_blocks=6, vehicle_ids=("bev_short", "fcev"), charger_ids=("dcfc_l4", "h2_dispenser"))
    _, res, rep = solve_scenario(sc)
    assert sum(rep.breakdown.values()) == pytest.approx(res.objective, rel=1e-6)


def test_diesel_only_closed_form():
    """A diesel-only fleet has no design freedom: cost is maintenance plus fuel."""
    sc = random_scenario(11, num_blocks=8, num_days=2, vehicle_ids=("diesel",),
                         charger_ids=("diesel_dispenser",), with_battery=False)
    bm, res, rep = solve_scenario(sc)
    w = sc.grid.day_weights
    price = sc.costs.diesel_price
    v = bm.fleet.vtypes[0]
    maint = sum(b.distance_km * v.maintenance_cost_per_km for b in sc.blocks)
    energy = sum(w[b.day] * b.distance_km * bm.fleet.eta[(b.id, v.id)] for b in sc.blocks)
    assert rep.breakdown["maintenance"] == pytest.approx(maint, rel=1e-9)
    assert rep.breakdown["diesel_fuel"] == pytest.approx(energy * price, rel=1e-6)
    assert rep.objective == pytest.approx(maint + energy * price, rel=1e-6)
    assert rep.emissions_kg == pytest.approx(0.25 * energy, rel=1e-6)
    assert rep.breakdown["vehicle_capital"] == 0.0


@pytest.mark.parametrize("seed", [1, 2])
def test_delivered_price_response(seed):
    """More expensive delivered hydrogen never raises the delivered mass."""
    base = random_scenario(seed, num_blocks=5, vehicle_ids=("fcev",), charger_ids=("h2_dispenser",))
    base = replace(base, solve=SolveConfig(mip_gap=0.0))
    mass = []
    for price in (1.0, 4.0, 16.0):
        sc = replace(base, costs=replace(base.costs, h2_delivered_price=price))
        bm, res, _ = solve_scenario(sc)
        mass.append(sum(value_of(v, res.x) for v in bm.h2.delivered.values()))
    assert mass[0] >= mass[1] - 1e-6 and mass[1] >= mass[2] - 1e-6
