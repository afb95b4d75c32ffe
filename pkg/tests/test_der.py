import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import implied
from fleetcluster import TimeGrid
from fleetcluster.der import (
    DerParameters,
    GridUpgrade,
    PeakGroup,
    add_battery_constraints,
    add_der_variables,
    add_grid_and_peak,
    add_power_balance,
)
from fleetcluster.errors import BigMTooSmall, MissingCoupling, ScenarioError
from fleetcluster.milp import LinExpr, ModelInstance, SolveConfig, solve_model, value_of


def station(demand, cf, groups=None, **kw):
    """Standalone depot: fixed charging demand per interval, DER decisions free."""
    demand = np.atleast_2d(np.asarray(demand, float))
    S, T = demand.shape
    grid = TimeGrid.uniform(S, T)
    groups = groups or [PeakGroup("all", tuple(range(S)), 0.0)]
    cf = np.full((S, T), cf) if np.ndim(cf) == 0 else np.atleast_2d(cf)
    p = DerParameters(solar_cap_factor=cf, peak_groups=groups, **kw)
    m = ModelInstance("der")
    h = add_der_variables(m, p, grid)
    add_battery_constraints(m, h, grid)
    add_grid_and_peak(m, h, grid)
    load = {(s, t): LinExpr(const=float(demand[s, t - 1])) for s in grid.days for t in grid.intervals}
    add_power_balance(m, h, grid, load)
    return m, h, grid


def _objective(m, h, grid, grid_price=0.1, pv_cost=0.0, batt_cost=0.0):
    obj = LinExpr()
    for key, v in h.grid.items():
        obj.add_term(v, grid_price * grid.interval_hours)
    obj.add_term(h.pv_cap, pv_cost)
    if not isinstance(h.batt_energy_cap, float):
        obj.add_term(h.batt_energy_cap, batt_cost)
    for g in h.params.peak_groups:
        obj.add_term(h.peak[g.name], g.rate_per_kw)
    if h.grid_upgrade is not None:
        obj.add_term(h.grid_upgrade, h.params.grid_upgrade.cost_per_kw)
    m.set_objective(obj)
    m.freeze()
    res = solve_model(m, SolveConfig(mip_gap=0.0))
    assert res.has_solution, res.status
    return res.x


class TestBattery:
    def setup_method(self):
        self.m, self.h, self.grid = station(np.zeros((1, 96)), 0.0, big_m_kw=500.0)

    def test_charge_step(self):
        e = implied(self.m, "der.batt_dyn[0,1]", {"der.eb[0,1]": 100.0, "der.pbc[0,1]": 10.0}, "der.eb[0,2]")
        assert e == pytest.approx(102.25)

    def test_discharge_step(self):
        e = implied(self.m, "der.batt_dyn[0,1]", {"der.eb[0,1]": 100.0, "der.pbd[0,1]": 9.0}, "der.eb[0,2]")
        assert e == pytest.approx(97.5)

    def test_charging_indicator_blocks_discharge(self):
        assert implied(self.m, "der.batt_dis[0,5]", {"der.gamma[0,5]": 1.0}, "der.pbd[0,5]") == pytest.approx(0.0)
        assert implied(self.m, "der.batt_chg[0,5]", {"der.gamma[0,5]": 0.0}, "der.pbc[0,5]") == pytest.approx(0.0)

    def test_big_m_below_power_bound(self):
        with pytest.raises(BigMTooSmall):
            DerParameters(np.zeros((1, 4)), big_m_kw=100.0, battery_power_max_kw=200.0).big_m()

    def test_big_m_defaults_to_power_bound(self):
        assert DerParameters(np.zeros((1, 4)), battery_power_max_kw=750.0).big_m() == 750.0

    def test_bad_fractions(self):
        with pytest.raises(ScenarioError):
            DerParameters(np.zeros((1, 4)), soc_lower_frac=0.9, soc_upper_frac=0.2)

    def test_disabled_battery_has_no_columns(self):
        m, _, _ = station(np.zeros((1, 4)), 0.0, battery_enabled=False)
        assert not any(v.name.startswith("der.eb") for v in m.variables)


class TestBalance:
    def test_requires_coupling(self):
        grid = TimeGrid.uniform(1, 4)
        m = ModelInstance("x")
        h = add_der_variables(m, DerParameters(np.zeros((1, 4)), peak_groups=[PeakGroup("a", (0,), 0)]), grid)
        with pytest.raises(MissingCoupling):
            add_power_balance(m, h, grid, None)

    def test_night_draws_from_grid(self):
        m, h, grid = station([[100.0, 100.0, 100.0, 100.0]], 0.0, battery_enabled=False)
        x = _objective(m, h, grid)
        assert value_of(h.grid[(0, 1)], x) == pytest.approx(100.0)

    def test_surplus_solar_is_curtailed(self):
        m, h, grid = station([[0.0] * 4], 1.0, battery_enabled=False, solar_cap_max_kw=1500.0)
        # the implied curtailment with no grid draw
        assert implied(m, "der.balance[0,1]", {"der.pv_cap": 1500.0}, "der.pcurt[0,1]") == pytest.approx(1500.0)
        m.set_bounds(h.pv_cap, lb=1500.0)
        x = _objective(m, h, grid)
        assert value_of(h.curtail[(0, 1)], x) == pytest.approx(1500.0)
        assert value_of(h.grid[(0, 1)], x) == pytest.approx(0.0)

    def test_shape_mismatch(self):
        with pytest.raises(ScenarioError):
            station(np.zeros((1, 4)), np.zeros((1, 3)))


class TestPeak:
    def test_peak_equals_max_draw(self):
        demand = np.array([[100.0, 800.0, 300.0, 0.0], [50.0, 60.0, 70.0, 80.0]])
        groups = [PeakGroup("summer", (0,), 24.09), PeakGroup("winter", (1,), 17.92)]
        m, h, grid = station(demand, 0.0, groups, battery_enabled=False)
        x = _objective(m, h, grid)
        assert value_of(h.peak["summer"], x) == pytest.approx(800.0)
        assert value_of(h.peak["winter"], x) == pytest.approx(80.0)
        peak_cost = 24.09 * 800.0 + 17.92 * 80.0
        energy = 0.1 * 6.0 * demand.sum()
        assert m.objective.value(x) == pytest.approx(peak_cost + energy)

    def test_groups_must_partition_days(self):
        with pytest.raises(ScenarioError):
            station(np.zeros((2, 4)), 0.0, [PeakGroup("a", (0,), 1.0)])

    def test_grid_cap_box(self):
        m, h, grid = station(np.zeros((1, 4)), 0.0, battery_enabled=False, grid_cap_kw=1000.0)
        assert all(m.variables[v.index].ub == 1000.0 for v in h.grid.values())

    def test_grid_cap_binds(self):
        m, h, grid = station([[1200.0, 0, 0, 0]], 0.0, battery_enabled=False, grid_cap_kw=1000.0)
        m.set_objective(LinExpr())
        m.freeze()
        assert not solve_model(m).has_solution

    def test_grid_upgrade_buys_the_excess(self):
        up = GridUpgrade(base_kw=1000.0, cost_per_kw=500.0)
        m, h, grid = station([[1200.0, 0, 0, 0]], 0.0, battery_enabled=False, grid_upgrade=up)
        x = _objective(m, h, grid)
        assert value_of(h.grid_upgrade, x) == pytest.approx(200.0)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(0, 400), min_size=8, max_size=8), st.lists(st.floats(0, 1), min_size=8, max_size=8))
def test_battery_complementarity_and_balance(demand, cf):
    # expensive evening grid tempts the battery into daily cycling
    m, h, grid = station([demand], np.array(cf), big_m_kw=2000.0, battery_power_max_kw=2000.0)
    obj = LinExpr()
    for (s, t), v in h.grid.items():
        obj.add_term(v, (0.05 if t <= 4 else 0.5) * grid.interval_hours)
    obj.add_term(h.pv_cap, 0.2).add_term(h.batt_energy_cap, 0.05)
    m.set_objective(obj)
    m.freeze()
    res = solve_model(m, SolveConfig(mip_gap=0.0))
    assert res.has_solution
    M = h.big_m
    for key in h.batt_charge:
        c, d = value_of(h.batt_charge[key], res.x), value_of(h.batt_discharge[key], res.x)
        assert min(c, d) <= M * 1e-6 + 1e-7
    for s, t in h.grid:
        supply = h.solar(s, t).value(res.x) + value_of(h.grid[(s, t)], res.x)
        use = demand[t - 1] + value_of(h.curtail[(s, t)], res.x)
        use += value_of(h.batt_charge[(s, t)], res.x) - value_of(h.batt_discharge[(s, t)], res.x)
        assert supply == pytest.approx(use, rel=1e-6, abs=1e-6)
