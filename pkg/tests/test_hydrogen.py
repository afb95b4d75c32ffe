import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import implied
from fleetcluster import TimeGrid
from fleetcluster.errors import EmptyDeliveryWindow, ScenarioError
from fleetcluster.hydrogen import (
    H2Parameters,
    add_h2_dynamics,
    add_h2_limits,
    add_h2_variables,
    add_initial_inventory_cost,
)
from fleetcluster.milp import LinExpr, ModelInstance, SolveConfig, solve_model, value_of


def station(params=None, days=1, T=96, has_fcev=False):
    grid = TimeGrid.uniform(days, T)
    p = params or H2Parameters()
    m = ModelInstance("h2")
    h = add_h2_variables(m, p, grid)
    add_h2_dynamics(m, h, grid)
    add_h2_limits(m, h, grid, has_fcev)
    return m, h, grid


class TestDynamics:
    def setup_method(self):
        self.m, self.h, _ = station()

    def test_lockstep_compression_load(self):
        # 41.97 kW of electrolysis is 1 kg/h; the low-pressure stage follows at 0.15 kW
        p = implied(self.m, "h2.elz_lockstep[0,1]", {"h2.pelz[0,1]": 41.97}, "h2.plcpr[0,1]")
        assert p == pytest.approx(0.15)

    def test_tank_draw_step(self):
        w = implied(self.m, "h2.tank_dyn[0,1]", {"h2.wh[0,1]": 50.0, "h2.pcpr[0,1]": 4.0 * 3.0}, "h2.wh[0,2]")
        assert w == pytest.approx(49.0)

    def test_delivery_spike(self):
        w = implied(self.m, "h2.tank_dyn[0,40]", {"h2.wh[0,40]": 20.0, "h2.wdel[0,40]": 100.0}, "h2.wh[0,41]")
        assert w == pytest.approx(120.0)

    def test_buffer_step(self):
        vals = {"h2.wbf[0,1]": 10.0, "h2.pcpr[0,1]": 12.0, "h2.pcl[0,1]": 0.4}
        w = implied(self.m, "h2.buffer_dyn[0,1]", vals, "h2.wbf[0,2]")
        assert w == pytest.approx(10.0 + 1.0 - 0.5)


class TestLimits:
    def setup_method(self):
        self.m, self.h, _ = station()

    def test_tank_floor(self):
        w = implied(self.m, "h2.tank_lo[0,7]", {"h2.tank_cap": 114.94}, "h2.wh[0,7]")
        assert w == pytest.approx(6.55, abs=5e-3)

    def test_buffer_range(self):
        lo = implied(self.m, "h2.buffer_lo[0,7]", {"h2.buffer_cap": 60.57}, "h2.wbf[0,7]")
        hi = implied(self.m, "h2.buffer_hi[0,7]", {"h2.buffer_cap": 60.57}, "h2.wbf[0,7]")
        assert lo == pytest.approx(1.76, abs=5e-3)
        assert hi == pytest.approx(60.57)

    def test_delivery_window(self):
        ub = {v.name: v.ub for v in self.m.variables if v.name.startswith("h2.wdel")}
        # default window 8:00-18:00; the day starts at 3:00, so 8:00 opens interval 21
        assert ub["h2.wdel[0,20]"] == 0.0
        assert ub["h2.wdel[0,21]"] > 0.0
        assert ub["h2.wdel[0,60]"] > 0.0
        assert ub["h2.wdel[0,61]"] == 0.0

    def test_explicit_delivery_intervals(self):
        m, _, _ = station(H2Parameters(delivery_intervals=(3,)), T=4)
        ub = [v.ub for v in m.variables if v.name.startswith("h2.wdel")]
        assert ub[:2] == [0.0, 0.0] and ub[2] > 0 and ub[3] == 0.0

    def test_delivery_interval_out_of_range(self):
        with pytest.raises(ScenarioError):
            station(H2Parameters(delivery_intervals=(5,)), T=4)

    def test_empty_window_without_electrolysis_warns(self):
        p = H2Parameters(delivery_intervals=(), electrolysis_enabled=False)
        with pytest.warns(EmptyDeliveryWindow):
            station(p, T=4, has_fcev=True)

    def test_bad_parameters(self):
        with pytest.raises(ScenarioError):
            H2Parameters(cl_kwh_per_kg=0.0)
        with pytest.raises(ScenarioError):
            H2Parameters(tank_lower_frac=1.0)


class TestInitialInventory:
    def _term(self, days, tank, buf, price):
        m, h, grid = station(days=days, T=4)
        obj = LinExpr()
        term = add_initial_inventory_cost(obj, h, grid, np.full((days, 4), price))
        x = np.zeros(m.num_vars)
        for s in range(days):
            x[h.tank[(s, 1)].index] = tank
            x[h.buffer[(s, 1)].index] = buf
        return term.value(x), obj.value(x)

    def test_single_day(self):
        assert self._term(1, 10.0, 0.0, 8.0) == (80.0, 80.0)

    def test_empty_storage(self):
        assert self._term(1, 0.0, 0.0, 8.0) == (0.0, 0.0)

    def test_eight_days(self):
        assert self._term(8, 5.0, 0.0, 1.0)[0] == pytest.approx(40.0)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(0, 30), min_size=8, max_size=8), st.floats(2, 12), st.booleans())
def test_daily_mass_balance(dispensed, price, elz):
    """Over a day, deliveries plus electrolysis output equal what is dispensed."""
    T = 8
    p = H2Parameters(delivery_intervals=(3, 4, 5), electrolysis_enabled=elz)
    m, h, grid = station(p, days=2, T=T)
    dT = grid.interval_hours
    for s in grid.days:
        for t in grid.intervals:
            v = h.cl[(s, t)]
            m.set_bounds(v, lb=dispensed[t - 1] * p.cl_kwh_per_kg, ub=dispensed[t - 1] * p.cl_kwh_per_kg)
    obj = LinExpr()
    for s in grid.days:
        for t in grid.intervals:
            obj.add_term(h.delivered[(s, t)], price).add_term(h.elz[(s, t)], 0.1 * dT)
    for cap in (h.tank_cap, h.buffer_cap, h.elz_cap, h.cpr_cap, h.cl_cap):
        obj.add_term(cap, 0.01)
    add_initial_inventory_cost(obj, h, grid, np.full((2, T), price))
    m.set_objective(obj)
    m.freeze()
    res = solve_model(m, SolveConfig(mip_gap=0.0))
    assert res.has_solution
    x = res.x
    for s in grid.days:
        inflow = sum(value_of(h.delivered[(s, t)], x) for t in grid.intervals)
        inflow += sum(value_of(h.lcpr[(s, t)], x) / p.lcpr_kwh_per_kg * dT for t in grid.intervals)
        out = sum(value_of(h.cl[(s, t)], x) / p.cl_kwh_per_kg * dT for t in grid.intervals)
        assert inflow == pytest.approx(out, rel=1e-6, abs=1e-6)
