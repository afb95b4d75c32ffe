import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fleetcluster.errors import BlockOutOfDay, ScenarioError
from fleetcluster.time_grid import (
    TimeGrid,
    TripBlock,
    block_from_clock,
    build_trip_matrices,
    discretize_block,
    load_blocks_csv,
    parse_clock,
    write_blocks_csv,
)

Q = TimeGrid.uniform(1, 96)  # quarter-hour grid


def blk(x0, x1, day=0, bid="k"):
    return TripBlock(bid, day, x0, x1, 10.0)


class TestTimeGrid:
    def test_uniform_weights_sum_to_year(self):
        g = TimeGrid.uniform(8, 24)
        assert sum(g.day_weights) == pytest.approx(365.0)
        assert g.interval_hours == 1.0

    def test_eight_representative_days_with_custom_weights(self):
        w = (65, 65, 26, 26, 65, 65, 26, 27)
        g = TimeGrid(8, 96, 0.25, day_weights=w)
        assert g.day_weights == tuple(float(x) for x in w)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(num_days=1, intervals_per_day=24, interval_hours=0.5),  # 12 h only
            dict(num_days=1, intervals_per_day=24, interval_hours=0.0),
            dict(num_days=2, intervals_per_day=24, interval_hours=1.0, day_weights=(100, 100)),
        ],
    )
    def test_rejects_bad_grids(self, kw):
        with pytest.raises(ScenarioError):
            TimeGrid(**kw)

    def test_clock_window_maps_through_reference(self):
        g = TimeGrid.uniform(1, 24, reference_time=3.0)
        # 08:00-18:00 is offsets 5..15 h -> intervals 6..15
        assert g.intervals_for_clock_window(8.0, 18.0) == list(range(6, 16))


class TestDiscretize:
    def test_inner_quarter_hours(self):
        assert discretize_block(blk(10 / 60, 40 / 60), Q) == (1, 3)

    def test_boundary_aligned(self):
        assert discretize_block(blk(0.25, 0.5), Q) == (2, 2)

    def test_full_day(self):
        assert discretize_block(blk(0.0, 24.0), Q) == (1, 96)

    def test_representation_noise_does_not_shift_boundaries(self):
        g = TimeGrid.uniform(1, 240)  # dT = 0.1 h
        assert discretize_block(blk(0.7, 0.3 * 3), g) == (8, 9)

    def test_wrong_day_rejected(self):
        with pytest.raises(BlockOutOfDay):
            discretize_block(blk(1.0, 2.0, day=3), Q)

    def test_block_past_midnight_of_model_day_rejected(self):
        with pytest.raises(BlockOutOfDay):
            TripBlock("k", 0, 20.0, 25.0, 1.0)

    @given(
        st.integers(1, 4).flatmap(lambda f: st.tuples(st.just(f), st.floats(0, 23.5), st.floats(0.01, 0.5)))
    )
    @settings(max_examples=200, deadline=None)
    def test_conservative_and_refinement_never_lengthens(self, args):
        factor, x0, dur = args
        x1 = min(24.0, x0 + dur)
        coarse = TimeGrid.uniform(1, 24)
        fine = TimeGrid.uniform(1, 24 * factor)
        b = blk(x0, x1)
        for g in (coarse, fine):
            t0, t1 = discretize_block(b, g)
            assert (t0 - 1) * g.interval_hours <= x0 + 1e-9
            assert t1 * g.interval_hours >= x1 - 1e-9
        c0, c1 = discretize_block(b, coarse)
        f0, f1 = discretize_block(b, fine)
        assert (f1 - f0 + 1) * fine.interval_hours <= (c1 - c0 + 1) * coarse.interval_hours + 1e-9


class TestMatrices:
    g4 = TimeGrid.uniform(1, 4)

    def test_first_interval_block(self):
        tm = build_trip_matrices([blk(0.0, 18.0)], self.g4)
        assert tm.active()[0].tolist() == [1, 1, 1, 0]
        U, V = tm.depart()[0], tm.arrive()[0]
        assert U[0] == 1 and U[4] == 1  # U(1), tied U(T+1)
        assert V[3] == 1  # V(4)

    def test_end_of_day_block_wraps_arrival(self):
        tm = build_trip_matrices([blk(6.0, 24.0)], self.g4)
        V = tm.arrive()[0]
        assert V[4] == 1 and V[0] == 1
        assert tm.arrive_index(0) == 5

    def test_overlapping_blocks_independent_rows(self):
        tm = build_trip_matrices([blk(0.0, 18.0, bid="a"), blk(6.0, 18.0, bid="b")], self.g4)
        assert tm.active().sum(axis=1).tolist() == [3, 2]
        assert tm.active_count(0).tolist() == [1, 2, 2, 0]

    @given(st.lists(st.tuples(st.floats(0, 23.0), st.floats(0.05, 6.0)), min_size=1, max_size=12))
    @settings(max_examples=100, deadline=None)
    def test_row_invariants(self, spans):
        g = TimeGrid.uniform(1, 48)
        blocks = [blk(x0, min(24.0, x0 + d), bid=f"k{n}") for n, (x0, d) in enumerate(spans)]
        tm = build_trip_matrices(blocks, g)
        A, U, V = tm.active(), tm.depart(), tm.arrive()
        T = g.intervals_per_day
        assert (A.sum(axis=1) == tm.t1 - tm.t0 + 1).all()
        # the indices that enter the dynamics (2..T+1) carry exactly one event
        assert (U[:, 1:].sum(axis=1) == 1).all()
        assert (V[:, 1:].sum(axis=1) == 1).all()
        assert (U[:, T] == U[:, 0]).all() and (V[:, T] == V[:, 0]).all()
        for k in range(len(blocks)):
            for t in range(1, T + 1):
                assert bool(A[k, t - 1]) == (tm.t0[k] <= t <= tm.t1[k])


class TestIngestion:
    def test_parse_clock_forms(self):
        assert parse_clock("05:30") == 5.5
        assert parse_clock("0530") == 5.5
        assert parse_clock("25:10") == pytest.approx(25 + 10 / 60)
        with pytest.raises(ScenarioError):
            parse_clock("5:75")

    def test_clock_shift_by_reference(self):
        g = TimeGrid.uniform(1, 24, reference_time=3.0)
        b = block_from_clock("k", 0, 5.0, 9.0, 30.0, g)
        assert (b.start_time, b.end_time) == (2.0, 6.0)

    def test_block_spanning_reference_rejected(self):
        g = TimeGrid.uniform(1, 24, reference_time=3.0)
        with pytest.raises(BlockOutOfDay):
            block_from_clock("k", 0, 1.0, 4.0, 30.0, g)  # 01:00-04:00 crosses 03:00

    def test_csv_round_trip(self, tmp_path):
        g = TimeGrid.uniform(2, 24, reference_time=3.0)
        blocks = [block_from_clock("a", 0, 6.0, 9.5, 40.0, g), block_from_clock("b", 1, 23.0, 26.0, 55.0, g)]
        path = tmp_path / "blocks.csv"
        write_blocks_csv(path, blocks, g)
        back = load_blocks_csv(path, g)
        assert [(b.id, b.day, b.distance_km) for b in back] == [("a", 0, 40.0), ("b", 1, 55.0)]
        assert np.allclose([b.start_time for b in back], [b.start_time for b in blocks])
