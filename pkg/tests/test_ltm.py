import numpy as np
import pytest

from pedflow.ltm import (
    ConservationError,
    CumulativeCurve,
    advance,
    crossing_time,
    interp_at,
    receiving_flow,
    sending_flow,
    split_by_entry_order,
)
from pedflow.network import Link


def make_link(**kw):
    base = dict(id=1, from_node=1, to_node=2, length=2.0, width=1.0,
                v_f=1.5, k_jam=10.0, omega=0.5, capacity=100.0)
    base.update(kw)
    return Link(**base)


class TestInterpolation:
    def test_on_grid_and_between(self):
        arr = np.array([[0.0, 4.0, 8.0, 12.0]])
        assert interp_at(arr, np.array([2.0]), 1.0)[0] == 8.0
        assert interp_at(arr, np.array([2.0 / 3.0]), 1.0)[0] == pytest.approx(8.0 / 3.0)

    def test_before_start_reads_zero(self):
        arr = np.array([[0.0, 4.0, 8.0]])
        assert interp_at(arr, np.array([-0.5]), 1.0)[0] == 0.0

    def test_row_gather(self):
        arr = np.array([[0.0, 1.0, 2.0], [0.0, 10.0, 20.0]])
        got = interp_at(arr, np.array([1.5, 0.5]), 1.0, rows=np.array([1, 0]))
        assert got == pytest.approx([15.0, 0.5])


class TestSendingFlow:
    def test_empty_link(self):
        link = make_link()
        curves = CumulativeCurve(10, 1.0)
        assert sending_flow(link, curves, 0, vhat=1.5) == 0.0

    def test_steady_inflow_hand_trace(self):
        # 2 m link at 1.5 m/s: the lookback is 4/3 s; with 4 ped/s entering
        # from t=0, the sending flow builds 0, 8/3, then holds at 4
        link = make_link()
        curves = CumulativeCurve(10, 1.0)
        curves.U[:] = 4.0 * np.arange(11)
        expected = {0: 0.0, 1: 8.0 / 3.0, 2: 4.0, 3: 4.0}
        for t in range(4):
            s = sending_flow(link, curves, t, vhat=1.5)
            assert s == pytest.approx(expected[t], abs=1e-12)
            curves.V[t + 1] = curves.V[t] + s

    def test_capacity_clamp(self):
        link = make_link(capacity=4.0)
        curves = CumulativeCurve(10, 1.0)
        curves.U[:] = 6.0 * np.arange(11)
        curves.V[1] = 0.0
        s1 = sending_flow(link, curves, 1, vhat=1.5)
        assert s1 == pytest.approx(4.0)
        curves.V[2] = curves.V[1] + s1
        assert sending_flow(link, curves, 2, vhat=1.5) == pytest.approx(4.0)


class TestReceivingFlow:
    def test_empty_link_offers_full_storage(self):
        link = make_link()  # storage 10 * 2 * 1 = 20
        curves = CumulativeCurve(10, 1.0)
        assert receiving_flow(link, curves, 0) == pytest.approx(20.0)
        tight = make_link(capacity=4.0)
        assert receiving_flow(tight, curves, 0) == pytest.approx(4.0)

    def test_jammed_link_offers_nothing(self):
        link = make_link()
        curves = CumulativeCurve(10, 1.0)
        curves.U[:] = 20.0  # storage-filling occupancy, exits frozen
        assert receiving_flow(link, curves, 4) == pytest.approx(0.0)

    def test_recovery_lags_drain_by_wave_traversal(self):
        # wave lookback is L/omega = 4 s: a drain starting at t=0 only frees
        # upstream space from t=4 on
        link = make_link()
        curves = CumulativeCurve(10, 1.0)
        curves.U[:] = 20.0
        curves.V[:] = 2.0 * np.arange(11)  # draining at 2 ped/s
        assert receiving_flow(link, curves, 3) == pytest.approx(0.0)
        assert receiving_flow(link, curves, 4) == pytest.approx(2.0)
        assert receiving_flow(link, curves, 5) == pytest.approx(4.0)

    def test_effective_jam_override(self):
        link = make_link()
        curves = CumulativeCurve(10, 1.0)
        assert receiving_flow(link, curves, 0, effective_jam=5.0) == pytest.approx(10.0)


class TestAdvance:
    def test_idle_step_keeps_curves(self):
        link = make_link()
        curves = CumulativeCurve(10, 1.0)
        advance(link, curves, 0.0, 0.0, 0)
        assert curves.U[1] == 0.0 and curves.V[1] == 0.0

    def test_accumulation(self):
        link = make_link()
        curves = CumulativeCurve(10, 1.0)
        advance(link, curves, 3.0, 0.0, 0)
        assert curves.U[1] - curves.V[1] == pytest.approx(3.0)

    def test_commodity_split_follows_entry_order(self):
        link = make_link()
        curves = CumulativeCurve(10, 1.0, destinations=(4, 9))
        advance(link, curves, np.array([2.0, 1.0]), np.array([0.0, 0.0]), 0)
        advance(link, curves, np.array([0.0, 0.0]), np.array([2.0, 1.0]), 1)
        assert curves.Vd[:, 2] == pytest.approx([2.0, 1.0])
        assert curves.U[2] - curves.V[2] == pytest.approx(0.0)

    def test_draining_more_than_present_is_an_error(self):
        link = make_link()
        curves = CumulativeCurve(10, 1.0)
        advance(link, curves, 1.0, 0.0, 0)
        with pytest.raises(ConservationError):
            advance(link, curves, 0.0, 2.0, 1)

    def test_commodity_exit_cannot_overtake_entries(self):
        link = make_link()
        curves = CumulativeCurve(10, 1.0, destinations=(4, 9))
        advance(link, curves, np.array([2.0, 0.0]), np.array([0.0, 0.0]), 0)
        with pytest.raises(ConservationError):
            advance(link, curves, np.array([0.0, 0.0]), np.array([0.0, 1.0]), 1)

    def test_overfilling_is_an_error(self):
        link = make_link(capacity=1000.0)
        curves = CumulativeCurve(10, 1.0)
        with pytest.raises(ConservationError):
            advance(link, curves, 25.0, 0.0, 0)  # storage is 20


class TestEntryOrderSplit:
    def test_known_composition(self):
        # bin 0 loads one person to the first destination, bin 1 one to the second
        U = np.array([0.0, 1.0, 2.0, 2.0])
        Ud = np.array([[0.0, 1.0, 1.0, 1.0], [0.0, 0.0, 1.0, 1.0]])
        split = split_by_entry_order(U, Ud, 0.5, 1.5, 3)
        assert split == pytest.approx([0.5, 0.5])
        split = split_by_entry_order(U, Ud, 0.0, 1.0, 3)
        assert split == pytest.approx([1.0, 0.0])

    def test_split_sums_to_requested_amount(self):
        rng = np.random.default_rng(2)
        U = np.concatenate([[0.0], np.cumsum(rng.uniform(0, 2, 12))])
        shares = rng.uniform(0, 1, 12)
        inc = np.diff(U, prepend=0.0)[1:]
        Ud = np.zeros((2, 13))
        Ud[0, 1:] = np.cumsum(inc * shares)
        Ud[1, 1:] = np.cumsum(inc * (1 - shares))
        r0, r1 = 1.7, 9.3
        split = split_by_entry_order(U, Ud, r0, r1, 12)
        assert split.sum() == pytest.approx(r1 - r0, abs=1e-12)
        assert (split >= 0).all()


class TestCrossingTime:
    def test_interpolated_crossing(self):
        arr = np.array([0.0, 0.0, 4.0, 8.0])
        assert crossing_time(arr, 2.0, 1.0, 3) == pytest.approx(1.5)

    def test_unreached_rank_is_none(self):
        arr = np.array([0.0, 1.0, 2.0])
        assert crossing_time(arr, 5.0, 1.0, 2) is None

    def test_rank_zero(self):
        arr = np.array([0.0, 1.0])
        assert crossing_time(arr, 0.0, 1.0, 1) == 0.0
