import numpy as np
import pytest

from helpers import dam_break_error, rectangular
from vcmflood.fbm import FBMState, FluxBasedModel
from vcmflood.geometry import build_channel_geometry
from vcmflood.grid import Block
from vcmflood.swe1d import (
    ChannelState1D,
    NegativeAreaError,
    apply_coupling_flux,
    stable_dt_1d,
    step_1d,
)
from vcmflood.swe2d import ConservedState2D


class TestStep1D:
    def test_lake_at_rest_over_varying_bed(self):
        n = 120
        x = (np.arange(n) + 0.5) * 0.05
        bed = 0.3 * np.exp(-((x - 3.0) ** 2)) + 0.1 * (x > 4.0)
        geom = rectangular(n, 0.05, width=0.5, bed=bed, ny=4)
        A = (1.0 - bed) * 0.5
        state = ChannelState1D(geom, A.copy(), np.zeros(n))
        for _ in range(1000):
            state, _ = step_1d(state, stable_dt_1d(state, 0.95), ends=("wall", "open"))
        assert np.abs(state.A - A).max() <= 1e-12
        assert np.abs(state.Q).max() <= 1e-12

    def test_lake_at_rest_with_varying_width(self):
        n = 40
        widths = np.where(np.arange(n) < 20, 0.5, 0.8)
        geom = build_channel_geometry(np.zeros((n, 1)), widths[:, None], 5.0, dx=0.1)
        A = 0.7 * widths
        state = ChannelState1D(geom, A.copy(), np.zeros(n))
        for _ in range(1000):
            state, _ = step_1d(state, stable_dt_1d(state, 0.95))
        assert np.abs(state.A - A).max() <= 1e-12
        assert np.abs(state.Q).max() <= 1e-12

    def test_dam_break_converges_to_exact_solution(self):
        errors = [dam_break_error(n) for n in (100, 200, 400, 800)]
        ratios = [errors[k] / errors[k + 1] for k in range(3)]
        assert all(r >= 1.5 for r in ratios), ratios

    def test_closed_ends_conserve_mass(self):
        n = 80
        geom = rectangular(n, 0.1, width=0.5)
        x = geom.x_centers
        state = ChannelState1D(geom, np.where(x < 2.0, 0.6, 0.001), np.zeros(n))
        m0 = state.mass()
        clipped = 0.0
        for _ in range(500):
            state, record = step_1d(state, stable_dt_1d(state, 0.95), manning_n=0.01)
            clipped += record.clipped
        assert abs(state.mass() - clipped - m0) <= 1e-12 * m0

    def test_open_end_outflow_is_recorded(self):
        n = 30
        geom = rectangular(n, 0.1)
        state = ChannelState1D(geom, np.full(n, 1.0), np.full(n, 0.5))
        m0 = state.mass()
        new, record = step_1d(state, 0.01, ends=("wall", "open"))
        assert record.boundary_outflow > 0.0
        assert new.mass() == pytest.approx(m0 - record.boundary_outflow, abs=1e-14)

    def test_rejects_non_rectangular_sections(self):
        geom = build_channel_geometry(np.array([[0.0, 0.5]]), 0.5, 2.0)
        with pytest.raises(ValueError, match="rectangular"):
            step_1d(ChannelState1D(geom, np.array([0.2]), np.zeros(1)), 0.01)


class TestApplyCouplingFlux:
    def state(self):
        return ChannelState1D(rectangular(3, 0.1), np.array([0.5, 0.5, 0.5]), np.array([0.1, 0.0, -0.1]))

    def test_zero_flux_is_identity(self):
        s = self.state()
        out = apply_coupling_flux(s, np.zeros(3), np.zeros(3), 0.1)
        np.testing.assert_array_equal(out.A, s.A)
        np.testing.assert_array_equal(out.Q, s.Q)

    def test_linear_increment(self):
        out = apply_coupling_flux(self.state(), np.array([0.1, 0.0, 0.0]), np.zeros(3), 0.01)
        assert out.A[0] == 0.5 + 0.1 * 0.01
        assert out.A[0] - 0.5 == pytest.approx(0.001, abs=1e-16)

    def test_negative_area_rejected(self):
        with pytest.raises(NegativeAreaError) as err:
            apply_coupling_flux(self.state(), np.array([0.0, -100.0, 0.0]), np.zeros(3), 0.01)
        assert err.value.cell == 1

    def test_exchange_balances_floodplain_loss(self):
        # 1D channel beside a flooded floodplain in a closed domain: the volume the
        # floodplain loses over the bank is exactly the volume the channel gains
        n = 10
        geom = rectangular(n, 0.1, width=0.5, ny=4)
        fp = Block("fp", 0.0, -1.0, 0.1, 0.25, n, 4)
        model = FluxBasedModel(geom, [fp], np.full(fp.n_cells, 0.3), channel_x0=0.0, channel_sides={},
                               manning={})
        floodplain = ConservedState2D(model.floodplain_mesh, np.full(fp.n_cells, 0.2), np.zeros(fp.n_cells),
                                      np.zeros(fp.n_cells), np.full(fp.n_cells, 0.3))
        state = FBMState(ChannelState1D(geom, np.full(n, 0.1), np.zeros(n)), floodplain)
        total = model.total_mass(state)
        for _ in range(50):
            state, info = model.step(state, model.stable_dt(state, 0.9))
            assert info.clipped == 0.0
        assert state.floodplain.mass() < 0.2 * fp.n_cells * 0.025
        assert model.total_mass(state) == pytest.approx(total, rel=1e-12)
