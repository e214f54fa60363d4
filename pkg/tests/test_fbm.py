import numpy as np
import pytest

from vcmflood.fbm import FBMState, FluxBasedModel
from vcmflood.geometry import build_channel_geometry
from vcmflood.grid import Block
from vcmflood.swe1d import ChannelState1D, step_1d
from vcmflood.swe2d import ConservedState2D


def coupled(n=20, wall=0.5, fp_bed=0.5, sides=None, bank_crest=None):
    geom = build_channel_geometry(np.zeros((n, 1)), 0.5, wall, dx=0.1, y_south=1.0)
    fp = Block("fp", 0.0, 0.0, 0.1, 0.1, n, 10)
    model = FluxBasedModel(geom, [fp], np.full(fp.n_cells, fp_bed), channel_x0=0.0, channel_sides=sides or {},
                           manning={}, bank_crest=bank_crest)
    return model, fp


def state_for(model, fp, A, fp_depth):
    A = np.broadcast_to(np.asarray(A, dtype=float), (model.geom.n_cells,)).copy()
    H = np.full(fp.n_cells, float(fp_depth))
    floodplain = ConservedState2D(model.floodplain_mesh, H, np.zeros_like(H), np.zeros_like(H), model.fp_bed)
    return FBMState(ChannelState1D(model.geom, A, np.zeros_like(A)), floodplain)


class TestFluxBasedModel:
    def test_ghost_carries_section_depth_and_velocity(self):
        model, fp = coupled()
        channel = ChannelState1D(model.geom, np.full(20, 0.4), np.full(20, 0.2))
        depth, q_along, bed = model.ghost_state(channel)
        np.testing.assert_allclose(depth, 0.8)
        np.testing.assert_allclose(q_along, 0.8 * 0.5)
        assert not bed.any()

    def test_lake_at_rest(self):
        model, fp = coupled()
        state = state_for(model, fp, 0.45, 0.4)
        start = state
        for _ in range(200):
            state, info = model.step(state, model.stable_dt(state, 0.95))
        np.testing.assert_allclose(state.channel.A, start.channel.A, rtol=0, atol=1e-12)
        assert np.abs(state.channel.Q).max() <= 1e-12
        np.testing.assert_allclose(state.floodplain.H, 0.4, rtol=0, atol=1e-12)
        assert np.abs(state.floodplain.q_y).max() <= 1e-12

    def test_below_bank_with_dry_floodplain_matches_1d_solver(self):
        model, fp = coupled(wall=2.0, fp_bed=2.0)
        x = model.geom.x_centers
        state = state_for(model, fp, np.where(x < 1.0, 0.4, 0.1), 0.0)
        reference = state.channel
        for _ in range(30):
            dt = model.stable_dt(state, 0.9)
            state, info = model.step(state, dt)
            reference, _ = step_1d(reference, dt)
            assert not info.coupling.phi_A.any()
            assert not info.coupling.phi_Q.any()
        np.testing.assert_array_equal(state.channel.A, reference.A)
        assert state.floodplain.mass() == 0.0

    def test_closed_domain_conserves_volume_while_flooding(self):
        model, fp = coupled(wall=0.3, fp_bed=0.3)
        x = model.geom.x_centers
        state = state_for(model, fp, np.where(x < 0.8, 0.5, 0.1), 0.0)
        m0 = model.total_mass(state)
        for _ in range(300):
            state, info = model.step(state, model.stable_dt(state, 0.95))
            assert info.clipped == 0.0
        assert state.floodplain.mass() > 0.0
        assert model.total_mass(state) == pytest.approx(m0, rel=1e-12)

    def test_exchange_balances_floodplain_gain(self):
        model, fp = coupled(wall=0.3, fp_bed=0.3)
        state = state_for(model, fp, 0.4, 0.0)
        dt = model.stable_dt(state, 0.9)
        new, info = model.step(state, dt)
        gained = new.floodplain.mass() - state.floodplain.mass()
        assert gained > 0.0
        assert gained == pytest.approx(-dt * model.geom.dx * info.coupling.phi_A.sum(), rel=1e-12)
        assert new.channel.mass() == pytest.approx(state.channel.mass() - gained, rel=1e-12)

    def test_bank_crest_blocks_low_water(self):
        model, fp = coupled(wall=0.3, fp_bed=0.3, bank_crest=lambda x: np.full_like(x, 2.0))
        state = state_for(model, fp, 0.4, 0.0)
        for _ in range(20):
            state, info = model.step(state, model.stable_dt(state, 0.9))
        assert state.floodplain.mass() == 0.0
