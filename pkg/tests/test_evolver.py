"""Time integrator: configuration guards, accuracy, conservation, symmetry."""

import math

import numpy as np
import pytest

from gkdvlab.errors import BlowUpError, ConfigurationError
from gkdvlab.evolver import EvolveConfig, Trajectory, conserved_quantities, evolve
from gkdvlab.grid import Field, h1_distance, make_grid
from gkdvlab.profiles import SolitonParams, q_profile, soliton_field


@pytest.fixture(scope="module")
def soliton_grid():
    return make_grid(4096, 200.0, -100.0)


class TestEvolveConfig:
    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ConfigurationError):
            EvolveConfig(0.0, 1.0, dt=0.0)

    def test_rejects_zero_span(self):
        with pytest.raises(ConfigurationError):
            EvolveConfig(1.0, 1.0, dt=1e-3)

    def test_rejects_non_divisible_span(self):
        with pytest.raises(ConfigurationError):
            EvolveConfig(0.0, 1.0, dt=3e-4)

    def test_rejects_bad_stride(self):
        with pytest.raises(ConfigurationError):
            EvolveConfig(0.0, 1.0, dt=1e-3, record_stride=0)

    def test_direction_from_ordering(self):
        fwd = EvolveConfig(0.0, 1.0, dt=1e-3)
        bwd = EvolveConfig(1.0, 0.0, dt=1e-3)
        assert not fwd.backward and bwd.backward
        assert fwd.n_steps == bwd.n_steps == 1000

    def test_stability_guard(self, soliton_grid):
        u0 = q_profile(6, 1.0, soliton_grid)
        cfg = EvolveConfig(0.0, 1.0, dt=0.5, stability_factor=1.0)
        with pytest.raises(ConfigurationError, match="stability"):
            evolve(u0, 6, cfg)


class TestTrajectory:
    def test_at_time_and_reversed(self, soliton_grid):
        u0 = q_profile(6, 1.0, soliton_grid)
        traj = evolve(u0, 6, EvolveConfig(0.0, 0.1, dt=1e-2, record_stride=5))
        assert traj.times[0] == 0.0 and traj.times[-1] == pytest.approx(0.1)
        mid = traj.at_time(0.05)
        assert isinstance(mid, Field)
        rev = traj.reversed()
        assert rev.times[0] == pytest.approx(0.1)
        assert np.array_equal(rev.snapshots[-1].values, traj.snapshots[0].values)
        with pytest.raises(Exception):
            traj.at_time(0.33)


class TestAccuracy:
    def test_soliton_transport(self, soliton_grid):
        # Q_c(x - ct) is an exact solution; H1 error after t = 1.
        u0 = soliton_field(SolitonParams(1.0, 0.0), 6, 0.0, soliton_grid)
        traj = evolve(u0, 6, EvolveConfig(0.0, 1.0, dt=1e-3, record_stride=1000))
        exact = soliton_field(SolitonParams(1.0, 0.0), 6, 1.0, soliton_grid)
        assert h1_distance(traj.snapshots[-1], exact) < 2e-6

    def test_fourth_order_in_dt(self, soliton_grid):
        u0 = soliton_field(SolitonParams(1.0, 0.0), 6, 0.0, soliton_grid)
        exact = soliton_field(SolitonParams(1.0, 0.0), 6, 1.0, soliton_grid)
        errs = []
        for dt in (4e-3, 2e-3, 1e-3):
            traj = evolve(u0, 6, EvolveConfig(0.0, 1.0, dt=dt, record_stride=int(1.0 / dt)))
            errs.append(h1_distance(traj.snapshots[-1], exact))
        order1 = math.log2(errs[0] / errs[1])
        order2 = math.log2(errs[1] / errs[2])
        # Superconvergence above 4 is fine; the guard is against order decay.
        assert 3.5 < order1 < 5.5
        assert 3.5 < order2 < 5.5

    def test_mass_energy_drift(self, soliton_grid):
        u0 = soliton_field(SolitonParams(1.0, 0.0), 6, 0.0, soliton_grid)
        traj = evolve(u0, 6, EvolveConfig(0.0, 2.0, dt=2.5e-4, record_stride=800))
        m = traj.mass_series
        e = traj.energy_series
        assert np.max(np.abs(m - m[0])) / abs(m[0]) < 1e-9
        assert np.max(np.abs(e - e[0])) / abs(e[0]) < 1e-9

    def test_conserved_quantities_formulas(self):
        g = make_grid(128, 2.0 * np.pi)
        u = Field(g, np.sin(g.nodes))
        mass, energy = conserved_quantities(u, 6)
        # int sin^2 = pi; int cos^2/2 = pi/2; int sin^7 = 0.
        assert mass == pytest.approx(np.pi, rel=1e-12)
        assert energy == pytest.approx(np.pi / 2.0, rel=1e-12)


class TestBackward:
    def test_backward_inverts_forward(self, soliton_grid):
        u0 = soliton_field(SolitonParams(1.0, 10.0), 6, 0.0, soliton_grid)
        fwd = evolve(u0, 6, EvolveConfig(0.0, 0.5, dt=5e-4, record_stride=1000))
        back = evolve(fwd.snapshots[-1], 6, EvolveConfig(0.5, 0.0, dt=5e-4, record_stride=1000))
        assert back.times[0] == pytest.approx(0.5)
        assert back.times[-1] == pytest.approx(0.0)
        assert h1_distance(back.snapshots[-1], u0) < 1e-6

    def test_backward_times_decreasing(self, soliton_grid):
        u0 = soliton_field(SolitonParams(1.0, 0.0), 6, 0.0, soliton_grid)
        traj = evolve(u0, 6, EvolveConfig(0.2, 0.0, dt=1e-2, record_stride=5))
        assert np.all(np.diff(traj.times) < 0)


class TestFailureModes:
    def test_blow_up_detected(self):
        # A large focused pulse in the supercritical regime blows up fast.
        g = make_grid(1024, 100.0, -50.0)
        u0 = Field(g, 5.0 * np.exp(-((g.nodes) ** 2)))
        with pytest.raises(BlowUpError) as exc_info:
            evolve(u0, 6, EvolveConfig(0.0, 5.0, dt=1e-4, record_stride=100))
        assert exc_info.value.last_valid_time is not None
