"""Trajectory measurements: weights, modulation, projections, rate fits."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gkdvlab.diagnostics import (
    ProjectionSeries,
    alpha_ode_residual,
    fit_rate,
    functional_H,
    local_linearized_energy,
    local_quantities,
    modulate,
    project,
    psi_derivatives,
    psi_scalar,
    weights,
)
from gkdvlab.errors import ArgumentError, ConvergenceError, DomainError
from gkdvlab.grid import Field, l2_norm, make_grid, spectral_derivative
from gkdvlab.linearized import mode_on_grid
from gkdvlab.profiles import SolitonFamily, multisoliton_sum, q_profile


class TestPsi:
    @given(
        sigma0=st.floats(0.05, 2.0),
        x=st.floats(-50.0, 50.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_reflection_partition(self, sigma0, x):
        s = psi_scalar(sigma0, np.array([x, -x]))
        assert s[0] + s[1] == pytest.approx(1.0, abs=1e-14)

    def test_limits(self):
        s = psi_scalar(0.7, np.array([-400.0, 0.0, 400.0]))
        assert s[0] == pytest.approx(1.0, abs=1e-12)
        assert s[1] == pytest.approx(0.5, abs=1e-14)
        assert s[2] == pytest.approx(0.0, abs=1e-12)

    def test_third_derivative_bound(self):
        # |psi'''| <= (sigma0/4)|psi'| pointwise.
        sigma0 = 0.7238656896714203
        x = np.linspace(-60.0, 60.0, 5001)
        d1, _, d3 = psi_derivatives(sigma0, x)
        # Equality holds exactly at x = 0, so allow rounding there.
        assert np.all(np.abs(d3) <= (sigma0 / 4.0) * np.abs(d1) * (1.0 + 1e-12))

    def test_derivatives_match_finite_differences(self):
        sigma0 = 0.9
        x = np.linspace(-5.0, 5.0, 101)
        h = 1e-5
        d1, d2, d3 = psi_derivatives(sigma0, x)
        fd1 = (psi_scalar(sigma0, x + h) - psi_scalar(sigma0, x - h)) / (2 * h)
        assert np.max(np.abs(d1 - fd1)) < 1e-9
        e1p, _, _ = psi_derivatives(sigma0, x + h)
        e1m, _, _ = psi_derivatives(sigma0, x - h)
        assert np.max(np.abs(d2 - (e1p - e1m) / (2 * h))) < 1e-9


class TestWeights:
    def test_partition_of_unity(self, fam, consts, evo_grid):
        ws = weights(fam, consts.sigma0, 5.0, evo_grid)
        total = sum(p.values for p in ws.phi)
        assert np.max(np.abs(total - 1.0)) < 1e-14

    def test_h_range_and_monotonicity(self, fam, consts, evo_grid):
        ws = weights(fam, consts.sigma0, 5.0, evo_grid)
        assert np.all(ws.h.values <= 1.0 / fam.speeds[0] + 1e-14)
        assert np.all(ws.h.values >= 1.0 / fam.speeds[-1] - 1e-14)
        assert np.all(ws.h_x.values <= 0.0)

    def test_h_time_derivative_dominates(self, fam, consts, evo_grid):
        ws = weights(fam, consts.sigma0, 5.0, evo_grid)
        margin = ws.h_t.values - consts.sigma0 * np.abs(ws.h_x.values)
        assert np.min(margin) >= 0.0

    def test_single_soliton_trivial_partition(self, consts, evo_grid):
        fam1 = SolitonFamily.from_lists(6, [1.0], [0.0])
        ws = weights(fam1, consts.sigma0, 1.0, evo_grid)
        assert len(ws.phi) == 1
        assert np.all(ws.phi[0].values == 1.0)


class TestModulate:
    def test_recovers_imposed_shifts(self, fam, evo_grid):
        t = 5.0
        y_true = np.array([0.031, -0.017])
        vals = sum(
            q_profile(fam.p, m.c, evo_grid, m.c * t + m.x0 + y_true[j]).values
            for j, m in enumerate(fam.members)
        )
        state = modulate(Field(evo_grid, vals), fam, t)
        assert np.max(np.abs(state.y - y_true)) < 1e-10
        assert np.max(np.abs(state.ortho_residuals)) < 1e-10

    def test_zero_for_exact_sum(self, fam, evo_grid):
        t = 5.0
        state = modulate(multisoliton_sum(fam, t, evo_grid), fam, t)
        assert np.max(np.abs(state.y)) < 1e-12

    def test_out_of_basin_raises(self, fam, evo_grid):
        t = 5.0
        u = 3.0 * multisoliton_sum(fam, t, evo_grid)
        with pytest.raises(ConvergenceError):
            modulate(u, fam, t)


class TestProject:
    def test_mode_amplitude_recovery(self, fam, bases, evo_grid):
        t = 5.0
        eps = 2.5e-4
        center = fam.members[0].c * t + fam.members[0].x0
        y = mode_on_grid(bases[0], "y_plus", evo_grid, center)
        plus, minus, a = project(eps * y, fam, bases, t)
        # (y+, z-) = 1 picks the amplitude in the minus projection.
        assert minus[0] == pytest.approx(eps, rel=1e-6)
        assert abs(plus[0]) < 1e-10
        assert abs(minus[1]) < 1e-8 and abs(plus[1]) < 1e-8

    def test_translation_component(self, fam, bases, evo_grid):
        t = 5.0
        eps = 1e-3
        m = fam.members[0]
        rx = spectral_derivative(
            q_profile(fam.p, m.c, evo_grid, m.c * t + m.x0), 1
        )
        _, _, a = project(eps * rx, fam, bases, t)
        assert a[0] == pytest.approx(-eps, rel=1e-10)

    def test_series_shape_guard(self):
        with pytest.raises(ArgumentError):
            ProjectionSeries(
                times=np.arange(4.0),
                alpha_plus=np.zeros((2, 3)),
                alpha_minus=np.zeros((2, 4)),
                a=np.zeros((2, 4)),
            )


class TestLocalQuantities:
    def test_masses_localize_on_solitons(self, fam, consts, evo_grid):
        t = 5.0
        u = multisoliton_sum(fam, t, evo_grid)
        m, e, et = local_quantities(u, fam, t, consts.sigma0)
        for j, mem in enumerate(fam.members):
            ref = l2_norm(q_profile(fam.p, mem.c, evo_grid)) ** 2
            # The weight midpoint sits ~17 units away; the residual leakage
            # across it is a few 1e-5 of the mass.
            assert m[j] == pytest.approx(ref, rel=2e-4)
        assert np.allclose(et, e + consts.sigma0 / 100.0 * m)

    def test_functional_vanishes_at_zero(self, fam, consts, evo_grid):
        z = Field(evo_grid, np.zeros(evo_grid.num_points))
        bg = multisoliton_sum(fam, 5.0, evo_grid)
        assert functional_H(z, bg, None, fam, 5.0, consts.sigma0) == 0.0

    def test_local_linearized_energy_zero_field(self, fam, consts, evo_grid):
        w = Field(evo_grid, np.zeros(evo_grid.num_points))
        out = local_linearized_energy(w, fam, 5.0, consts.sigma0)
        assert np.all(out == 0.0)


class TestFitRate:
    def test_recovers_exact_exponential(self):
        ts = np.linspace(2.0, 8.0, 61)
        series = [(t, 3.7 * math.exp(-0.83 * t)) for t in ts]
        rate, pref, r2 = fit_rate(series, (2.0, 8.0))
        assert rate == pytest.approx(0.83, rel=1e-12)
        assert pref == pytest.approx(3.7, rel=1e-10)
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_needs_enough_points(self):
        series = [(t, 1.0) for t in np.linspace(0, 1, 5)]
        with pytest.raises(DomainError):
            fit_rate(series, (0.0, 1.0))

    def test_rejects_nonpositive_values(self):
        series = [(t, math.cos(3 * t)) for t in np.linspace(0, 5, 50)]
        with pytest.raises(DomainError):
            fit_rate(series, (0.0, 5.0))


class TestAlphaOde:
    def _series(self, bases, dt=0.05, n=41, nonuniform=False, z_norms=True):
        ts = np.arange(n) * dt + 5.0
        if nonuniform:
            ts = ts.copy()
            ts[3] += 0.3 * dt
        ap = np.vstack([1e-9 * np.exp(b.e_c * (ts - ts[0])) for b in bases])
        am = np.vstack([1e-4 * np.exp(-b.e_c * (ts - ts[0])) for b in bases])
        a = np.zeros_like(ap)
        return ProjectionSeries(
            times=ts,
            alpha_plus=ap,
            alpha_minus=am,
            a=a,
            z_norms=np.full(n, 1e-3) if z_norms else None,
        )

    def test_exact_exponentials_have_small_residual(self, bases):
        series = self._series(bases)
        out = alpha_ode_residual(series, bases)
        assert set(out) == {("plus", 1), ("plus", 2), ("minus", 1), ("minus", 2)}
        for v in out.values():
            assert v < 1e-6

    def test_guards(self, bases):
        with pytest.raises(DomainError):
            alpha_ode_residual(self._series(bases, n=4), bases)
        with pytest.raises(DomainError):
            alpha_ode_residual(self._series(bases, nonuniform=True), bases)
        with pytest.raises(DomainError):
            alpha_ode_residual(self._series(bases, z_norms=False), bases)
