"""Solitary-wave profiles, families and interaction constants."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gkdvlab.errors import ConfigurationError, WindowError
from gkdvlab.grid import l2_norm, make_grid, spectral_derivative
from gkdvlab.profiles import (
    SolitonFamily,
    SolitonParams,
    interaction_constants,
    multisoliton_sum,
    q_peak,
    q_profile,
    q_profile_closed_form,
    soliton_field,
)


class TestClosedForm:
    @pytest.mark.parametrize("c", [0.5, 1.0, 2.0, 4.0])
    @pytest.mark.parametrize("p", [6, 7])
    def test_profile_solves_its_ode(self, p, c):
        # Q'' + Q^p = c Q pointwise, derivatives taken spectrally.
        grid = make_grid(4096, 160.0 / math.sqrt(c), -80.0 / math.sqrt(c))
        q = q_profile(p, c, grid)
        resid = (
            spectral_derivative(q, 2).values + q.values**p - c * q.values
        )
        assert np.max(np.abs(resid)) < 1e-10

    def test_peak_value(self):
        assert q_peak(6, 1.0) == pytest.approx(3.5 ** 0.2)
        for p, c in [(6, 2.0), (8, 0.5)]:
            assert q_profile_closed_form(p, c, np.array([0.0]))[0] == pytest.approx(
                q_peak(p, c)
            )

    def test_even_and_decaying(self):
        x = np.linspace(0.0, 50.0, 400)
        q = q_profile_closed_form(6, 1.0, x)
        assert np.all(np.diff(q) < 0)
        assert np.allclose(q_profile_closed_form(6, 1.0, -x), q)

    def test_no_overflow_far_field(self):
        # The sech form must underflow cleanly, not overflow an intermediate.
        with np.errstate(over="raise"):
            vals = q_profile_closed_form(6, 4.0, np.array([500.0, 1e4]))
        assert np.all(vals == 0.0)

    @given(c=st.floats(0.1, 10.0), x=st.floats(-30.0, 30.0))
    @settings(max_examples=40, deadline=None)
    def test_scaling_relation(self, c, x):
        # Q_c(x) = c^{1/(p-1)} Q_1(sqrt(c) x)
        p = 6
        lhs = q_profile_closed_form(p, c, np.array([x]))[0]
        rhs = c ** (1.0 / (p - 1)) * q_profile_closed_form(
            p, 1.0, np.array([math.sqrt(c) * x])
        )[0]
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)

    @pytest.mark.parametrize("c", [0.5, 1.0, 2.0, 4.0])
    def test_mass_scaling(self, c):
        # int Q_c^2 / int Q_1^2 = c^{(5-p)/(2(p-1))}
        p = 6
        grid_c = make_grid(2048, 200.0 / math.sqrt(c), -100.0 / math.sqrt(c))
        grid_1 = make_grid(2048, 200.0, -100.0)
        ratio = l2_norm(q_profile(p, c, grid_c)) ** 2 / l2_norm(
            q_profile(p, 1.0, grid_1)
        ) ** 2
        assert ratio == pytest.approx(c ** ((5.0 - p) / (2.0 * (p - 1))), abs=1e-8)


class TestGriddedProfile:
    def test_rejects_nonpositive_speed(self):
        with pytest.raises(ConfigurationError):
            q_profile(6, -1.0, make_grid(256, 100.0, -50.0))

    def test_rejects_center_outside_grid(self):
        with pytest.raises(WindowError):
            q_profile(6, 1.0, make_grid(256, 100.0, -50.0), center=80.0)

    def test_rejects_narrow_box(self):
        # Boundary value would be visible at working precision.
        with pytest.raises(ConfigurationError):
            q_profile(6, 1.0, make_grid(256, 20.0, -10.0))

    def test_soliton_field_travels(self):
        g = make_grid(1024, 200.0, -100.0)
        s = SolitonParams(2.0, -40.0)
        f0 = soliton_field(s, 6, 0.0, g)
        f3 = soliton_field(s, 6, 3.0, g)
        i0 = np.argmax(f0.values)
        i3 = np.argmax(f3.values)
        assert g.nodes[i0] == pytest.approx(-40.0, abs=g.spacing)
        assert g.nodes[i3] == pytest.approx(-34.0, abs=g.spacing)

    def test_soliton_field_window_guard(self):
        g = make_grid(1024, 200.0, -100.0)
        s = SolitonParams(2.0, -40.0)
        with pytest.raises(WindowError):
            soliton_field(s, 6, 100.0, g)  # center would be at 160


class TestFamily:
    def test_orders_and_validates(self):
        fam = SolitonFamily.from_lists(6, [1.0, 2.0], [-70.0, -40.0])
        assert fam.n_solitons == 2
        assert fam.speeds == (1.0, 2.0)
        assert fam.shifts == (-70.0, -40.0)

    def test_rejects_unsorted_speeds(self):
        with pytest.raises(ConfigurationError):
            SolitonFamily.from_lists(6, [2.0, 1.0], [0.0, 10.0])

    def test_rejects_subcritical_exponent(self):
        with pytest.raises(ConfigurationError):
            SolitonFamily.from_lists(5, [1.0], [0.0])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ConfigurationError):
            SolitonFamily.from_lists(6, [1.0, 2.0], [0.0])

    def test_multisoliton_sum_is_sum(self):
        g = make_grid(1024, 200.0, -100.0)
        fam = SolitonFamily.from_lists(6, [1.0, 2.0], [-70.0, -40.0])
        total = multisoliton_sum(fam, 1.0, g)
        parts = sum(
            soliton_field(m, fam.p, 1.0, g).values for m in fam.members
        )
        assert np.array_equal(total.values, parts)


class TestInteractionConstants:
    def test_reference_values(self):
        fam = SolitonFamily.from_lists(6, [1.0, 2.0], [-70.0, -40.0])
        consts = interaction_constants(fam, basis_e0=0.6345, basis_eta0=0.616)
        # sigma0 = min(eta0^{2/3} c1, e0^{2/3} c1, c1, c2 - c1)
        assert consts.sigma0 == pytest.approx(0.616 ** (2.0 / 3.0))
        assert consts.gamma_paper == pytest.approx(consts.sigma0**1.5 / 1e6)
        assert consts.gamma_eff == pytest.approx(consts.sigma0**1.5 / 16.0)
        assert consts.gamma_eff > consts.gamma_paper

    def test_speed_gap_can_bind(self):
        fam = SolitonFamily.from_lists(6, [1.0, 1.2], [-70.0, -40.0])
        consts = interaction_constants(fam, basis_e0=0.6345, basis_eta0=0.616)
        assert consts.sigma0 == pytest.approx(0.2)

    def test_rejects_bad_spectral_inputs(self):
        fam = SolitonFamily.from_lists(6, [1.0, 2.0], [-70.0, -40.0])
        with pytest.raises(ConfigurationError):
            interaction_constants(fam, basis_e0=-1.0, basis_eta0=0.6)
