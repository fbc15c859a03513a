import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phiperiodic.errors import ScanDivergence
from phiperiodic.problem import (Forcing, Nonlinearity, ProblemSpec, ScanConfig,
                                 ValidationConfig, builtin_relativistic, estimate_alpha_F0,
                                 preset, primitive_by_quadrature, sine_forcing,
                                 strong_resonance, validate_hypotheses, zero_forcing,
                                 zero_nonlinearity)

from conftest import PRESET_NAMES


class TestRelativistic:
    def test_Phi_at_zero(self):
        assert builtin_relativistic().Phi(0.0) == 0.0

    def test_Phi_at_point_six(self):
        assert builtin_relativistic().Phi(0.6) == pytest.approx(0.2, abs=1e-15)

    def test_inverse_pair(self):
        pm = builtin_relativistic()
        assert abs(pm.phi_inv(pm.phi(0.3)) - 0.3) <= 1e-12

    def test_quadratic_coefficient(self):
        pm = builtin_relativistic()
        assert pm.k == 0.25
        s = np.linspace(-1, 1, 10001)
        assert np.all(pm.Phi(s) >= pm.k * s ** 2 - 1e-15)

    def test_phi_is_derivative_of_Phi(self):
        pm = builtin_relativistic()
        s = np.linspace(-0.95, 0.95, 41)
        eta = 1e-6
        fd = (pm.Phi(s + eta) - pm.Phi(s - eta)) / (2 * eta)
        np.testing.assert_allclose(fd, pm.phi(s), rtol=1e-7, atol=1e-9)

    def test_dphi_matches_difference(self):
        pm = builtin_relativistic()
        s = np.linspace(-0.9, 0.9, 19)
        eta = 1e-6
        fd = (pm.phi(s + eta) - pm.phi(s - eta)) / (2 * eta)
        np.testing.assert_allclose(pm.dphi(s), fd, rtol=1e-6)

    def test_scaled_bound(self):
        pm = builtin_relativistic(a=2.0)
        assert pm.k == pytest.approx(0.125)
        assert float(pm.Phi(2.0)) == pytest.approx(2.0)
        assert float(pm.phi_inv(pm.phi(1.5))) == pytest.approx(1.5, abs=1e-12)

    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_phi_and_inverse_are_odd(self, name):
        pm = preset(name).phi_model
        s = np.linspace(0, 0.999, 200)
        np.testing.assert_array_equal(pm.phi(-s), -pm.phi(s))
        y = np.linspace(0, 50, 200)
        np.testing.assert_array_equal(pm.phi_inv(-y), -pm.phi_inv(y))

    @given(st.floats(-0.999, 0.999))
    def test_inverse_roundtrip_property(self, s):
        pm = builtin_relativistic()
        assert abs(float(pm.phi_inv(pm.phi(s))) - s) <= 1e-12

    def test_rejects_bad_bound(self):
        pm = builtin_relativistic()
        with pytest.raises(ValueError):
            type(pm)(**{**pm.__dict__, "a": 0.0})


class TestValidation:
    def test_closed_forms_pass(self):
        T = 2 * math.pi
        nl = strong_resonance(+1.0)
        forcing = Forcing(h=lambda t: np.sin(2 * np.pi * np.asarray(t) / T),
                          H=lambda t: T / (2 * np.pi) * (1 - np.cos(2 * np.pi * np.asarray(t) / T)))
        report = validate_hypotheses(ProblemSpec(T, builtin_relativistic(), nl, forcing))
        assert report.passed, report.to_dict()

    def test_constant_forcing_fails_with_violation_T(self):
        T = 3.0
        forcing = Forcing(h=lambda t: np.ones(np.shape(t)), H=lambda t: np.asarray(t, float))
        report = validate_hypotheses(ProblemSpec(T, builtin_relativistic(),
                                                 zero_nonlinearity(), forcing))
        check = report.get("H_h")
        assert not check.passed
        assert check.violation == pytest.approx(T, rel=1e-12)

    def test_sine_nonlinearity_fails_tail_check(self):
        nl = Nonlinearity(f=lambda t, s: np.sin(s) + 0 * t, F=lambda t, s: 1 - np.cos(s) + 0 * t,
                          alpha=None, C_bound=3.0, F0=0.0)
        spec = ProblemSpec(2 * math.pi, builtin_relativistic(), nl, zero_forcing())
        report = validate_hypotheses(spec)
        assert not report.get("H_f").passed
        assert report.get("H_Phi").passed

    def test_deterministic(self):
        spec = preset("strong-resonance-repulsive")
        a = validate_hypotheses(spec).to_dict()
        b = validate_hypotheses(spec).to_dict()
        assert a == b

    def test_F_not_vanishing_at_zero_is_reported(self):
        nl = Nonlinearity(f=lambda t, s: 0 * s + 0 * t, F=lambda t, s: 1.0 + 0 * s + 0 * t,
                          alpha=1.0, C_bound=1.0, F0=1.0)
        spec = ProblemSpec(2 * math.pi, builtin_relativistic(), nl, zero_forcing())
        assert not validate_hypotheses(spec).get("H_f").passed


class TestAlphaF0:
    def test_attractive(self):
        nl = Nonlinearity.from_maps(lambda t, s: 2 * s / (1 + s * s) ** 2 + 0 * t,
                                    F=lambda t, s: 1 - 1 / (1 + s * s) + 0 * t,
                                    estimate_alpha=False)
        alpha, F0 = estimate_alpha_F0(nl)
        assert alpha == pytest.approx(1.0, abs=1e-6)
        assert F0 == pytest.approx(0.0, abs=1e-12)

    def test_zero(self):
        assert estimate_alpha_F0(zero_nonlinearity()) == (0.0, 0.0)

    def test_repulsive(self):
        nl = Nonlinearity.from_maps(lambda t, s: -2 * s / (1 + s * s) ** 2 + 0 * t,
                                    F=lambda t, s: 1 / (1 + s * s) - 1 + 0 * t,
                                    estimate_alpha=False)
        alpha, F0 = estimate_alpha_F0(nl)
        assert alpha == pytest.approx(-1.0, abs=1e-6)
        assert F0 == pytest.approx(-1.0, abs=1e-6)

    def test_divergent_tails(self):
        nl = Nonlinearity(f=lambda t, s: 0 * s + 0 * t, F=lambda t, s: np.arctan(s) + 0 * t,
                          alpha=None, C_bound=2.0, F0=-2.0)
        with pytest.raises(ScanDivergence):
            estimate_alpha_F0(nl)

    def test_stable_under_larger_radius(self):
        nl = strong_resonance(+1.0)
        a1, _ = estimate_alpha_F0(nl, ScanConfig(s_max=1e3))
        a2, _ = estimate_alpha_F0(nl, ScanConfig(s_max=1e4))
        assert abs(a1 - a2) < ScanConfig().tail_tol


class TestQuadraturePrimitive:
    def test_matches_closed_form(self):
        f = lambda t, s: 2 * s / (1 + s * s) ** 2 + 0 * t
        F = primitive_by_quadrature(f)
        s = np.array([-1e4, -37.0, -1.0, -0.1, 0.0, 0.3, 2.0, 150.0, 1e4])
        np.testing.assert_allclose(F(0.0, s), s * s / (1 + s * s), atol=1e-12)

    def test_from_maps_estimates_constants(self):
        nl = Nonlinearity.from_maps(lambda t, s: -2 * s / (1 + s * s) ** 2 + 0 * t)
        assert nl.alpha == pytest.approx(-1.0, abs=1e-6)
        assert nl.F0 == pytest.approx(-1.0, abs=1e-6)


class TestPresets:
    def test_defaults(self):
        spec = preset("strong-resonance-repulsive")
        assert spec.T == pytest.approx(8 * math.pi)
        assert spec.nonlinearity.alpha == -1.0 == spec.nonlinearity.F0
        assert spec.forcing.sup_norm(spec.T) == pytest.approx(0.05)

    def test_unknown(self):
        with pytest.raises(KeyError):
            preset("nope")

    def test_forcing_primitive(self):
        fo = sine_forcing(0.1)
        num = Forcing.from_h(fo.h)
        t = np.array([0.3, 1.7, 5.0])
        np.testing.assert_allclose(num.H(t), fo.H(t), atol=1e-12)

    def test_period_must_be_positive(self):
        with pytest.raises(ValueError):
            ProblemSpec(-1.0, builtin_relativistic(), zero_nonlinearity(), zero_forcing())

    @settings(deadline=None, max_examples=25)
    @given(st.floats(-50, 50))
    def test_strong_resonance_F_between_F0_and_alpha(self, s):
        nl = strong_resonance(+1.0)
        assert nl.F0 <= float(nl.F(0.0, s)) <= nl.alpha
