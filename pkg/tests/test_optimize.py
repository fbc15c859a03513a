import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from phiperiodic.functional import Energy, eval_I
from phiperiodic.grid import PeriodicGrid, PeriodicPath, in_K, node_values
from phiperiodic.optimize import (DescentOptions, minimize_over_K, minimize_over_W,
                                  projected_residual, scan_mean_section, tolerance_schedule)
from phiperiodic.problem import (ProblemSpec, builtin_relativistic, cosine_forcing, preset,
                                 zero_forcing, zero_nonlinearity)

from conftest import grid_for

PM = builtin_relativistic()


def w_oracle(N, T=2 * math.pi, eps=0.5):
    """Minimizer of J over W for h = eps cos t, built by quadrature only.

    Integrating the Euler-Lagrange equation (phi(w'))' = h once gives
    w' = phi^-1(H + c); the constant c vanishes since H = eps sin t is odd
    about T/2. Slopes are sampled at cell midpoints, node values are the
    zero-mean primitive.
    """
    dt = T / N
    H = lambda t: eps * math.sin(t)
    slope = lambda t: float(PM.phi_inv(H(t)))
    mid = (np.arange(N) + 0.5) * dt
    d = np.array([slope(t) for t in mid])
    t = np.arange(N) * dt
    w = np.array([integrate.quad(slope, 0.0, ti)[0] for ti in t])
    mean = integrate.quad(lambda s: integrate.quad(slope, 0.0, s)[0], 0.0, T)[0] / T
    return d, w - mean


def test_schedule():
    assert tolerance_schedule(1e-2, 1e-3) == [1e-2, 5e-3, 2.5e-3, 1.25e-3, 1e-3]


def test_no_forcing_gives_zero(trivial_spec):
    g = grid_for(trivial_spec)
    res, m = minimize_over_W(trivial_spec, g)
    assert m == 0.0
    assert np.all(res.path.d == 0.0) and res.path.mean == 0.0


def test_w_tilde_matches_quadrature_oracle(forced_spec):
    g = grid_for(forced_spec)
    res, m = minimize_over_W(forced_spec, g)
    d_ref, w_ref = w_oracle(g.N)
    assert np.max(np.abs(res.path.d - d_ref)) <= 1e-4
    assert np.max(np.abs(node_values(res.path, g) - w_ref)) <= 1e-4
    # exact level from the oracle: m = -int (sqrt(1 + H^2) - 1)
    m_ref = -integrate.quad(lambda t: math.sqrt(1 + 0.25 * math.sin(t) ** 2) - 1, 0, 2 * math.pi)[0]
    assert m == pytest.approx(m_ref, abs=1e-4)


@settings(deadline=None, max_examples=8)
@given(st.floats(0.01, 1.0), st.floats(0.5, 3.0))
def test_m_nonpositive(eps, omega_int):
    omega = float(round(omega_int))
    spec = ProblemSpec(2 * math.pi, PM, zero_nonlinearity(), cosine_forcing(eps, omega))
    _, m = minimize_over_W(spec, PeriodicGrid(64, spec.T), DescentOptions(restarts=2))
    assert m <= 0.0


def test_W_minimum_independent_of_starts(forced_spec):
    g = grid_for(forced_spec, 64)
    values = [minimize_over_W(forced_spec, g, DescentOptions(seed=s, restarts=r))[1]
              for s, r in ((0, 0), (1, 3), (7, 5))]
    assert max(values) - min(values) <= 1e-8


def test_trivial_minimum_over_K(trivial_spec):
    g = grid_for(trivial_spec)
    res = minimize_over_K(trivial_spec, g)
    assert abs(res.value) <= 1e-10
    assert np.all(res.path.d == 0.0)


@pytest.fixture(scope="module")
def attractive_run():
    spec = preset("strong-resonance-attractive")
    g = grid_for(spec)
    w_res, m = minimize_over_W(spec, g)
    res = minimize_over_K(spec, g)
    return spec, g, w_res, m, res


class TestAttractive:
    @pytest.fixture
    def run(self, attractive_run):
        return attractive_run

    def test_value_below_critical_level(self, run):
        spec, g, w_res, m, res = run
        assert res.value <= m + spec.nonlinearity.alpha * spec.T
        assert res.converged and res.projected_grad_norm <= 1e-8

    def test_far_init(self, run):
        spec, g, w_res, m, res = run
        far = minimize_over_K(spec, g, init=PeriodicPath(1e3, np.zeros(g.N)))
        assert far.value == pytest.approx(res.value, abs=1e-6)

    def test_iterates_feasible_and_monotone(self, run):
        spec, g, w_res, m, res = run
        assert in_K(res.path, 1.0, 1e-6)
        values = [v for v, _ in res.ps_log]
        for a, b in zip(values, values[1:]):
            assert b <= a + 1e-13 * (1 + abs(a))
        assert res.ps_log[-1] == (res.value, res.projected_grad_norm)

    def test_section_plateau(self, run):
        spec, g, w_res, m, res = run
        level = m + spec.nonlinearity.alpha * spec.T
        for r, val in scan_mean_section(spec, g, w_res.path, [-1e4, 1e4]):
            assert abs(val - level) <= 1e-3

    def test_section_at_zero(self, run):
        spec, g, w_res, m, res = run
        [(r, val)] = scan_mean_section(spec, g, w_res.path, [0.0])
        assert val == eval_I(spec, g, w_res.path).I_value

    def test_residual_is_small_at_result(self, run):
        spec, g, w_res, m, res = run
        assert projected_residual(Energy(spec, g), res.path.to_vector()) <= 1e-8

    def test_to_dict(self, run):
        out = run[4].to_dict(max_log=4)
        assert out["objective"] == "I|K" and len(out["ps_log"]) <= 6


def test_section_flat_without_nonlinearity(forced_spec, rng):
    g = grid_for(forced_spec)
    res, _ = minimize_over_W(forced_spec, g)
    vals = [v for _, v in scan_mean_section(forced_spec, g, res.path, [-1e3, -1, 0, 2.5, 1e4])]
    assert max(vals) - min(vals) <= 1e-12


def test_options_validation():
    with pytest.raises(ValueError):
        DescentOptions(armijo_c=1.5)
    with pytest.raises(ValueError):
        DescentOptions(restarts=-1)
