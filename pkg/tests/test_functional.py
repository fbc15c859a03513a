import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phiperiodic.errors import SingularEvaluation
from phiperiodic.functional import Energy, eval_I, eval_J, grad_smooth
from phiperiodic.grid import PeriodicGrid, PeriodicPath, node_values, random_path
from phiperiodic.problem import (ProblemSpec, builtin_relativistic, preset, zero_forcing,
                                 zero_nonlinearity)

from conftest import PRESET_NAMES, grid_for


def central_gradient(E, x, eta=1e-6):
    n = x.size
    X = np.repeat(x[None, :], 2 * n, axis=0)
    idx = np.arange(n)
    X[2 * idx, idx] += eta
    X[2 * idx + 1, idx] -= eta
    v = E.value(X)
    return (v[0::2] - v[1::2]) / (2 * eta)


def test_trivial_constant_path(trivial_spec):
    g = grid_for(trivial_spec)
    out = eval_I(trivial_spec, g, PeriodicPath.constant(3.7, g.N))
    assert out.I_value == 0.0 and out.J_value == 0.0 and out.F_value == 0.0


def test_hand_value():
    # N = 8, T = 2, d = +-0.6: I = 8 * Phi(0.6) * dt = 8 * 0.2 * 0.25 = 0.4
    spec = ProblemSpec(2.0, builtin_relativistic(), zero_nonlinearity(), zero_forcing())
    g = PeriodicGrid(8, 2.0)
    out = eval_I(spec, g, PeriodicPath(0.0, np.tile([0.6, -0.6], 4)))
    assert out.I_value == pytest.approx(0.4, abs=1e-15)


def test_infinite_flag_outside_K(trivial_spec):
    g = grid_for(trivial_spec, 8)
    out = eval_I(trivial_spec, g, PeriodicPath(0.0, np.tile([1.5, -1.5], 4)))
    assert out.I_value is None and not out.in_K
    assert out.to_dict()["I"] == "+inf"
    assert eval_J(trivial_spec, g, PeriodicPath(0.0, np.tile([1.5, -1.5], 4))) is None


def test_infinite_exactly_off_K(rng):
    spec = preset("strong-resonance-attractive")
    g = grid_for(spec, 16)
    E = Energy(spec, g)
    for _ in range(200):
        d = rng.uniform(-1.3, 1.3, 16)
        d -= d.mean()
        x = np.concatenate([[rng.normal()], d])
        assert np.isinf(E.value(x)) == bool(np.any(np.abs(d) > 1.0))


def test_zero_gradient_at_trivial_minimum(trivial_spec):
    g = grid_for(trivial_spec)
    gv = grad_smooth(trivial_spec, g, PeriodicPath.constant(0.0, g.N))
    assert gv.d_mean == 0.0 and np.all(gv.d_d == 0.0)


def test_mean_gradient_is_integral_of_h(forced_spec, rng):
    g = grid_for(forced_spec)
    p = random_path(g, rng, 1.0)
    assert abs(grad_smooth(forced_spec, g, p).d_mean) <= 1e-13


def test_gradient_singular_near_bound(trivial_spec):
    g = grid_for(trivial_spec, 8)
    with pytest.raises(SingularEvaluation):
        grad_smooth(trivial_spec, g, PeriodicPath(0.0, np.tile([1.0, -1.0], 4)))


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_gradient_matches_differences(name, rng):
    spec = preset(name)
    g = grid_for(spec)
    E = Energy(spec, g)
    worst = 0.0
    for _ in range(20):
        x = random_path(g, rng, 1.0, mean_scale=2.0).to_vector()
        fd = central_gradient(E, x)
        an = E.gradient(x, reduce=False)
        worst = max(worst, np.linalg.norm(fd - an) / np.linalg.norm(an))
    assert worst <= 1e-6


def test_hessian_matches_gradient_differences(rng):
    spec = preset("strong-resonance-repulsive")
    g = grid_for(spec, 32)
    E = Energy(spec, g)
    x = random_path(g, rng, 1.0).to_vector()
    v = rng.standard_normal(x.size)
    eta = 1e-6
    fd = (E.gradient(x + eta * v, reduce=False) - E.gradient(x - eta * v, reduce=False)) / (2 * eta)
    np.testing.assert_allclose(E.hessian(x) @ v, fd, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_J_convex(name, rng):
    spec = preset(name)
    g = grid_for(spec)
    EJ = Energy(spec, g, include_F=False)
    worst = -np.inf
    for _ in range(100):
        p = random_path(g, rng, 1.0, mean_scale=3.0).to_vector()
        q = random_path(g, rng, 1.0, mean_scale=3.0).to_vector()
        for tau in (0.25, 0.5, 0.75):
            lhs = EJ.value((1 - tau) * p + tau * q)
            rhs = (1 - tau) * EJ.value(p) + tau * EJ.value(q)
            worst = max(worst, lhs - rhs)
    assert worst <= 1e-12


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_translation_identity(name, rng):
    spec = preset(name)
    g = grid_for(spec)
    for _ in range(10):
        p = random_path(g, rng, 1.0)
        base = eval_I(spec, g, p).I_value
        u = node_values(p, g)
        for r in (1.0, -1.0, 10.0, -10.0, 1e3, -1e3):
            moved = eval_I(spec, g, p.shifted(r)).I_value
            quad = np.sum(spec.nonlinearity.F(g.nodes, u + r) - spec.nonlinearity.F(g.nodes, u)) * g.dt
            assert abs((moved - base) - quad) <= 1e-12


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 0.999))
def test_zero_mean_paths_bounded_by_aT(seed, amp):
    spec = preset("strong-resonance-attractive")
    g = grid_for(spec, 64)
    rng = np.random.default_rng(seed)
    p = random_path(g, rng, 1.0, mean_scale=0.0, amplitude=amp)
    assert np.max(np.abs(node_values(p, g))) <= spec.phi_model.a * spec.T
