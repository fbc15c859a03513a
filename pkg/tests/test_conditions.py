import math

import numpy as np
import pytest

from phiperiodic.conditions import (CONSTANT_CORRECTED, LITERAL, Branch, branch_of,
                                    check_cor1, check_cor2, check_cor2_variants,
                                    classify_alternative, default_scan)
from phiperiodic.errors import MissingK
from phiperiodic.grid import PeriodicPath
from phiperiodic.optimize import minimize_over_W
from phiperiodic.problem import (ProblemSpec, builtin_relativistic, cosine_forcing, preset,
                                 strong_resonance, zero_forcing)

from conftest import grid_for

EPS = 0.05


@pytest.fixture(scope="module")
def attractive_alt():
    spec = preset("strong-resonance-attractive")
    g = grid_for(spec)
    return spec, g, classify_alternative(spec, g)


@pytest.fixture(scope="module")
def repulsive_alt():
    spec = preset("strong-resonance-repulsive")
    g = grid_for(spec)
    return spec, g, classify_alternative(spec, g)


def test_branch_thresholds():
    assert branch_of(-1.0, 1e-7) is Branch.MINIMUM
    assert branch_of(1.0, 1e-7) is Branch.MOUNTAIN_PASS
    assert branch_of(0.0, 1e-7) is Branch.BORDERLINE


def test_no_nonlinearity_is_borderline(forced_spec):
    alt = classify_alternative(forced_spec, grid_for(forced_spec, 64))
    assert alt.beta == alt.m and alt.gap == 0.0
    assert alt.branch is Branch.BORDERLINE


def test_attractive_is_minimum(attractive_alt):
    spec, g, alt = attractive_alt
    assert alt.branch is Branch.MINIMUM
    assert alt.beta <= alt.m + alt.alphaT


def test_repulsive_is_mountain_pass(repulsive_alt):
    spec, g, alt = repulsive_alt
    assert alt.branch is Branch.MOUNTAIN_PASS
    # small-forcing approximation m ~ -1/2 int H^2 = -eps^2 T / (4 omega^2)
    approx = -EPS ** 2 * spec.T / (4 * 0.25 ** 2)
    assert alt.m == pytest.approx(approx, rel=0.05)


def test_cor1_zero_nonlinearity(forced_spec):
    g = grid_for(forced_spec, 64)
    w, _ = minimize_over_W(forced_spec, g)
    rep = check_cor1(forced_spec, g, w.path)
    assert rep.lhs == 0.0 == rep.rhs and rep.holds


def test_cor1_attractive(attractive_alt):
    spec, g, alt = attractive_alt
    rep = check_cor1(spec, g, alt.w_tilde.path)
    assert rep.holds
    assert abs(rep.witnesses["v0"]) <= 0.1


def test_cor1_repulsive_fails(repulsive_alt):
    spec, g, alt = repulsive_alt
    assert not check_cor1(spec, g, alt.w_tilde.path).holds


def test_cor1_implies_not_mountain_pass(attractive_alt):
    spec, g, alt = attractive_alt
    if check_cor1(spec, g, alt.w_tilde.path).holds:
        assert alt.branch in (Branch.MINIMUM, Branch.BORDERLINE)


def test_cor2_boundary_case():
    spec = ProblemSpec(2 * math.pi, builtin_relativistic(), strong_resonance(-1.0),
                       zero_forcing())
    rep = check_cor2(spec, grid_for(spec, 32), m=0.0)
    assert rep.lhs == rep.rhs == -spec.T
    assert not rep.holds


def test_cor2_repulsive_long_period(repulsive_alt):
    spec, g, alt = repulsive_alt
    T = spec.T
    lit = check_cor2(spec, g, alt.m, LITERAL)
    assert lit.lhs == pytest.approx(-T - T * EPS ** 2, rel=1e-12)
    assert lit.holds
    cor = check_cor2(spec, g, alt.m, CONSTANT_CORRECTED)
    assert cor.lhs == pytest.approx(-T - (T / (2 * math.pi)) ** 2 * T * EPS ** 2, rel=1e-12)
    # the sharp constant makes the bound too weak to decide this instance
    assert not cor.holds
    both = check_cor2_variants(spec, g, alt.m)
    assert set(both) == {LITERAL, CONSTANT_CORRECTED}


def test_cor2_period_two_pi_fails():
    spec = preset("strong-resonance-repulsive", T=2 * math.pi, forcing=cosine_forcing(EPS))
    g = grid_for(spec)
    _, m = minimize_over_W(spec, g)
    assert m == pytest.approx(-EPS ** 2 * spec.T / 4, rel=0.05)
    assert not check_cor2(spec, g, m, LITERAL).holds


@pytest.mark.parametrize("T,eps", [(2 * math.pi, 0.05), (math.pi, 0.3), (2 * math.pi, 0.8)])
def test_cor2_implies_mountain_pass(T, eps):
    spec = preset("strong-resonance-repulsive", T=T, forcing=cosine_forcing(eps, 2 * math.pi / T))
    g = grid_for(spec, 128)
    alt = classify_alternative(spec, g)
    variants = check_cor2_variants(spec, g, alt.m)
    for variant, rep in variants.items():
        if rep.holds and (variant == CONSTANT_CORRECTED or T <= 2 * math.pi):
            assert alt.branch is Branch.MOUNTAIN_PASS
    # the corrected left-hand side is a lower bound for beta on every instance
    assert alt.beta >= variants[CONSTANT_CORRECTED].lhs


def test_missing_k():
    pm = builtin_relativistic()
    no_k = type(pm)(**{**pm.__dict__, "k": None})
    spec = ProblemSpec(2 * math.pi, no_k, strong_resonance(-1.0), zero_forcing())
    with pytest.raises(MissingK):
        check_cor2(spec, grid_for(spec, 32), 0.0)
    assert "unavailable" in check_cor2_variants(spec, grid_for(spec, 32), 0.0)


def test_default_scan_covers_range():
    s = default_scan()
    assert s.min() == -1e4 and s.max() == 1e4 and 0.0 in s
    assert np.all(np.diff(s) > 0)


def test_reports_deterministic(repulsive_alt):
    spec, g, alt = repulsive_alt
    a = check_cor1(spec, g, alt.w_tilde.path).to_dict()
    b = check_cor1(spec, g, alt.w_tilde.path).to_dict()
    assert a == b
