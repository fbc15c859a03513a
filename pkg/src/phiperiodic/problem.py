"""Problem instances, presets, and numeric checks of the standing hypotheses.

A problem is the periodic boundary value problem

    (phi(u'))' = f(t, u) + h(t),   u(0) = u(T),  u'(0) = u'(T),

where phi = Phi' is an increasing homeomorphism of (-a, a), f vanishes at
infinity with a primitive F that tends to a constant alpha, and h has zero
mean. All maps are vectorized: ``f(t, s)``, ``F(t, s)`` and ``h(t)`` must
broadcast over numpy arrays.

The hypotheses are asymptotic statements, so the checks here are finite-grid
consistency checks only: a passing report means "numerically consistent on
the sampled grid", nothing more.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import EvaluationError, ScanDivergence

Map = Callable[..., np.ndarray]


@dataclass(frozen=True)
class PhiModel:
    """The singular operator data.

    ``Phi`` is defined on [-a, a], ``phi`` on (-a, a), ``phi_inv`` on the
    whole line. ``k`` is a coefficient with ``Phi(s) >= k s^2`` when one is
    known. ``dphi`` (the derivative of phi) is optional; it is only used for
    Newton refinement and falls back to finite differences.
    """

    a: float
    Phi: Map
    phi: Map
    phi_inv: Map
    k: Optional[float] = None
    dphi: Optional[Map] = None
    name: str = "custom"

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if self.k is not None and self.k < 0:
            raise ValueError(f"k must be nonnegative, got {self.k}")

    def phi_prime(self, s):
        s = np.asarray(s, dtype=float)
        if self.dphi is not None:
            return self.dphi(s)
        eta = 1e-6 * self.a
        return (self.phi(s + eta) - self.phi(s - eta)) / (2 * eta)


def builtin_relativistic(a: float = 1.0) -> PhiModel:
    """The relativistic operator phi(s) = s / sqrt(1 - s^2) (scaled to (-a, a)).

    For ``a = 1``: Phi(s) = 1 - sqrt(1 - s^2), phi_inv(y) = y / sqrt(1 + y^2)
    and k = 1/4. For general ``a`` the operator is rescaled so that
    Phi(s) = a (1 - sqrt(1 - (s/a)^2)), which keeps Phi' = phi and gives
    k = 1/(4a).
    """

    def Phi(s):
        x2 = (np.asarray(s, dtype=float) / a) ** 2
        # written as x^2/(1+sqrt(1-x^2)) to avoid cancellation near 0
        return a * x2 / (1.0 + np.sqrt(1.0 - x2))

    def phi(s):
        x = np.asarray(s, dtype=float) / a
        return x / np.sqrt(1.0 - x * x)

    def phi_inv(y):
        y = np.asarray(y, dtype=float)
        return a * y / np.sqrt(1.0 + y * y)

    def dphi(s):
        x = np.asarray(s, dtype=float) / a
        return (1.0 - x * x) ** -1.5 / a

    return PhiModel(a=a, Phi=Phi, phi=phi, phi_inv=phi_inv, k=0.25 / a, dphi=dphi,
                    name="relativistic")


def primitive_by_quadrature(f: Map, n_gauss: int = 20) -> Map:
    """Build F(t, s) = int_0^s f(t, r) dr by composite Gauss-Legendre.

    Panels are geometric in |s| (edges 0, 1/8, 1/4, ..., 2^20, inf), so the
    near field is resolved finely while the flat tails cost little.
    """
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    edges = np.concatenate([[0.0], 2.0 ** np.arange(-3, 21), [np.inf]])

    def F(t, s):
        t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
        sign = np.sign(s)
        mag = np.abs(s)
        total = np.zeros(s.shape)
        for lo, hi in zip(edges[:-1], edges[1:]):
            if not np.any(mag > lo):
                break
            b = np.clip(mag, lo, hi)
            half = 0.5 * (b - lo)
            nodes = (lo + half)[..., None] + half[..., None] * x
            vals = f(t[..., None], sign[..., None] * nodes)
            total += sign * half * (vals @ w)
        return total

    return F


def _s_samples(s_max: float, n_near: int = 4001, n_far: int = 400) -> np.ndarray:
    near_edge = min(50.0, s_max)
    near = np.linspace(-near_edge, near_edge, n_near)
    if s_max <= near_edge:
        return near
    far = np.geomspace(near_edge, s_max, n_far)
    return np.unique(np.concatenate([-far, near, far]))


def _finite_or_raise(values, what: str):
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise EvaluationError(f"{what} returned a non-finite value at a sample point")
    return values


@dataclass(frozen=True)
class ScanConfig:
    """Sampling used to estimate alpha and F0."""

    T: float = 2 * math.pi
    n_t: int = 33
    s_max: float = 1e4
    tail_tol: float = 1e-3


@dataclass(frozen=True)
class Nonlinearity:
    """f, its primitive F (with F(t, 0) = 0), and the derived constants.

    ``alpha`` is the common limit of F at both infinities (``None`` when the
    nonlinearity has no such limit, e.g. the classical pendulum). ``C_bound``
    bounds |f| + |F|; ``F0`` is the infimum of F.
    """

    f: Map
    F: Map
    alpha: Optional[float]
    C_bound: float
    F0: float
    df: Optional[Map] = None
    name: str = "custom"

    def f_prime(self, t, s):
        """Partial derivative of f in s (closed form if known, else central difference)."""
        s = np.asarray(s, dtype=float)
        if self.df is not None:
            return self.df(t, s)
        eta = 1e-6 * np.maximum(1.0, np.abs(s))
        return (self.f(t, s + eta) - self.f(t, s - eta)) / (2 * eta)

    @classmethod
    def from_maps(cls, f: Map, F: Optional[Map] = None, alpha: Optional[float] = None,
                  T: float = 2 * math.pi, df: Optional[Map] = None,
                  name: str = "custom", estimate_alpha: bool = True) -> "Nonlinearity":
        """Assemble a nonlinearity, estimating the constants that are not given."""
        if F is None:
            F = primitive_by_quadrature(f)
        t = np.linspace(0.0, T, 33)[:, None]
        s = _s_samples(1e4)[None, :]
        fv = _finite_or_raise(f(t, s), "f")
        Fv = _finite_or_raise(F(t, s), "F")
        C_bound = float(np.max(np.abs(fv) + np.abs(Fv)))
        F0 = float(np.min(Fv))
        if alpha is None and estimate_alpha:
            tmp = cls(f=f, F=F, alpha=None, C_bound=C_bound, F0=F0, df=df, name=name)
            try:
                alpha, _ = estimate_alpha_F0(tmp, ScanConfig(T=T))
            except ScanDivergence:
                alpha = None
        return cls(f=f, F=F, alpha=alpha, C_bound=C_bound, F0=F0, df=df, name=name)


@dataclass(frozen=True)
class Forcing:
    """Forcing term h and its primitive H(t) = int_0^t h."""

    h: Map
    H: Map
    name: str = "custom"

    @classmethod
    def from_h(cls, h: Map, name: str = "custom") -> "Forcing":
        def H(t):
            t = np.asarray(t, dtype=float)
            flat = [integrate.quad(lambda r: float(h(r)), 0.0, float(ti), limit=200)[0]
                    for ti in t.ravel()]
            return np.asarray(flat).reshape(t.shape)

        return cls(h=h, H=H, name=name)

    def sup_norm(self, T: float, n: int = 8192) -> float:
        t = np.linspace(0.0, T, n + 1)
        return float(np.max(np.abs(self.h(t))))


def zero_forcing() -> Forcing:
    return Forcing(h=lambda t: np.zeros(np.shape(t)), H=lambda t: np.zeros(np.shape(t)),
                   name="0")


def sine_forcing(eps: float, omega: float = 1.0) -> Forcing:
    """h(t) = eps sin(omega t)."""
    return Forcing(
        h=lambda t: eps * np.sin(omega * np.asarray(t, dtype=float)),
        H=lambda t: eps / omega * (1.0 - np.cos(omega * np.asarray(t, dtype=float))),
        name=f"{eps}*sin({omega}*t)",
    )


def cosine_forcing(eps: float, omega: float = 1.0) -> Forcing:
    """h(t) = eps cos(omega t)."""
    return Forcing(
        h=lambda t: eps * np.cos(omega * np.asarray(t, dtype=float)),
        H=lambda t: eps / omega * np.sin(omega * np.asarray(t, dtype=float)),
        name=f"{eps}*cos({omega}*t)",
    )


@dataclass(frozen=True)
class ProblemSpec:
    T: float
    phi_model: PhiModel
    nonlinearity: Nonlinearity
    forcing: Forcing
    name: str = "custom"

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"period T must be positive, got {self.T}")


# --- presets -----------------------------------------------------------------

def zero_nonlinearity() -> Nonlinearity:
    zero = lambda t, s: np.zeros(np.broadcast(np.asarray(t), np.asarray(s)).shape)
    return Nonlinearity(f=zero, F=zero, alpha=0.0, C_bound=0.0, F0=0.0, df=zero, name="0")


def _bound_of(f: Map, F: Map) -> float:
    s = _s_samples(1e4)
    return float(np.max(np.abs(f(0.0, s)) + np.abs(F(0.0, s))))


def strong_resonance(sign: float = 1.0) -> Nonlinearity:
    """f(s) = sign * 2s/(1+s^2)^2 with F(s) = sign * s^2/(1+s^2).

    ``sign = +1`` is the attractive case (s f(s) >= 0, alpha = 1, F0 = 0);
    ``sign = -1`` the repulsive one (alpha = -1 = F0).
    """
    f = lambda t, s: sign * 2.0 * s / (1.0 + s * s) ** 2 + 0.0 * t
    F = lambda t, s: sign * s * s / (1.0 + s * s) + 0.0 * t
    df = lambda t, s: sign * (2.0 - 6.0 * s * s) / (1.0 + s * s) ** 3 + 0.0 * t
    name = "strong-resonance-attractive" if sign > 0 else "strong-resonance-repulsive"
    return Nonlinearity(f=f, F=F, alpha=float(sign), C_bound=_bound_of(f, F),
                        F0=min(0.0, float(sign)), df=df, name=name)


def pendulum_nonlinearity(A: float = 1.0) -> Nonlinearity:
    """f(s) = A sin(s), F(s) = A (1 - cos s). F has no limit at infinity."""
    f = lambda t, s: A * np.sin(s) + 0.0 * t
    F = lambda t, s: A * (1.0 - np.cos(s)) + 0.0 * t
    df = lambda t, s: A * np.cos(s) + 0.0 * t
    return Nonlinearity(f=f, F=F, alpha=None, C_bound=_bound_of(f, F),
                        F0=min(0.0, 2.0 * A), df=df, name="pendulum")


PRESETS = ("relativistic-pendulum-classic-f", "strong-resonance-attractive",
           "strong-resonance-repulsive")


def preset(name: str, T: Optional[float] = None, forcing: Optional[Forcing] = None,
           A: float = 1.0, a: float = 1.0) -> ProblemSpec:
    """Named problem instance with its default period and forcing.

    ============================== =========== =====================
    name                           default T   default h
    ============================== =========== =====================
    relativistic-pendulum-classic-f 2 pi       0.1 sin(t)
    strong-resonance-attractive    2 pi        0.1 sin(t)
    strong-resonance-repulsive     8 pi        0.05 cos(t/4)
    ============================== =========== =====================
    """
    phi_model = builtin_relativistic(a)
    if name == "relativistic-pendulum-classic-f":
        nl, T0, h0 = pendulum_nonlinearity(A), 2 * math.pi, sine_forcing(0.1)
    elif name == "strong-resonance-attractive":
        nl, T0, h0 = strong_resonance(+1.0), 2 * math.pi, sine_forcing(0.1)
    elif name == "strong-resonance-repulsive":
        nl, T0, h0 = strong_resonance(-1.0), 8 * math.pi, cosine_forcing(0.05, 0.25)
    else:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return ProblemSpec(T=T0 if T is None else T, phi_model=phi_model, nonlinearity=nl,
                       forcing=h0 if forcing is None else forcing, name=name)


# --- hypothesis checks -------------------------------------------------------

@dataclass(frozen=True)
class ValidationConfig:
    n_t: int = 33
    n_phi: int = 2001
    s_max: float = 1e4
    tail_radii: tuple = (1e2, 1e3, 1e4)
    tail_tol: float = 1e-3
    zero_mean_tol: float = 1e-10
    inverse_tol: float = 1e-10
    bound_slack: float = 1e-9


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    violation: float
    detail: str = ""


@dataclass
class HypothesisReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def get(self, name: str) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "status": "numerically consistent" if self.passed else "violated on sample grid",
            "checks": {c.name: {"passed": c.passed, "violation": c.violation, "detail": c.detail}
                       for c in self.checks},
        }


def _check_phi(pm: PhiModel, cfg: ValidationConfig) -> HypothesisCheck:
    a = pm.a
    s_open = np.linspace(-a, a, cfg.n_phi)[1:-1]
    s_closed = np.linspace(-a, a, cfg.n_phi)
    phi_vals = _finite_or_raise(pm.phi(s_open), "phi")
    Phi_vals = _finite_or_raise(pm.Phi(s_closed), "Phi")
    problems = []
    worst = 0.0
    origin = max(abs(float(pm.phi(0.0))), abs(float(pm.Phi(0.0))))
    if origin > 0:
        problems.append("phi(0) or Phi(0) nonzero")
        worst = max(worst, origin)
    steps = np.diff(phi_vals)
    if np.any(steps <= 0):
        problems.append("phi not strictly increasing")
        worst = max(worst, float(-steps.min()))
    s_inv = np.linspace(-0.999 * a, 0.999 * a, cfg.n_phi)
    inv_err = float(np.max(np.abs(_finite_or_raise(pm.phi_inv(pm.phi(s_inv)), "phi_inv") - s_inv)))
    if inv_err > cfg.inverse_tol:
        problems.append(f"phi_inv(phi(s)) error {inv_err:.3g}")
        worst = max(worst, inv_err)
    if pm.k is not None:
        gap = float(np.max(pm.k * s_closed ** 2 - Phi_vals))
        if gap > cfg.bound_slack:
            problems.append(f"Phi(s) < k s^2 by {gap:.3g}")
            worst = max(worst, gap)
    return HypothesisCheck("H_Phi", not problems, worst, "; ".join(problems) or "ok")


def _check_f(spec: ProblemSpec, cfg: ValidationConfig) -> HypothesisCheck:
    nl = spec.nonlinearity
    t = np.linspace(0.0, spec.T, cfg.n_t)[:, None]
    s = _s_samples(cfg.s_max)[None, :]
    fv = _finite_or_raise(nl.f(t, s), "f")
    Fv = _finite_or_raise(nl.F(t, s), "F")
    problems = []
    worst = 0.0
    F_at_0 = float(np.max(np.abs(nl.F(t[:, 0], 0.0))))
    if F_at_0 > 1e-12:
        problems.append(f"F(t,0) != 0 (|F| = {F_at_0:.3g})")
        worst = max(worst, F_at_0)
    excess = float(np.max(np.abs(fv) + np.abs(Fv)) - nl.C_bound)
    if excess > cfg.bound_slack * max(1.0, nl.C_bound):
        problems.append(f"|f|+|F| exceeds C_bound by {excess:.3g}")
        worst = max(worst, excess)
    below = float(nl.F0 - np.min(Fv))
    if below > cfg.bound_slack * max(1.0, abs(nl.F0)):
        problems.append(f"F dips below F0 by {below:.3g}")
        worst = max(worst, below)

    alpha = nl.alpha
    if alpha is None:
        try:
            alpha, _ = estimate_alpha_F0(nl, ScanConfig(T=spec.T, n_t=cfg.n_t,
                                                        s_max=max(cfg.tail_radii),
                                                        tail_tol=cfg.tail_tol))
        except ScanDivergence as exc:
            problems.append(str(exc))
            return HypothesisCheck("H_f", False, max(worst, math.inf), "; ".join(problems))
    tails = []
    for S in cfg.tail_radii:
        pm = np.array([S, -S])[None, :]
        f_tail = float(np.max(np.abs(_finite_or_raise(nl.f(t, pm), "f"))))
        F_tail = float(np.max(np.abs(_finite_or_raise(nl.F(t, pm), "F") - alpha)))
        tails.append(max(f_tail, F_tail))
    for prev, cur in zip(tails, tails[1:]):
        if cur > prev * (1 + 1e-9) + 1e-15:
            problems.append(f"tails not decreasing: {', '.join(f'{x:.3g}' for x in tails)}")
            worst = max(worst, cur - prev)
            break
    if tails[-1] > cfg.tail_tol:
        problems.append(f"tail {tails[-1]:.3g} above tolerance {cfg.tail_tol:g}")
        worst = max(worst, tails[-1])
    return HypothesisCheck("H_f", not problems, worst, "; ".join(problems) or "ok")


def _check_h(spec: ProblemSpec, cfg: ValidationConfig) -> HypothesisCheck:
    h = spec.forcing.h
    T = spec.T
    _finite_or_raise(h(np.linspace(0.0, T, 1025)), "h")
    with warnings.catch_warnings():
        # roundoff warnings are expected when the integral is exactly zero
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        total = integrate.quad(lambda r: float(h(r)), 0.0, T, limit=400, epsabs=1e-14,
                               epsrel=1e-13)[0]
    H_end = float(np.max(np.abs(spec.forcing.H(np.array([0.0, T])))))
    worst = max(abs(total), H_end)
    ok = worst <= cfg.zero_mean_tol * max(1.0, T)
    detail = "ok" if ok else f"integral of h = {total:.6g}"
    return HypothesisCheck("H_h", ok, abs(total) if not ok else worst, detail)


def validate_hypotheses(spec: ProblemSpec, cfg: ValidationConfig = ValidationConfig()
                        ) -> HypothesisReport:
    """Check (H_Phi), (H_f), (H_h) on sample grids.

    Raises
    ------
    EvaluationError
        If a user-supplied map returns a non-finite value at a sample point.
    """
    return HypothesisReport([
        _check_phi(spec.phi_model, cfg),
        _check_f(spec, cfg),
        _check_h(spec, cfg),
    ])


def estimate_alpha_F0(nl: Nonlinearity, cfg: ScanConfig = ScanConfig()):
    """Estimate the limit alpha of F at infinity and the infimum F0.

    Returns
    -------
    alpha_hat, F0_hat : float
        ``alpha_hat`` is the mean of F(t, +-s_max) over sampled t and both
        signs; ``F0_hat`` the minimum of F over [0, T] x [-s_max, s_max].

    Raises
    ------
    ScanDivergence
        If the mean values at the two tails differ by more than ``tail_tol``,
        or F strays from alpha_hat by more than ``tail_tol`` on
        s_max/2 <= |s| <= s_max.
    """
    t = np.linspace(0.0, cfg.T, cfg.n_t)[:, None]
    plus = _finite_or_raise(nl.F(t, cfg.s_max), "F")
    minus = _finite_or_raise(nl.F(t, -cfg.s_max), "F")
    if abs(float(np.mean(plus)) - float(np.mean(minus))) > cfg.tail_tol:
        raise ScanDivergence(
            f"F(+S) ~ {np.mean(plus):.6g} but F(-S) ~ {np.mean(minus):.6g} at S = {cfg.s_max:g}"
        )
    alpha_hat = float(np.mean(np.concatenate([np.ravel(plus), np.ravel(minus)])))
    # F must also settle on the far field, not just agree at the two radii
    far = np.linspace(0.5 * cfg.s_max, cfg.s_max, 257)
    far = np.concatenate([-far, far])[None, :]
    spread = float(np.max(np.abs(_finite_or_raise(nl.F(t, far), "F") - alpha_hat)))
    if spread > cfg.tail_tol:
        raise ScanDivergence(
            f"F varies by {spread:.3g} on {cfg.s_max / 2:g} <= |s| <= {cfg.s_max:g}; "
            f"no limit at infinity")
    s = _s_samples(cfg.s_max)[None, :]
    F0_hat = float(np.min(_finite_or_raise(nl.F(t, s), "F")))
    return alpha_hat, F0_hat
