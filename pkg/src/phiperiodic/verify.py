"""Certificates for candidate solutions.

Two independent checks are made on a discrete path u:

* the Euler-Lagrange defect (phi(d_i) - phi(d_{i-1}))/dt - f(t_i, u_i) - h(t_i),
  which vanishes identically at an interior stationary point of the
  discrete energy;
* the critical-point inequality J(v) - J(u) + <F'(u), v - u> >= 0, tested
  on a set of probe paths v in K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SingularEvaluation
from .functional import Energy
from .grid import (DEFAULT_MARGIN, PeriodicGrid, PeriodicPath, _check, project_vector,
                   random_tilde)
from .problem import ProblemSpec


@dataclass
class SolutionReport:
    el_residual_inf: float
    el_residual_l2: float
    velocity_margin: float
    ci_worst: float
    el_tol: float
    ci_tol: float
    probes: int

    @property
    def verdict(self) -> bool:
        return (self.velocity_margin > 0 and self.el_residual_inf <= self.el_tol
                and self.ci_worst >= -self.ci_tol)

    def to_dict(self) -> dict:
        return {
            "el_residual_inf": self.el_residual_inf,
            "el_residual_l2": self.el_residual_l2,
            "velocity_margin": self.velocity_margin,
            "ci_worst": "+inf" if math.isinf(self.ci_worst) else self.ci_worst,
            "el_tol": self.el_tol,
            "ci_tol": self.ci_tol,
            "probes": self.probes,
            "verdict": "pass" if self.verdict else "fail",
        }


def el_defect(spec: ProblemSpec, grid: PeriodicGrid, path: PeriodicPath) -> np.ndarray:
    _check(path, grid)
    a = spec.phi_model.a
    if np.any(np.abs(path.d) >= a):
        raise SingularEvaluation("velocity reaches the singular bound a")
    E = Energy(spec, grid)
    u = E.nodes(path.to_vector())
    p = spec.phi_model.phi(path.d)
    return (p - np.roll(p, 1)) / grid.dt - spec.nonlinearity.f(E.t, u) - E.h


def el_residual(spec: ProblemSpec, grid: PeriodicGrid, path: PeriodicPath):
    """Sup norm and L2 norm of the discrete Euler-Lagrange defect."""
    r = el_defect(spec, grid, path)
    return float(np.max(np.abs(r))), float(np.sqrt(np.sum(r * r) * grid.dt))


def _probe_set(E: Energy, x, probes: int, rng: np.random.Generator,
               w_tilde: Optional[PeriodicPath], margin: float) -> np.ndarray:
    grid = E.grid
    a = E.a
    n = x.size
    structured = [np.concatenate([[c], np.zeros(n - 1)]) for c in (1.0, -1.0)]
    for r in (1.0, -1.0):
        y = x.copy()
        y[0] += r
        structured.append(y)
    if w_tilde is not None:
        structured.append(w_tilde.to_vector())
    try:
        g = E.gradient(x)
        G = E.scaled_gradient(x)
        for s in np.logspace(-4, 1, 11):
            structured.append(x - s * G)
        for s in np.logspace(-2, 4, 13):
            structured.append(x - s * g)
    except SingularEvaluation:
        pass

    rand = []
    n_global = probes // 2
    scale = max(1.0, abs(x[0]))
    for _ in range(n_global):
        d = random_tilde(grid, rng, a, margin=margin)
        rand.append(np.concatenate([[x[0] + scale * rng.uniform(-2.0, 2.0)], d]))
    for _ in range(probes - n_global):
        delta = 10.0 ** rng.uniform(-6, 0)
        d = random_tilde(grid, rng, a, margin=margin, amplitude=1.0)
        step = np.concatenate([[rng.standard_normal()], d])
        rand.append(x + delta * step)
    V = np.array(structured + rand)
    return project_vector(V, a, margin)


def check_critical_inequality(spec: ProblemSpec, grid: PeriodicGrid, path: PeriodicPath,
                              probes: int = 1000, seed: int = 0,
                              w_tilde: Optional[PeriodicPath] = None,
                              margin: float = DEFAULT_MARGIN) -> float:
    """Smallest value of J(v) - J(u) + <F'(u), v - u> over the probe paths.

    ``probes`` random paths are drawn (half global, half small perturbations
    of u), on top of structured probes: the constants +-1, the translates
    u +- 1, ``w_tilde`` if given, and points along the negative gradient.
    Every probe is projected into K. With ``probes == 0`` the minimum is over
    an empty set and ``math.inf`` is returned.
    """
    _check(path, grid)
    if probes <= 0:
        return math.inf
    E = Energy(spec, grid, margin=margin)
    EJ = Energy(spec, grid, include_F=False, margin=margin)
    x = path.to_vector()
    rng = np.random.default_rng(seed)
    V = _probe_set(E, x, probes, rng, w_tilde, margin)
    u = E.nodes(x)
    fu = spec.nonlinearity.f(E.t, u)
    Jv = EJ.value(V)
    Ju = float(EJ.value(x))
    pairing = ((E.nodes(V) - u) @ fu) * grid.dt
    lhs = Jv - Ju + pairing
    return float(np.min(lhs))


def default_el_tol(spec: ProblemSpec, grid: PeriodicGrid) -> float:
    scale = spec.nonlinearity.C_bound + spec.forcing.sup_norm(spec.T)
    return max(1e-5, 10 * grid.dt * scale)


def verify_solution(spec: ProblemSpec, grid: PeriodicGrid, path: PeriodicPath,
                    probes: int = 1000, seed: int = 0,
                    w_tilde: Optional[PeriodicPath] = None,
                    el_tol: Optional[float] = None, ci_tol: float = 1e-8,
                    margin: float = DEFAULT_MARGIN) -> SolutionReport:
    velocity_margin = spec.phi_model.a - float(np.max(np.abs(path.d)))
    try:
        inf_norm, l2_norm = el_residual(spec, grid, path)
    except SingularEvaluation:
        inf_norm = l2_norm = math.inf
    worst = check_critical_inequality(spec, grid, path, probes, seed, w_tilde, margin)
    return SolutionReport(
        el_residual_inf=inf_norm, el_residual_l2=l2_norm, velocity_margin=velocity_margin,
        ci_worst=worst, el_tol=default_el_tol(spec, grid) if el_tol is None else el_tol,
        ci_tol=ci_tol, probes=probes)
