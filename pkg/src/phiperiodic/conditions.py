"""Which branch applies: minimum or mountain pass.

With m = min_W J (attained at w) and beta = min_W I, the energy satisfies
the Palais-Smale condition at every level except m + alpha T. If beta is at
or below that level a global minimizer exists; if beta is strictly above it
a mountain-pass critical point exists. The two sufficient conditions checked
here are

* ``check_cor1``: int F(t, w + v0) dt <= alpha T for some constant v0
  (implies the minimum branch);
* ``check_cor2``: F0 T - T |h|_inf^2 / (4k) > m + alpha T when
  Phi(s) >= k s^2 (implies the mountain-pass branch).

The second bound goes through a Poincare-Wirtinger step. With the sharp
constant for zero-mean T-periodic functions, int v^2 <= (T/2pi)^2 int v'^2,
the bound becomes F0 T - (T/2pi)^2 T |h|_inf^2 / (4k); without the constant
(which is only valid for T <= 2pi) it is the first expression. Both are
reported and labelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import MissingK
from .functional import Energy
from .grid import PeriodicGrid, PeriodicPath
from .optimize import DescentOptions, MinimizeResult, minimize_over_W
from .problem import ProblemSpec, ScanConfig, estimate_alpha_F0

LITERAL = "paper-literal"
CONSTANT_CORRECTED = "constant-corrected"


class Branch(str, Enum):
    MINIMUM = "Minimum"
    MOUNTAIN_PASS = "MountainPass"
    BORDERLINE = "Borderline"


@dataclass
class AlternativeReport:
    m: float
    alphaT: float
    beta: float
    branch: Branch
    gap: float
    tol_border: float
    w_tilde: Optional[MinimizeResult] = field(default=None, repr=False)
    z_tilde: Optional[MinimizeResult] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {"m": self.m, "alphaT": self.alphaT, "beta": self.beta,
               "branch": self.branch.value, "gap": self.gap, "tol_border": self.tol_border}
        if self.w_tilde is not None:
            out["w_tilde"] = self.w_tilde.to_dict()
        if self.z_tilde is not None:
            out["z_tilde"] = self.z_tilde.to_dict()
        return out


@dataclass
class CorollaryReport:
    holds: bool
    lhs: float
    rhs: float
    witnesses: dict
    pw_variant: Optional[str] = None
    verdict: str = ""

    def to_dict(self) -> dict:
        return {"holds": self.holds, "lhs": self.lhs, "rhs": self.rhs,
                "witnesses": self.witnesses, "pw_variant": self.pw_variant,
                "verdict": self.verdict}


def resolve_alpha(spec: ProblemSpec) -> float:
    if spec.nonlinearity.alpha is not None:
        return spec.nonlinearity.alpha
    alpha, _ = estimate_alpha_F0(spec.nonlinearity, ScanConfig(T=spec.T))
    return alpha


def branch_of(gap: float, tol_border: float) -> Branch:
    if gap <= -tol_border:
        return Branch.MINIMUM
    if gap >= tol_border:
        return Branch.MOUNTAIN_PASS
    return Branch.BORDERLINE


def classify_alternative(spec: ProblemSpec, grid: PeriodicGrid,
                         opts: DescentOptions = DescentOptions(),
                         tol_border: float = 1e-7) -> AlternativeReport:
    """Compute m, beta and alpha T and decide the branch.

    Raises ScanDivergence when alpha is not given and the tails of F
    disagree.
    """
    alphaT = resolve_alpha(spec) * spec.T
    w_res, m = minimize_over_W(spec, grid, opts, objective="J")
    z_res, beta = minimize_over_W(spec, grid, opts, objective="I")
    gap = beta - (m + alphaT)
    return AlternativeReport(m=m, alphaT=alphaT, beta=beta, branch=branch_of(gap, tol_border),
                             gap=gap, tol_border=tol_border, w_tilde=w_res, z_tilde=z_res)


def default_scan() -> np.ndarray:
    tails = np.logspace(-3, 4, 281)
    return np.unique(np.concatenate([-tails, np.linspace(-10.0, 10.0, 2001), [0.0], tails]))


def _section_F(spec, grid, w_tilde: PeriodicPath, v0) -> np.ndarray:
    E = Energy(spec, grid)
    u = E.nodes(w_tilde.to_vector())
    v0 = np.asarray(v0, dtype=float)
    return spec.nonlinearity.F(E.t, u[None, :] + v0[:, None]).sum(axis=1) * grid.dt


def check_cor1(spec: ProblemSpec, grid: PeriodicGrid, w_tilde: PeriodicPath,
               scan=None) -> CorollaryReport:
    """Look for a constant v0 with sum_i F(t_i, w_i + v0) dt <= alpha T.

    The scan is refined once around its best point.
    """
    scan = default_scan() if scan is None else np.sort(np.asarray(scan, dtype=float))
    vals = _section_F(spec, grid, w_tilde, scan)
    i = int(np.argmin(vals))
    lo = scan[max(i - 1, 0)]
    hi = scan[min(i + 1, scan.size - 1)]
    if hi > lo:
        fine = np.linspace(lo, hi, 401)
        fine_vals = _section_F(spec, grid, w_tilde, fine)
        j = int(np.argmin(fine_vals))
        if fine_vals[j] < vals[i]:
            best_v, lhs = float(fine[j]), float(fine_vals[j])
        else:
            best_v, lhs = float(scan[i]), float(vals[i])
    else:
        best_v, lhs = float(scan[i]), float(vals[i])
    rhs = resolve_alpha(spec) * spec.T
    holds = lhs <= rhs
    return CorollaryReport(holds=holds, lhs=lhs, rhs=rhs, witnesses={"v0": best_v},
                           verdict="minimum guaranteed" if holds else "inconclusive")


def check_cor2(spec: ProblemSpec, grid: PeriodicGrid, m: float,
               variant: str = LITERAL) -> CorollaryReport:
    """Mountain-pass sufficient condition F0 T - C T |h|^2/(4k) > m + alpha T.

    C = 1 for the literal variant and C = (T/2pi)^2 for the
    constant-corrected one. The bound comes from minimizing the quadratic
    p(s) = k s^2 - sqrt(T C) |h|_inf s + F0 T over s >= 0 (vertex at
    s* = sqrt(T C) |h|_inf / (2k)).

    Raises
    ------
    MissingK
        If the operator has no known coefficient k.
    """
    k = spec.phi_model.k
    if k is None:
        raise MissingK("k unavailable: the Phi(s) >= k s^2 condition cannot be checked")
    if k <= 0:
        raise MissingK("k must be positive for the quadratic bound")
    if variant == LITERAL:
        pw = 1.0
    elif variant == CONSTANT_CORRECTED:
        pw = (spec.T / (2 * math.pi)) ** 2
    else:
        raise ValueError(f"unknown Poincare-Wirtinger variant {variant!r}")
    T = spec.T
    F0 = spec.nonlinearity.F0
    h_sup = spec.forcing.sup_norm(T)
    lhs = F0 * T - pw * T * h_sup ** 2 / (4 * k)
    rhs = m + resolve_alpha(spec) * T
    holds = lhs > rhs
    s_star = math.sqrt(T * pw) * h_sup / (2 * k)
    return CorollaryReport(
        holds=holds, lhs=lhs, rhs=rhs,
        witnesses={"F0": F0, "k": k, "h_sup": h_sup, "pw_constant": pw, "s_star": s_star},
        pw_variant=variant,
        verdict="mountain pass guaranteed" if holds else "inconclusive")


def check_cor2_variants(spec: ProblemSpec, grid: PeriodicGrid, m: float) -> dict:
    """Both variants side by side (``{"k unavailable": ...}`` when k is absent)."""
    try:
        return {v: check_cor2(spec, grid, m, v) for v in (LITERAL, CONSTANT_CORRECTED)}
    except MissingK as exc:
        return {"unavailable": str(exc)}
