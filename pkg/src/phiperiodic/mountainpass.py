"""Mountain-pass search between the translates w - n1 and w + n1.

The level c = inf over paths gamma from A to B of max I(gamma) is
approximated by a string: a chain of P images with fixed endpoints that is
relaxed by projected descent steps and re-spaced to equal arc length after
every step. Once the family maximum settles, the highest image is pushed to
the saddle by climbing-image steps (the gradient component along the string
tangent is reversed) and finished with Newton steps on the stationarity
system.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize as sopt

from .errors import CollapseDetected, EndpointSearchFailure, PreconditionError
from .functional import Energy
from .grid import DEFAULT_MARGIN, PeriodicGrid, PeriodicPath, project_vector
from .optimize import newton_polish, projected_residual, scan_mean_section
from .problem import ProblemSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StringOptions:
    images: int = 33
    max_iters: int = 5000
    min_iters: int = 50
    step_init: float = 0.1
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    grad_tol: float = 1e-8
    value_tol: float = 1e-7
    patience: int = 25
    max_step: float = 1.0
    climb_iters: int = 20_000
    climb_tol: float = 1e-6
    margin: float = DEFAULT_MARGIN
    freeze_tilde: bool = False
    refine_images: bool = True

    def __post_init__(self):
        if self.images < 9:
            raise ValueError("a path family needs at least 9 images")


@dataclass
class PathFamily:
    images: list

    def to_array(self) -> np.ndarray:
        return np.array([p.to_vector() for p in self.images])

    @classmethod
    def from_array(cls, X) -> "PathFamily":
        return cls([PeriodicPath.from_vector(x) for x in X])


@dataclass
class MountainPassResult:
    c_hat: float
    saddle: PeriodicPath
    saddle_grad_norm: float
    endpoint_level: float
    barrier_gap: float
    family: PathFamily
    values: np.ndarray
    c_history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    saddle_index: int = 0

    def to_dict(self) -> dict:
        return {
            "c_hat": self.c_hat,
            "saddle_mean": self.saddle.mean,
            "saddle_grad_norm": self.saddle_grad_norm,
            "endpoint_level": self.endpoint_level,
            "barrier_gap": self.barrier_gap,
            "images": len(self.family.images),
            "saddle_index": self.saddle_index,
            "iterations": self.iterations,
            "converged": self.converged,
            "string_max_first": self.c_history[0] if self.c_history else None,
            "string_max_last": self.c_history[-1] if self.c_history else None,
        }


def select_endpoints(spec: ProblemSpec, grid: PeriodicGrid, w_tilde: PeriodicPath,
                     beta: float, margin: float = 0.5, n_max: float = 1e6):
    """Pick n1 with I(w_tilde +- n1) <= m + alpha T + eps1 < beta.

    ``margin`` sets eps1 = margin * (beta - (m + alpha T)) and must lie in
    (0, 1/2]. Candidates n = 1, 2, 4, ... are tried up to ``n_max``.

    Returns
    -------
    A, B : PeriodicPath
        w_tilde - n1 and w_tilde + n1.
    n1 : float

    Raises
    ------
    PreconditionError
        If beta <= m + alpha T (no gap above the critical level).
    EndpointSearchFailure
        If no n <= n_max qualifies.
    """
    if not 0 < margin <= 0.5:
        raise ValueError("margin must lie in (0, 1/2]")
    alpha = spec.nonlinearity.alpha
    if alpha is None:
        raise PreconditionError("the nonlinearity has no limit alpha at infinity")
    m = float(Energy(spec, grid, include_F=False).value(w_tilde.to_vector()))
    level = m + alpha * spec.T
    if not beta > level:
        raise PreconditionError(
            f"beta = {beta:.12g} does not exceed m + alpha T = {level:.12g}")
    eps1 = margin * (beta - level)
    n = 1.0
    while n <= n_max:
        (_, lo), (_, hi) = scan_mean_section(spec, grid, w_tilde, [-n, n])
        if lo <= level + eps1 and hi <= level + eps1:
            return w_tilde.shifted(-n), w_tilde.shifted(n), n
        n *= 2
    raise EndpointSearchFailure(f"no n <= {n_max:g} brings I(w +- n) within {eps1:.3g} "
                                f"of m + alpha T")


def _reparametrize(X: np.ndarray) -> np.ndarray:
    """Equal Euclidean arc-length spacing; endpoints are kept as they are."""
    seg = np.linalg.norm(np.diff(X, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return X
    s /= s[-1]
    target = np.linspace(0.0, 1.0, X.shape[0])
    idx = np.clip(np.searchsorted(s, target, side="right") - 1, 0, X.shape[0] - 2)
    width = s[idx + 1] - s[idx]
    frac = np.where(width > 0, (target - s[idx]) / np.where(width > 0, width, 1.0), 0.0)
    Y = X[idx] + frac[:, None] * (X[idx + 1] - X[idx])
    Y[0], Y[-1] = X[0], X[-1]
    return Y


def _arc_parameter(X: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(X, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    return s / s[-1] if s[-1] > 0 else np.linspace(0.0, 1.0, X.shape[0])


class _String:
    def __init__(self, energy: Energy, X: np.ndarray, opts: StringOptions):
        self.E = energy
        self.opts = opts
        self.X = X
        self.values = energy.value(X)
        self.steps = np.full(X.shape[0] - 2, opts.step_init)

    def _grad(self, X):
        g = self.E.gradient(X)
        if self.opts.freeze_tilde:
            g[..., 1:] = 0.0
        return g

    def descend(self) -> None:
        """One projected Armijo step for every interior image (vectorized)."""
        E, opts = self.E, self.opts
        Xi = self.X[1:-1]
        f = self.values[1:-1]
        g = self._grad(Xi)
        G = g / E.weights
        s = self.steps.copy()
        new = Xi.copy()
        fnew = f.copy()
        pending = np.ones(Xi.shape[0], dtype=bool)
        # an image may not move further than one image spacing; otherwise it
        # can jump past an endpoint into the low region beyond it
        spacing = np.linalg.norm(np.diff(self.X, axis=0), axis=1).mean()
        for _ in range(60):
            idx = np.flatnonzero(pending)
            if idx.size == 0:
                break
            trial = project_vector(Xi[idx] - s[idx, None] * G[idx], E.a, opts.margin)
            ft = E.value(trial)
            delta = trial - Xi[idx]
            decrease = np.einsum("ij,ij->i", g[idx], delta)
            ok = ((ft <= f[idx] + opts.armijo_c * decrease)
                  & (np.linalg.norm(delta, axis=1) <= spacing))
            new[idx[ok]] = trial[ok]
            fnew[idx[ok]] = ft[ok]
            pending[idx[ok]] = False
            s[idx[~ok]] *= opts.backtrack
        s[~pending] = np.minimum(s[~pending] / opts.backtrack, opts.max_step)
        s[pending] = opts.step_init
        self.steps = s
        self.X = np.vstack([self.X[:1], new, self.X[-1:]])

    def reparametrize(self) -> None:
        self.X = _reparametrize(self.X)
        self.values = self.E.value(self.X)


def _initial_family(A: PeriodicPath, B: PeriodicPath, P: int, a: float, margin: float):
    lam = np.linspace(0.0, 1.0, P)[:, None]
    X = (1 - lam) * A.to_vector() + lam * B.to_vector()
    X[1:-1] = project_vector(X[1:-1], a, margin)
    return X


def _climb(E: Energy, x, tangent, opts: StringOptions):
    """Climbing-image iteration: descend except along the tangent, where it ascends."""
    w = E.weights
    tau = tangent / math.sqrt(float(np.sum(w * tangent * tangent)))
    step = opts.step_init
    res = projected_residual(E, x)
    for _ in range(opts.climb_iters):
        if res <= opts.climb_tol:
            break
        g = E.gradient(x)
        if opts.freeze_tilde:
            g[1:] = 0.0
        direction = g / w - 2.0 * float(g @ tau) * tau
        xn = project_vector(x - step * direction, E.a, opts.margin)
        rn = projected_residual(E, xn)
        if rn < res * 1.5:
            x, res = xn, rn
            step = min(step * 1.1, 1e3)
        else:
            step *= 0.5
            if step < 1e-12:
                break
    return x, res


def _refine_frozen(E: Energy, X: np.ndarray, i: int):
    """With frozen slopes, the saddle is the 1-D critical point in the mean."""
    base = X[i].copy()

    def dmean(r):
        y = base.copy()
        y[0] = r
        return float(E.gradient(y)[0])

    lo, hi = X[i - 1, 0], X[i + 1, 0]
    x = base
    if dmean(lo) * dmean(hi) < 0:
        x = base.copy()
        x[0] = sopt.brentq(dmean, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                           maxiter=500)
    g = E.gradient(x)
    return x, abs(float(g[0]))


def string_search(spec: ProblemSpec, grid: PeriodicGrid, A: PeriodicPath, B: PeriodicPath,
                  opts: StringOptions = StringOptions()) -> MountainPassResult:
    """Approximate the mountain-pass level between A and B and locate a saddle.

    Raises
    ------
    CollapseDetected
        If no image of the family lies above the endpoint level (flat or
        barrier-free landscape).
    """
    E = Energy(spec, grid, margin=opts.margin)
    a = spec.phi_model.a
    IA, IB = float(E.value(A.to_vector())), float(E.value(B.to_vector()))
    endpoint_level = max(IA, IB)

    P = opts.images
    X = _initial_family(A, B, P, a, opts.margin)
    refined_once = False
    while True:
        st = _String(E, X, opts)
        st.reparametrize()
        history = []
        still = 0
        it = 0
        for it in range(1, opts.max_iters + 1):
            c = float(st.values.max())
            if c <= endpoint_level + 1e-12:
                raise CollapseDetected(
                    f"family maximum {c:.12g} is not above the endpoint level {endpoint_level:.12g}")
            history.append(c)
            if len(history) > 1 and abs(history[-2] - c) <= opts.value_tol * max(1.0, abs(c)):
                still += 1
            else:
                still = 0
            if it >= opts.min_iters and still >= opts.patience:
                break
            st.descend()
            st.reparametrize()
        imax = int(np.argmax(st.values[1:-1])) + 1
        adjacent = imax in (1, st.X.shape[0] - 2)
        if adjacent and opts.refine_images and not refined_once:
            refined_once = True
            s = _arc_parameter(st.X)
            fine = np.linspace(0.0, 1.0, 2 * st.X.shape[0] - 1)
            X = np.array([np.interp(fine, s, st.X[:, j]) for j in range(st.X.shape[1])]).T
            X[1:-1] = project_vector(X[1:-1], a, opts.margin)
            continue
        break

    X = st.X
    string_iters = it
    tangent = X[imax + 1] - X[imax - 1]
    if opts.freeze_tilde:
        saddle, res = _refine_frozen(E, X, imax)
    else:
        saddle, res = _climb(E, X[imax].copy(), tangent, opts)
        saddle, _, res = newton_polish(E, saddle, minimize=False, tol=opts.grad_tol * 1e-3)
    c_hat = float(E.value(saddle))
    X = X.copy()
    X[imax] = saddle
    values = E.value(X)
    converged = res <= opts.grad_tol
    if not converged:
        logger.warning("saddle refinement stopped at residual %.3g", res)
    return MountainPassResult(
        c_hat=c_hat,
        saddle=PeriodicPath.from_vector(saddle),
        saddle_grad_norm=res,
        endpoint_level=endpoint_level,
        barrier_gap=c_hat - endpoint_level,
        family=PathFamily.from_array(X),
        values=values,
        c_history=history,
        iterations=string_iters,
        converged=converged,
        saddle_index=imax,
    )


def write_family_csv(result: MountainPassResult, file) -> None:
    """Columns ``image_index, x, I_value``; x is the normalized arc length."""
    X = result.family.to_array()
    s = _arc_parameter(X)
    with open(file, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_index", "x", "I_value"])
        for i, (si, vi) in enumerate(zip(s, result.values)):
            writer.writerow([i, f"{si:.17g}", f"{vi:.17g}"])
