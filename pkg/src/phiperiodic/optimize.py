"""Projected-gradient minimization over W (zero mean) and over K.

Descent runs in packed coordinates ``[mean, d...]``. Search directions use
the L2(0, T) metric (the raw gradient divided by T for the mean and by dt
for the slopes), which keeps the step length independent of N; every trial
point is projected back onto the box-and-hyperplane set K and accepted by
an Armijo test. Stopping uses the Euclidean norm of the projected raw
gradient step, ``||x - P(x - grad I(x))||``.

Several starting paths are run in rounds whose tolerance shrinks like 1/n
(an Ekeland-style schedule); the best candidate after each round is
recorded, which gives a discrete Palais-Smale trace of (value, residual)
pairs. The winner is finally refined by Newton steps on the stationarity
system when it sits in the interior of K.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .functional import Energy
from .grid import (DEFAULT_MARGIN, PeriodicGrid, PeriodicPath, project_vector,
                   random_tilde)
from .problem import ProblemSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DescentOptions:
    max_iters: int = 50_000
    step_init: float = 0.1
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    grad_tol: float = 1e-8
    restarts: int = 8
    seed: int = 0
    margin: float = DEFAULT_MARGIN
    polish: bool = True
    first_tol: float = 1e-2
    newton_switch: float = 1e-6

    def __post_init__(self):
        if self.max_iters <= 0 or self.step_init <= 0 or self.grad_tol <= 0:
            raise ValueError("max_iters, step_init and grad_tol must be positive")
        if not 0 < self.armijo_c < 1 or not 0 < self.backtrack < 1:
            raise ValueError("armijo_c and backtrack must lie in (0, 1)")
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")


@dataclass
class MinimizeResult:
    path: PeriodicPath
    value: float
    projected_grad_norm: float
    iterations: int
    ps_log: list = field(default_factory=list)
    converged: bool = True
    objective: str = "I"
    rounds: list = field(default_factory=list)

    def to_dict(self, max_log: int = 64) -> dict:
        step = max(1, len(self.ps_log) // max_log)
        log = self.ps_log[::step]
        if self.ps_log and (not log or log[-1] is not self.ps_log[-1]):
            log = log + [self.ps_log[-1]]
        return {
            "objective": self.objective,
            "value": self.value,
            "mean": self.path.mean,
            "projected_grad_norm": self.projected_grad_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "ekeland_rounds": [list(r) for r in self.rounds],
            "ps_log": [list(p) for p in log],
        }


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SOLVER_THREADS", "1")))
    except ValueError:
        return 1


def projected_residual(energy: Energy, x, fixed_mean: bool = False,
                       g: Optional[np.ndarray] = None) -> float:
    """||x - P_K(x - grad)||, the stationarity residual used for stopping."""
    if g is None:
        g = energy.gradient(x)
    g = np.array(g, dtype=float)
    if fixed_mean:
        g[..., 0] = 0.0
    step = x - project_vector(x - g, energy.a, energy.margin)
    return float(np.linalg.norm(step))


class _Run:
    """State of one descent run; can be resumed with a tighter tolerance."""

    def __init__(self, energy: Energy, x0, fixed_mean: bool, opts: DescentOptions):
        self.energy = energy
        self.fixed_mean = fixed_mean
        self.opts = opts
        x = project_vector(np.asarray(x0, dtype=float), energy.a, opts.margin)
        if fixed_mean:
            x[0] = 0.0
        self.x = x
        self.value = float(energy.value(x))
        self.step = opts.step_init
        self.iterations = 0
        self.log: list = []
        self.residual = np.inf
        self.stalled = False

    def _grad(self, x):
        g = self.energy.gradient(x)
        if self.fixed_mean:
            g[0] = 0.0
        return g

    def advance(self, tol: float) -> None:
        E, opts = self.energy, self.opts
        x, f = self.x, self.value
        while self.iterations < opts.max_iters:
            g = self._grad(x)
            r = projected_residual(E, x, self.fixed_mean, g)
            self.residual = r
            if r <= tol:
                break
            self.log.append((f, r))
            G = g / E.weights
            s = self.step
            slack = 8 * np.finfo(float).eps * max(1.0, abs(f))
            while True:
                xn = project_vector(x - s * G, E.a, opts.margin)
                fn = float(E.value(xn))
                if fn <= f + opts.armijo_c * float(g @ (xn - x)):
                    break
                s *= opts.backtrack
                if s < 1e-14 * opts.step_init:
                    break
            self.iterations += 1
            if not fn <= f + opts.armijo_c * float(g @ (xn - x)):
                # no sufficient decrease left at this precision
                if fn <= f + slack and np.any(xn != x):
                    x, f = xn, fn
                    continue
                self.stalled = True
                break
            x, f = xn, fn
            self.step = min(s / opts.backtrack, 1e3)
        self.x, self.value = x, f


def newton_polish(energy: Energy, x, fixed_mean: bool = False, minimize: bool = True,
                  max_steps: int = 30, tol: float = 1e-13, log: Optional[list] = None):
    """Newton steps on the stationarity system restricted to K's hyperplane(s).

    A step is accepted only if the iterate stays strictly inside K, the
    stationarity residual drops, and (for ``minimize``) the value does not
    go up beyond round-off. Returns ``(x, value, residual)``.
    """
    x = np.array(x, dtype=float)
    n = x.size
    bound = energy.a * (1.0 - energy.margin)
    rows = [np.concatenate([[0.0], np.ones(n - 1)])]
    if fixed_mean:
        rows.append(np.eye(n)[0])
    A = np.array(rows)
    value = float(energy.value(x))
    res = projected_residual(energy, x, fixed_mean)
    for _ in range(max_steps):
        if res <= tol or np.max(np.abs(x[1:])) >= bound:
            break
        g = energy.gradient(x, reduce=False)
        if fixed_mean:
            g[0] = 0.0
        H = energy.hessian(x)
        m = A.shape[0]
        KKT = np.block([[H, A.T], [A, np.zeros((m, m))]])
        rhs = np.concatenate([-g, np.zeros(m)])
        try:
            sol = np.linalg.solve(KKT, rhs)
            if not np.all(np.isfinite(sol)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(KKT, rhs, rcond=None)[0]
        dx = sol[:n]
        accepted = False
        lam = 1.0
        for _ in range(12):
            xn = x + lam * dx
            xn[1:] -= xn[1:].mean()
            if np.max(np.abs(xn[1:])) < bound:
                vn = float(energy.value(xn))
                rn = projected_residual(energy, xn, fixed_mean)
                ok = rn < res
                if minimize:
                    ok = ok and vn <= value + 1e-13 * (1.0 + abs(value))
                if ok:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            break
        x, value, res = xn, vn, rn
        if log is not None:
            log.append((value, res))
    return x, value, res


def _starts(grid: PeriodicGrid, a: float, opts: DescentOptions, fixed_mean: bool,
            mean_scale: float) -> list:
    starts = [np.zeros(grid.N + 1)]
    seeds = np.random.SeedSequence(opts.seed).spawn(opts.restarts)
    for ss in seeds:
        rng = np.random.default_rng(ss)
        d = random_tilde(grid, rng, a, margin=opts.margin)
        mean = 0.0 if fixed_mean else mean_scale * rng.uniform(-1.0, 1.0)
        starts.append(np.concatenate([[mean], d]))
    return starts


def tolerance_schedule(first: float, final: float) -> list:
    """Tolerances first/n for n = 1, 2, 4, ... ending exactly at ``final``."""
    tols = []
    n = 1
    while first / n > final:
        tols.append(first / n)
        n *= 2
    tols.append(final)
    return tols


def _minimize(energy: Energy, starts: list, fixed_mean: bool, opts: DescentOptions,
              objective: str) -> MinimizeResult:
    runs = [_Run(energy, x0, fixed_mean, opts) for x0 in starts]
    rounds = []
    workers = min(_threads(), len(runs))
    pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def each(fn, items):
        if pool is None:
            for item in items:
                fn(item)
        else:
            list(pool.map(fn, items))

    def polish(run):
        tol = opts.grad_tol * 1e-3
        if run.residual > tol:
            x, value, res = newton_polish(energy, run.x, fixed_mean, minimize=True,
                                          tol=tol, log=run.log)
            if value <= run.value:
                run.x, run.value, run.residual = x, value, res
        if run.residual > opts.grad_tol:
            run.stalled = False
            run.advance(opts.grad_tol)

    last_pg = max(opts.grad_tol, opts.newton_switch) if opts.polish else opts.grad_tol
    try:
        n = 0
        for n, tol in enumerate(tolerance_schedule(max(opts.first_tol, last_pg), last_pg),
                                start=1):
            active = [r for r in runs if not r.stalled and r.residual > tol
                      and r.iterations < opts.max_iters]
            each(lambda r: r.advance(tol), active)
            best = min(runs, key=lambda r: r.value)
            rounds.append((n, tol, best.value, best.residual))
        if opts.polish:
            each(polish, runs)
            best = min(runs, key=lambda r: r.value)
            rounds.append((n + 1, opts.grad_tol, best.value, best.residual))
    finally:
        if pool is not None:
            pool.shutdown()

    # ties broken by start order, so the outcome does not depend on threading
    best = min(runs, key=lambda r: r.value)
    x, value, res = best.x, best.value, best.residual
    log = list(best.log)
    log.append((value, res))
    converged = res <= opts.grad_tol
    if not converged:
        logger.warning("%s minimization stopped at residual %.3g > %.3g after %d iterations",
                       objective, res, opts.grad_tol, best.iterations)
    return MinimizeResult(path=PeriodicPath.from_vector(x), value=value,
                          projected_grad_norm=res, iterations=best.iterations,
                          ps_log=log, converged=converged, objective=objective,
                          rounds=rounds)


def minimize_over_W(spec: ProblemSpec, grid: PeriodicGrid,
                    opts: DescentOptions = DescentOptions(), objective: str = "J"):
    """Minimize J (default) or I over zero-mean paths in K.

    Returns
    -------
    result : MinimizeResult
    value : float
        The minimum value: m for ``objective="J"``, beta for ``"I"``.
    """
    if objective not in ("J", "I"):
        raise ValueError("objective must be 'J' or 'I'")
    energy = Energy(spec, grid, include_F=(objective == "I"), margin=opts.margin)
    starts = _starts(grid, spec.phi_model.a, opts, fixed_mean=True, mean_scale=0.0)
    result = _minimize(energy, starts, True, opts, objective + "|W")
    return result, result.value


def minimize_over_K(spec: ProblemSpec, grid: PeriodicGrid,
                    opts: DescentOptions = DescentOptions(),
                    init: Optional[PeriodicPath] = None) -> MinimizeResult:
    """Minimize I over K, the mean being a free variable.

    ``init``, when given, is added to the pool of starting paths (zero path
    plus ``opts.restarts`` random ones); the best converged candidate wins.
    """
    energy = Energy(spec, grid, margin=opts.margin)
    starts = _starts(grid, spec.phi_model.a, opts, fixed_mean=False,
                     mean_scale=spec.phi_model.a * grid.T / 4)
    if init is not None:
        starts.insert(0, init.to_vector())
    return _minimize(energy, starts, False, opts, "I|K")


def scan_mean_section(spec: ProblemSpec, grid: PeriodicGrid, tilde: PeriodicPath,
                      means) -> list:
    """I(tilde + r) for each r in ``means``."""
    energy = Energy(spec, grid)
    means = np.asarray(means, dtype=float)
    X = np.tile(tilde.to_vector(), (means.size, 1))
    X[:, 0] = tilde.mean + means
    J, Fint, feasible = energy.parts(X)
    return [(float(r), float(j + fi)) for r, j, fi in zip(means, J, Fint)]
