"""Discrete T-periodic Lipschitz paths.

A path is stored as its mean value plus N derivative samples ``d`` with
``sum(d) == 0``; ``d[i]`` is the slope on [t_i, t_{i+1}). Node values are
rebuilt by a cumulative sum with the drift removed, so periodicity of u and
of u' holds by construction. In these coordinates the constraint set K
(|u'| <= a) is a box intersected with one hyperplane.

Most routines also accept "packed" vectors ``x = [mean, d_0, ..., d_{N-1}]``
(and stacks of them), which is what the optimizers work with.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import BisectionFailure, DimensionMismatch

DEFAULT_MARGIN = 1e-6


@dataclass(frozen=True)
class PeriodicGrid:
    N: int
    T: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 8:
            raise ValueError(f"grid needs an integer N >= 8, got {self.N}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"period T must be positive, got {self.T}")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N) * self.dt


@dataclass(frozen=True)
class KProjectionConfig:
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        if not 0 < self.margin <= 0.1:
            raise ValueError(f"margin must lie in (0, 0.1], got {self.margin}")


@dataclass(frozen=True, eq=False)
class PeriodicPath:
    mean: float
    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.ndim != 1:
            raise DimensionMismatch("derivative samples must be one-dimensional")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "mean", float(self.mean))

    @property
    def N(self) -> int:
        return self.d.size

    def is_valid(self, dt: float, tol: float = 1e-12) -> bool:
        return abs(float(np.sum(self.d)) * dt) <= tol * max(1.0, float(np.abs(self.d).sum()) * dt)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.mean], self.d])

    @classmethod
    def from_vector(cls, x) -> "PeriodicPath":
        x = np.asarray(x, dtype=float)
        return cls(float(x[0]), x[1:])

    @classmethod
    def constant(cls, value: float, N: int) -> "PeriodicPath":
        return cls(value, np.zeros(N))

    def shifted(self, r: float) -> "PeriodicPath":
        """The translate u + r (same derivative samples)."""
        return PeriodicPath(self.mean + r, self.d)

    def __eq__(self, other):
        if not isinstance(other, PeriodicPath):
            return NotImplemented
        return self.mean == other.mean and np.array_equal(self.d, other.d)

    __hash__ = None


def _check(path: PeriodicPath, grid: PeriodicGrid):
    if path.N != grid.N:
        raise DimensionMismatch(f"path has {path.N} samples, grid has {grid.N} nodes")


def reconstruct(mean, d, dt: float) -> np.ndarray:
    """Node values for (stacks of) mean values and derivative samples."""
    d = np.asarray(d, dtype=float)
    c = np.zeros_like(d)
    np.cumsum(d[..., :-1], axis=-1, out=c[..., 1:])
    c *= dt
    return np.asarray(mean, dtype=float)[..., None] + c - c.mean(axis=-1, keepdims=True)


def node_values(path: PeriodicPath, grid: PeriodicGrid) -> np.ndarray:
    """u_i = mean + c_i - mean(c), with c_i = sum_{j<i} d_j dt."""
    _check(path, grid)
    return reconstruct(path.mean, path.d, grid.dt)


def decompose(path: PeriodicPath):
    """Split u = mean + tilde, with tilde in the zero-mean subspace W."""
    return path.mean, PeriodicPath(0.0, path.d)


def recombine(mean: float, tilde: PeriodicPath) -> PeriodicPath:
    return PeriodicPath(mean + tilde.mean, tilde.d)


def integrate(samples, grid: PeriodicGrid) -> float:
    """Periodic rectangle rule, sum(samples) * dt."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[-1] != grid.N:
        raise DimensionMismatch(f"{samples.shape[-1]} samples on a grid of {grid.N} nodes")
    return float(np.sum(samples) * grid.dt)


def from_node_values(u, grid: PeriodicGrid) -> PeriodicPath:
    """Inverse of :func:`node_values` (forward differences with wrap)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.N,):
        raise DimensionMismatch(f"expected {grid.N} node values, got {u.shape}")
    d = (np.roll(u, -1) - u) / grid.dt
    d -= d.mean()
    return PeriodicPath(float(u.mean()), d)


# --- projection onto K --------------------------------------------------------

def project_box_zero_sum(d, bound: float, max_iter: int = 200) -> np.ndarray:
    """Euclidean projection of the rows of ``d`` onto {|d_i| <= bound, sum d = 0}.

    The minimizer is d_i(lam) = clip(d_i - lam, -bound, bound) for the root
    lam of the decreasing map lam -> sum_i d_i(lam). The root is bracketed
    by [min d - bound, max d + bound], located by bisection, and then made
    exact from the resulting active set.
    """
    d = np.asarray(d, dtype=float)
    single = d.ndim == 1
    D = np.atleast_2d(d)
    if not bound > 0:
        raise BisectionFailure("box half-width must be positive")
    feasible = (np.all(np.abs(D) <= bound, axis=1)
                & (np.abs(D.sum(axis=1)) <= 1e-12 * np.maximum(1.0, np.abs(D).sum(axis=1))))
    out = D.copy()
    todo = ~feasible
    if np.any(todo):
        X = D[todo]
        lo = X.min(axis=1) - bound
        hi = X.max(axis=1) + bound
        if not np.all(np.isfinite(lo) & np.isfinite(hi)):
            raise BisectionFailure("non-finite derivative samples")
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            pos = np.clip(X - mid[:, None], -bound, bound).sum(axis=1) > 0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
            if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(mid))):
                break
        lam = 0.5 * (lo + hi)
        shifted = X - lam[:, None]
        upper = shifted >= bound
        lower = shifted <= -bound
        free = ~(upper | lower)
        n_free = free.sum(axis=1)
        exact = (np.where(free, X, 0.0).sum(axis=1)
                 + bound * (upper.sum(axis=1) - lower.sum(axis=1)))
        lam = np.where(n_free > 0, exact / np.maximum(n_free, 1), lam)
        P = np.clip(X - lam[:, None], -bound, bound)
        # remove residual round-off on the free components
        resid = P.sum(axis=1)
        corr = np.where(n_free > 0, resid / np.maximum(n_free, 1), 0.0)
        P = np.where(free, np.clip(P - corr[:, None], -bound, bound), P)
        out[todo] = P
    return out[0] if single else out


def project_vector(x, a: float, margin: float = DEFAULT_MARGIN) -> np.ndarray:
    """Project packed vector(s) [mean, d...] onto the discrete K; mean untouched."""
    x = np.array(x, dtype=float)
    x[..., 1:] = project_box_zero_sum(x[..., 1:], a * (1.0 - margin))
    return x


def project_to_K(path: PeriodicPath, phi_model, cfg: KProjectionConfig = KProjectionConfig()
                 ) -> PeriodicPath:
    """Nearest path (Euclidean in d) with |d_i| <= a(1 - margin) and zero sum."""
    d = project_box_zero_sum(path.d, phi_model.a * (1.0 - cfg.margin))
    if d is path.d or np.array_equal(d, path.d):
        return path
    return PeriodicPath(path.mean, d)


def in_K(path_or_d, a: float, margin: float = 0.0) -> bool:
    d = path_or_d.d if isinstance(path_or_d, PeriodicPath) else np.asarray(path_or_d)
    return bool(np.all(np.abs(d) <= a * (1.0 - margin)))


# --- random paths ---------------------------------------------------------------

def random_tilde(grid: PeriodicGrid, rng: np.random.Generator, a: float,
                 margin: float = DEFAULT_MARGIN, n_modes: int = 6,
                 amplitude: float | None = None) -> np.ndarray:
    """Smooth random zero-sum derivative samples scaled into K."""
    t = grid.nodes
    w = 2 * np.pi / grid.T
    d = np.zeros(grid.N)
    for k in range(1, n_modes + 1):
        ca, cb = rng.standard_normal(2) / k
        d += ca * np.cos(k * w * t) + cb * np.sin(k * w * t)
    d -= d.mean()
    if amplitude is None:
        amplitude = rng.uniform(0.1, 0.95)
    peak = np.abs(d).max()
    if peak > 0:
        d *= amplitude * a * (1.0 - margin) / peak
    return project_box_zero_sum(d, a * (1.0 - margin))


def random_path(grid: PeriodicGrid, rng: np.random.Generator, a: float,
                mean_scale: float = 1.0, **kwargs) -> PeriodicPath:
    return PeriodicPath(mean_scale * rng.standard_normal(),
                        random_tilde(grid, rng, a, **kwargs))


# --- CSV ------------------------------------------------------------------------

def write_path_csv(path: PeriodicPath, grid: PeriodicGrid, file) -> None:
    """Write ``t,u,du`` rows (one per node) with 17 significant digits."""
    u = node_values(path, grid)
    with open(file, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "u", "du"])
        for ti, ui, di in zip(grid.nodes, u, path.d):
            writer.writerow([f"{ti:.17g}", f"{ui:.17g}", f"{di:.17g}"])


def read_path_csv(file, T: float) -> tuple[PeriodicPath, PeriodicGrid]:
    with open(file, newline="") as fh:
        rows = list(csv.DictReader(fh))
    grid = PeriodicGrid(len(rows), T)
    u = np.array([float(r["u"]) for r in rows])
    d = np.array([float(r["du"]) for r in rows])
    return PeriodicPath(float(u.mean()), d), grid
