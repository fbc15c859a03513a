"""The discrete energy I = J + F_int and the derivatives of its smooth part.

On a grid with spacing dt, for a path with node values u_i and slopes d_i::

    J(u)     = sum_i [Phi(d_i) + h(t_i) u_i] dt     (+inf if max|d_i| > a)
    F_int(u) = sum_i F(t_i, u_i) dt
    I(u)     = J(u) + F_int(u)

:class:`Energy` evaluates these on packed vectors ``[mean, d...]`` (and on
stacks of them, so that a whole path family is evaluated at once); the
module-level functions wrap it for :class:`~phiperiodic.grid.PeriodicPath`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EvaluationError, SingularEvaluation
from .grid import DEFAULT_MARGIN, PeriodicGrid, PeriodicPath, _check, reconstruct
from .problem import ProblemSpec


@dataclass(frozen=True)
class EnergyBreakdown:
    """J, F_int and I for one path.

    Outside K the values of J and I are not numbers but the ``+inf`` flag:
    ``in_K`` is False and ``J_value``/``I_value`` are None.
    """

    J_value: Optional[float]
    F_value: float
    I_value: Optional[float]

    @property
    def in_K(self) -> bool:
        return self.I_value is not None

    def to_dict(self) -> dict:
        flag = "+inf"
        return {"J": flag if self.J_value is None else self.J_value,
                "F": self.F_value,
                "I": flag if self.I_value is None else self.I_value}


@dataclass(frozen=True)
class GradientVector:
    d_mean: float
    d_d: np.ndarray


def _finite(values, what):
    if not np.all(np.isfinite(values)):
        raise EvaluationError(f"{what} returned a non-finite value")
    return values


class Energy:
    """Vectorized evaluator for I (or for J alone with ``include_F=False``)."""

    def __init__(self, spec: ProblemSpec, grid: PeriodicGrid, include_F: bool = True,
                 margin: float = DEFAULT_MARGIN):
        self.spec = spec
        self.grid = grid
        self.include_F = include_F
        self.margin = margin
        self.a = spec.phi_model.a
        self.dt = grid.dt
        self.t = grid.nodes
        self.h = _finite(np.broadcast_to(spec.forcing.h(self.t), (grid.N,)).astype(float), "h")
        self.N = grid.N
        # metric weights turning the raw gradient into an L2(0,T) gradient
        self.weights = np.full(grid.N + 1, grid.dt)
        self.weights[0] = grid.T

    def nodes(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return reconstruct(x[..., 0], x[..., 1:], self.dt)

    def _F(self, u):
        if not self.include_F:
            return np.zeros(np.shape(u))
        return _finite(self.spec.nonlinearity.F(self.t, u), "F")

    def _f(self, u):
        if not self.include_F:
            return np.zeros(np.shape(u))
        return _finite(self.spec.nonlinearity.f(self.t, u), "f")

    def parts(self, x):
        """(J, F_int, feasible) for packed vector(s) x."""
        x = np.asarray(x, dtype=float)
        d = x[..., 1:]
        u = self.nodes(x)
        feasible = np.all(np.abs(d) <= self.a, axis=-1)
        with np.errstate(invalid="ignore"):
            Phi = self.spec.phi_model.Phi(np.clip(d, -self.a, self.a))
        J = (np.sum(Phi, axis=-1) + u @ self.h) * self.dt
        Fint = np.sum(self._F(u), axis=-1) * self.dt
        return J, Fint, feasible

    def value(self, x):
        """I(x) (or J(x)); ``np.inf`` outside K. Internal use only."""
        J, Fint, feasible = self.parts(x)
        return np.where(feasible, J + Fint, np.inf)

    def gradient(self, x, reduce: bool = True):
        """Raw gradient with respect to [mean, d], d-part reduced to zero sum."""
        x = np.asarray(x, dtype=float)
        d = x[..., 1:]
        bound = self.a * (1.0 - self.margin)
        if np.any(np.abs(d) > bound * (1 + 1e-15)):
            raise SingularEvaluation(f"|d| exceeds a(1 - margin) = {bound:.17g}")
        u = self.nodes(x)
        gu = (self._f(u) + self.h) * self.dt
        total = gu.sum(axis=-1)
        tail = total[..., None] - np.cumsum(gu, axis=-1)
        N = self.N
        k = np.arange(N)
        gd = self.dt * (self.spec.phi_model.phi(d) + tail - total[..., None] * (N - 1 - k) / N)
        if reduce:
            gd = gd - gd.mean(axis=-1, keepdims=True)
        g = np.empty_like(x)
        g[..., 0] = total
        g[..., 1:] = gd
        return g

    def scaled_gradient(self, x):
        """Gradient in the L2(0,T) metric: mean part / T, d part / dt."""
        return self.gradient(x) / self.weights

    def hessian(self, x) -> np.ndarray:
        """Dense Hessian of the discrete energy at a single packed vector."""
        x = np.asarray(x, dtype=float)
        d = x[1:]
        N, dt = self.N, self.dt
        u = self.nodes(x)
        if self.include_F:
            fs = _finite(self.spec.nonlinearity.f_prime(self.t, u), "df") * dt
        else:
            fs = np.zeros(N)
        k = np.arange(N)
        M = dt * ((k[:, None] > k[None, :]).astype(float) - (N - 1 - k)[None, :] / N)
        H = np.empty((N + 1, N + 1))
        H[0, 0] = fs.sum()
        row = fs @ M
        H[0, 1:] = row
        H[1:, 0] = row
        H[1:, 1:] = M.T @ (fs[:, None] * M)
        H[1:, 1:] += np.diag(self.spec.phi_model.phi_prime(d) * dt)
        return H


def eval_I(spec: ProblemSpec, grid: PeriodicGrid, path: PeriodicPath) -> EnergyBreakdown:
    """Evaluate J, F_int and I = J + F_int; J and I carry the +inf flag outside K.

    Raises
    ------
    EvaluationError
        If f, F or h return a non-finite value.
    """
    _check(path, grid)
    J, Fint, feasible = Energy(spec, grid).parts(path.to_vector())
    Fint = float(Fint)
    if not feasible:
        return EnergyBreakdown(None, Fint, None)
    J = float(J)
    return EnergyBreakdown(J, Fint, J + Fint)


def eval_J(spec: ProblemSpec, grid: PeriodicGrid, path: PeriodicPath) -> Optional[float]:
    """J alone; None stands for +inf."""
    return eval_I(spec, grid, path).J_value


def grad_smooth(spec: ProblemSpec, grid: PeriodicGrid, path: PeriodicPath,
                margin: float = DEFAULT_MARGIN) -> GradientVector:
    """Gradient of the discrete I in the interior of K.

    ``d_mean`` is sum_i [f(t_i, u_i) + h(t_i)] dt. ``d_d`` is the derivative
    with respect to the slopes (the direct phi(d_i) dt term plus the chain
    rule through the node reconstruction), with its average subtracted so
    that it lies in the zero-sum tangent space.

    Raises
    ------
    SingularEvaluation
        If some |d_i| exceeds a (1 - margin).
    """
    _check(path, grid)
    g = Energy(spec, grid, margin=margin).gradient(path.to_vector())
    return GradientVector(float(g[0]), g[1:])
