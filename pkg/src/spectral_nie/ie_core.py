"""Integral equations of the second kind solved by Picard iteration in coefficient space.

A problem is

    y(t) = f(t) + lam * integral_{-1}^{alpha(t)} G(y(s), t, s) ds

with ``alpha(t) = 1`` (Fredholm) or ``alpha(t) = t`` (Volterra). The unknown is
kept as Chebyshev coefficients. At every collocation point ``t_i`` the
integrand evaluator returns the coefficients ``b_i`` of ``s -> G(y(s), t_i, s)``;
the integrals are closed-form contractions of ``b_i`` (see ``spectral_ops``);
the updated node values are projected back onto the basis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .chebyshev import (
    CollocationGrid,
    as_coeffs,
    cheb_nodes,
    eval_series_grid,
    node_projection_matrix,
    vandermonde,
)
from .errors import NonFiniteError
from .spectral_ops import fredholm_weights, volterra_weights


class Kind(str, enum.Enum):
    FREDHOLM = "fredholm"
    VOLTERRA = "volterra"

    @classmethod
    def parse(cls, value) -> "Kind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown equation kind {value!r}") from None


class IntegrandEvaluator(Protocol):
    def spectral_integrand(self, u: np.ndarray, t: float) -> np.ndarray:
        """Coefficients of ``s -> G(u(s), t, s)``, same shape as ``u``."""

    def spectral_integrand_batch(self, u: np.ndarray, ts: np.ndarray) -> np.ndarray:
        """Stacked ``spectral_integrand(u, t)`` for every ``t`` in ``ts``."""


class ClassicalIntegrand:
    """Pointwise kernel ``G(y, t, s)`` projected onto the basis at the grid nodes.

    With ``vectorized=True`` the kernel is called once per ``t`` with ``y`` of
    shape (n, d) and ``s`` of shape (n,), and must return shape (n, d).
    Otherwise it is called per node with ``y`` of shape (d,) and scalars.
    """

    def __init__(self, G: Callable, grid: CollocationGrid, vectorized: bool = False):
        self.G = G
        self.grid = grid
        self.vectorized = vectorized
        self._proj = node_projection_matrix(grid.n)

    def _node_values(self, u: np.ndarray, t: float) -> np.ndarray:
        s = self.grid.points
        y = eval_series_grid(u, s)
        if self.vectorized:
            g = np.asarray(self.G(y, float(t), s), dtype=np.float64)
        else:
            g = np.array(
                [np.asarray(self.G(y[k], float(t), float(s[k])), dtype=np.float64)
                 for k in range(s.shape[0])]
            )
        g = g.reshape(y.shape)
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"kernel returned non-finite values at t={t!r}")
        return g

    def spectral_integrand(self, u, t):
        u = as_coeffs(u, "u")
        if u.shape[0] != self.grid.size:
            raise ValueError("u does not match the collocation grid")
        return self._proj @ self._node_values(u, t)

    def spectral_integrand_batch(self, u, ts):
        return np.stack([self.spectral_integrand(u, t) for t in ts])


def classical_to_spectral(G: Callable, grid: CollocationGrid, vectorized: bool = False) -> ClassicalIntegrand:
    """Wrap a pointwise kernel as a spectral integrand evaluator."""
    return ClassicalIntegrand(G, grid, vectorized=vectorized)


@dataclass
class IEProblem:
    kind: Kind
    lam: float
    f: np.ndarray
    integrand: IntegrandEvaluator

    def __post_init__(self):
        self.kind = Kind.parse(self.kind)
        self.f = as_coeffs(self.f, "f")
        if not np.isfinite(self.lam):
            raise ValueError("lambda must be finite")
        self.lam = float(self.lam)


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-6
    max_iter: int = 100
    relaxation: float = 1.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0.0 < self.relaxation <= 1.0:
            raise ValueError("relaxation must lie in (0, 1]")


@dataclass
class SolveReport:
    iterations: int = 0
    residuals: list[float] = field(default_factory=list)
    converged: bool = False


def integration_matrix(kind: Kind, grid: CollocationGrid) -> np.ndarray:
    """``Q[i, j]``: weight of mode ``j`` of ``b_i`` in the integral at node ``i``."""
    m = grid.size
    if Kind.parse(kind) is Kind.FREDHOLM:
        return np.tile(fredholm_weights(m), (m, 1))
    return volterra_weights(m, grid.points)


def _check_shapes(problem: IEProblem, grid: CollocationGrid):
    if problem.f.shape[0] != grid.size:
        raise ValueError(
            f"free term has {problem.f.shape[0]} modes, grid needs {grid.size}"
        )


def picard_map(problem: IEProblem, grid: CollocationGrid, u: np.ndarray) -> np.ndarray:
    """One undamped application ``u -> P(f + lam * integral(G(u)))``."""
    q = integration_matrix(problem.kind, grid)
    f_nodes = vandermonde(grid.points, grid.size) @ problem.f
    b = problem.integrand.spectral_integrand_batch(u, grid.points)
    integrals = np.einsum("ij,ijc->ic", q, b)
    return node_projection_matrix(grid.n) @ (f_nodes + problem.lam * integrals)


def picard_solve(
    problem: IEProblem,
    grid: CollocationGrid,
    config: SolverConfig | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Fixed-point iteration ``u_{k+1} = (1 - rho) u_k + rho * T(u_k)`` from ``u_0 = f``.

    Stops when the Frobenius norm of the coefficient update is at most
    ``config.tol`` or after ``config.max_iter`` updates. Hitting the cap is
    reported through ``SolveReport.converged``, not raised.

    Raises
    ------
    NonFiniteError
        If an iterate contains NaN or Inf.
    """
    config = config or SolverConfig()
    _check_shapes(problem, grid)
    rho = config.relaxation
    u = problem.f.copy()
    report = SolveReport()
    for _ in range(config.max_iter):
        w = picard_map(problem, grid, u)
        u_next = w if rho == 1.0 else (1.0 - rho) * u + rho * w
        if not np.all(np.isfinite(u_next)):
            raise NonFiniteError(f"iterate {report.iterations + 1} is not finite")
        res = float(np.linalg.norm(u_next - u))
        u = u_next
        report.iterations += 1
        report.residuals.append(res)
        if res <= config.tol:
            report.converged = True
            break
    return u, report


def residual(problem: IEProblem, grid: CollocationGrid, u) -> float:
    """Frobenius norm of ``u - T(u)``; zero exactly at a fixed point."""
    _check_shapes(problem, grid)
    u = as_coeffs(u, "u")
    return float(np.linalg.norm(u - picard_map(problem, grid, u)))


__all__ = [
    "ClassicalIntegrand",
    "CollocationGrid",
    "IEProblem",
    "Kind",
    "SolveReport",
    "SolverConfig",
    "cheb_nodes",
    "classical_to_spectral",
    "integration_matrix",
    "picard_map",
    "picard_solve",
    "residual",
]
