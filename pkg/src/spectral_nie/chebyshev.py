"""Chebyshev basis on [-1, 1]: nodes, evaluation, projection, time mapping.

Coefficient arrays ("ChebCoeffs") are float64 arrays of shape ``(M, d)`` with
``M = N + 1`` modes and ``d`` channels, in the full-sum convention

    y(t) = sum_{j=0}^{N} a[j] * C_j(t)

with no halving of ``a[0]``. One-dimensional coefficient vectors are accepted
everywhere and treated as a single channel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .errors import NonFiniteError

#: Points this far outside [-1, 1] are clamped instead of rejected.
CLAMP_TOL = 1e-12


def as_coeffs(c, name: str = "coeffs") -> np.ndarray:
    """Validate and return ``c`` as an ``(M, d)`` float64 coefficient array."""
    arr = np.array(c, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have shape (n_modes, dim), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class CollocationGrid:
    """Chebyshev extrema ``points[k] = cos(k*pi/n)``, k = 0..n, descending."""

    n: int
    points: np.ndarray

    @property
    def size(self) -> int:
        return self.n + 1


def cheb_nodes(n: int) -> CollocationGrid:
    """Return the ``n + 1`` Chebyshev extrema in descending order.

    The symmetric pairs are made exactly antisymmetric and the middle node of
    an even grid is exactly zero.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    k = np.arange(n + 1)
    # sin form is symmetric in floating point: sin(pi*(n-2k)/(2n))
    pts = np.sin(np.pi * (n - 2 * k) / (2.0 * n))
    pts.setflags(write=False)
    return CollocationGrid(n=n, points=pts)


def _check_points(t) -> np.ndarray:
    ts = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if ts.ndim != 1:
        raise ValueError("evaluation points must be a scalar or 1-D array")
    if not np.all(np.isfinite(ts)):
        raise ValueError("evaluation points must be finite")
    if np.any(np.abs(ts) > 1.0 + CLAMP_TOL):
        bad = ts[np.argmax(np.abs(ts))]
        raise ValueError(f"evaluation point {bad!r} outside [-1, 1]")
    return np.clip(ts, -1.0, 1.0)


def eval_series(c, t: float) -> np.ndarray:
    """Evaluate the series at a single ``t`` by Clenshaw recurrence; shape (d,)."""
    return eval_series_grid(c, np.array([t], dtype=np.float64))[0]


def eval_series_grid(c, ts) -> np.ndarray:
    """Evaluate the series at every point of ``ts``; shape ``(len(ts), d)``."""
    coeffs = np.ascontiguousarray(as_coeffs(c))
    pts = np.ascontiguousarray(_check_points(ts))
    return _kernels.clenshaw(coeffs, pts)


def vandermonde(ts, n_modes: int) -> np.ndarray:
    """Matrix ``E[i, j] = C_j(ts[i])`` so that ``E @ coeffs`` evaluates the series."""
    pts = _check_points(ts)
    return np.polynomial.chebyshev.chebvander(pts, n_modes - 1)


def node_projection_matrix(n: int) -> np.ndarray:
    """Matrix ``P`` with ``P @ values_at_nodes = coeffs`` of the degree-n interpolant.

    Discrete cosine transform on the extrema grid with half weights on the
    first and last node, followed by halving of the first and last mode to
    obtain full-sum coefficients.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    j = np.arange(n + 1)[:, None]
    k = np.arange(n + 1)[None, :]
    mat = (2.0 / n) * np.cos(np.pi * ((j * k) % (2 * n)) / n)
    mat[:, 0] *= 0.5
    mat[:, -1] *= 0.5
    mat[0, :] *= 0.5
    mat[-1, :] *= 0.5
    return mat


def project_nodes(values) -> np.ndarray:
    """Coefficients of the interpolant through values sampled at ``cheb_nodes(N)``.

    Row ``k`` of ``values`` must hold the sample at ``cos(k*pi/N)``.
    """
    vals = as_coeffs(values, "values")
    n = vals.shape[0] - 1
    if n < 1:
        raise ValueError("need at least two node values (N >= 1)")
    return node_projection_matrix(n) @ vals


def project_mc(
    f: Callable[[np.ndarray], np.ndarray],
    k_max: int,
    n_mc: int,
    rng_seed: int,
) -> np.ndarray:
    """Monte Carlo estimate of the first ``k_max + 1`` Chebyshev coefficients.

    With ``s = cos(theta)`` and ``theta ~ U(0, pi)`` the weighted projection
    integral becomes ``b_k = E[2 f(cos theta) cos(k theta)]``, which has no
    endpoint singularity. The zeroth mode is halved on output (full-sum
    convention).

    Parameters
    ----------
    f : callable
        Vectorised evaluator taking an array of points ``s`` with shape (n,)
        and returning shape (n,) or (n, d).
    k_max : int
        Highest mode returned.
    n_mc : int
        Number of samples.
    rng_seed : int
        Seed for ``numpy.random.default_rng``.

    Returns
    -------
    ndarray, shape (k_max + 1, d)
    """
    if n_mc < 1:
        raise ValueError(f"n_mc must be >= 1, got {n_mc}")
    if k_max < 0:
        raise ValueError(f"k_max must be >= 0, got {k_max}")
    rng = np.random.default_rng(rng_seed)
    theta = rng.uniform(0.0, np.pi, size=n_mc)
    vals = np.asarray(f(np.cos(theta)), dtype=np.float64)
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.shape[0] != n_mc:
        raise ValueError("evaluator returned the wrong number of rows")
    sums = _kernels.cos_moments(
        np.ascontiguousarray(theta), np.ascontiguousarray(vals), int(k_max)
    )
    out = 2.0 * sums / n_mc
    out[0] *= 0.5
    return out


def mc_buffer_bytes(n_mc: int, dim: int) -> int:
    """Bytes held by one ``project_mc`` call (angles plus evaluator output)."""
    return 8 * n_mc * (1 + dim)


@dataclass(frozen=True)
class TimeMap:
    """Affine bijection between ``[t_min, t_max]`` and ``[-1, 1]``."""

    t_min: float
    t_max: float

    def __post_init__(self):
        if not (np.isfinite(self.t_min) and np.isfinite(self.t_max)):
            raise ValueError("time bounds must be finite")
        if not self.t_max > self.t_min:
            raise ValueError(f"degenerate interval [{self.t_min}, {self.t_max}]")

    def to_cheb(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = 2.0 * ((t - self.t_min) / (self.t_max - self.t_min)) - 1.0
        return float(out) if out.ndim == 0 else out

    def from_cheb(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = self.t_min + 0.5 * (x + 1.0) * (self.t_max - self.t_min)
        return float(out) if out.ndim == 0 else out


def time_map(t_min: float, t_max: float) -> TimeMap:
    return TimeMap(float(t_min), float(t_max))
