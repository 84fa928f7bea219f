"""Spectral integration of Chebyshev series.

Given integrand coefficients ``b`` (full-sum, ``N + 1`` modes) the
antiderivative vanishing at ``t = -1`` is returned as ``N + 2`` coefficients
``d`` in the half-first-mode convention

    F(t) = d[0] / 2 + sum_{k>=1} d[k] * C_k(t).

Every map here is linear in ``b``, so each operation is also available as a
matrix (``antiderivative_matrix``, ``fredholm_weights``, ``volterra_weights``)
which the solver uses to integrate a whole sweep of collocation points with a
single contraction.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .chebyshev import _check_points, as_coeffs


@lru_cache(maxsize=64)
def _antiderivative_matrix(n_modes: int) -> np.ndarray:
    m = n_modes
    # bhat = S @ b with bhat_0 = 2 b_0, zero-padded to m + 2 entries
    a = np.zeros((m + 1, m))
    for k in range(1, m + 1):
        # d_k = (bhat_{k-1} - bhat_{k+1}) / (2k)
        lo = k - 1
        a[k, lo] += (2.0 if lo == 0 else 1.0) / (2.0 * k)
        hi = k + 1
        if hi < m:
            a[k, hi] -= 1.0 / (2.0 * k)
    signs = np.array([(-1.0) ** (k + 1) for k in range(1, m + 1)])
    # d_0 = 2 * sum_{k>=1} (-1)^{k+1} d_k puts F(-1) = 0
    a[0] = 2.0 * (signs @ a[1:])
    a.setflags(write=False)
    return a


def antiderivative_matrix(n_modes: int) -> np.ndarray:
    """``(n_modes + 1, n_modes)`` matrix ``A`` with ``d = A @ b``."""
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    return _antiderivative_matrix(int(n_modes))


def antiderivative(b) -> np.ndarray:
    """Antiderivative coefficients ``d`` (half-``d_0`` convention), channel-wise."""
    bb = as_coeffs(b, "b")
    return antiderivative_matrix(bb.shape[0]) @ bb


def eval_antiderivative(d, ts) -> np.ndarray:
    """Evaluate ``d[0]/2 + sum_k d[k] C_k`` at ``ts``; shape ``(len(ts), dim)``."""
    dd = as_coeffs(d, "d")
    vals = np.polynomial.chebyshev.chebvander(_check_points(ts), dd.shape[0] - 1)
    vals[:, 0] = 0.5
    return vals @ dd


def fredholm_weights(n_modes: int) -> np.ndarray:
    """Row vector ``w`` with ``w @ b = integral of the series over [-1, 1]``."""
    a = antiderivative_matrix(n_modes)
    return 2.0 * a[1::2].sum(axis=0)


def volterra_weights(n_modes: int, ts) -> np.ndarray:
    """Matrix ``Q[i] @ b = integral of the series over [-1, ts[i]]``."""
    a = antiderivative_matrix(n_modes)
    basis = np.polynomial.chebyshev.chebvander(_check_points(ts), n_modes)
    basis[:, 0] = 0.5
    return basis @ a


def fredholm_integral(b) -> np.ndarray:
    """``2 * sum_k d[2k+1]``: the integral over [-1, 1]; shape (dim,)."""
    d = antiderivative(b)
    return 2.0 * d[1::2].sum(axis=0)


def volterra_eval(b, t: float) -> np.ndarray:
    """The integral of the series over ``[-1, t]``; shape (dim,)."""
    return eval_antiderivative(antiderivative(b), [t])[0]
