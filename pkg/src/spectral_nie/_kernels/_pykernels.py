"""Pure NumPy versions of the hot loops.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
Inputs are assumed validated and C-contiguous float64.
"""

from __future__ import annotations

import numpy as np


def clenshaw(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_j coeffs[j] * C_j(x)`` at every point of ``x``.

    Parameters
    ----------
    coeffs : ndarray, shape (M, d)
        Full-sum Chebyshev coefficients.
    x : ndarray, shape (n,)
        Points in [-1, 1].

    Returns
    -------
    ndarray, shape (n, d)
    """
    m, d = coeffs.shape
    two_x = (2.0 * x)[:, None]
    b1 = np.zeros((x.shape[0], d))
    b2 = np.zeros((x.shape[0], d))
    for j in range(m - 1, 0, -1):
        b1, b2 = coeffs[j] + two_x * b1 - b2, b1
    return coeffs[0] + x[:, None] * b1 - b2


def cos_moments(theta: np.ndarray, values: np.ndarray, k_max: int) -> np.ndarray:
    """Return ``S[k, c] = sum_i values[i, c] * cos(k * theta[i])`` for k <= k_max."""
    m = np.arange(k_max + 1, dtype=np.float64)
    basis = np.cos(np.outer(m, theta))
    return basis @ values


def delay_euler(
    x0: np.ndarray,
    weights: np.ndarray,
    lag_steps: np.ndarray,
    lag_frac: np.ndarray,
    decay: float,
    stim: np.ndarray,
    onset_step: int,
    step: float,
    n_steps: int,
    bound: float,
) -> tuple[np.ndarray, int]:
    """Explicit Euler for a delay-coupled tanh network.

    ``x(t_n - D_ij)`` is linearly interpolated between stored steps
    ``n - q_ij - 1`` (weight ``r_ij``) and ``n - q_ij`` (weight ``1 - r_ij``),
    where ``D_ij / step = q_ij + r_ij``. Steps at or before 0 read the constant
    history ``x0``.

    Returns
    -------
    traj : ndarray, shape (n_steps + 1, n)
    status : int
        -1 on success, otherwise the step index where ``|x| > bound``.
    """
    n = x0.shape[0]
    traj = np.empty((n_steps + 1, n))
    traj[0] = x0
    cols = np.broadcast_to(np.arange(n), (n, n))
    w_lo = lag_frac
    w_hi = 1.0 - lag_frac
    for k in range(n_steps):
        i_hi = np.maximum(k - lag_steps, 0)
        i_lo = np.maximum(k - lag_steps - 1, 0)
        delayed = w_hi * traj[i_hi, cols] + w_lo * traj[i_lo, cols]
        drive = (weights * np.tanh(delayed)).sum(axis=1)
        x = traj[k]
        rhs = -decay * x + drive
        if k >= onset_step:
            rhs = rhs + stim
        traj[k + 1] = x + step * rhs
        if not np.all(np.abs(traj[k + 1]) <= bound):
            return traj, k + 1
    return traj, -1
