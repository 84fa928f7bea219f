# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops; see ``_pykernels`` for the reference."""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, fabs, tanh

cnp.import_array()


def clenshaw(double[:, ::1] coeffs, double[::1] x):
    cdef Py_ssize_t m = coeffs.shape[0]
    cdef Py_ssize_t d = coeffs.shape[1]
    cdef Py_ssize_t n = x.shape[0]
    out = np.empty((n, d))
    cdef double[:, ::1] res = out
    cdef Py_ssize_t i, j, c
    cdef double xi, two_x, b1, b2, tmp
    for i in range(n):
        xi = x[i]
        two_x = 2.0 * xi
        for c in range(d):
            b1 = 0.0
            b2 = 0.0
            for j in range(m - 1, 0, -1):
                tmp = coeffs[j, c] + two_x * b1 - b2
                b2 = b1
                b1 = tmp
            res[i, c] = coeffs[0, c] + xi * b1 - b2
    return out


def cos_moments(double[::1] theta, double[:, ::1] values, int k_max):
    cdef Py_ssize_t n = theta.shape[0]
    cdef Py_ssize_t d = values.shape[1]
    out = np.zeros((k_max + 1, d))
    cdef double[:, ::1] acc = out
    cdef Py_ssize_t i, k, c
    cdef double ct, two_ct, ck, ckm1, tmp, v
    for i in range(n):
        ct = cos(theta[i])
        two_ct = 2.0 * ct
        for c in range(d):
            v = values[i, c]
            acc[0, c] += v
            if k_max >= 1:
                acc[1, c] += v * ct
            ckm1 = 1.0
            ck = ct
            for k in range(2, k_max + 1):
                tmp = two_ct * ck - ckm1
                ckm1 = ck
                ck = tmp
                acc[k, c] += v * ck
    return out


def delay_euler(double[::1] x0, double[:, ::1] weights, long[:, ::1] lag_steps,
                double[:, ::1] lag_frac, double decay, double[::1] stim,
                long onset_step, double step, long n_steps, double bound):
    cdef Py_ssize_t n = x0.shape[0]
    traj_arr = np.empty((n_steps + 1, n))
    cdef double[:, ::1] traj = traj_arr
    cdef Py_ssize_t i, j
    cdef long k, q, i_hi, i_lo
    cdef double r, delayed, drive, xi, nxt
    for i in range(n):
        traj[0, i] = x0[i]
    for k in range(n_steps):
        for i in range(n):
            drive = 0.0
            for j in range(n):
                # sparse coupling; history is finite so skipped terms are exact zeros
                if weights[i, j] == 0.0:
                    continue
                q = lag_steps[i, j]
                r = lag_frac[i, j]
                i_hi = k - q
                if i_hi < 0:
                    i_hi = 0
                i_lo = k - q - 1
                if i_lo < 0:
                    i_lo = 0
                delayed = (1.0 - r) * traj[i_hi, j] + r * traj[i_lo, j]
                drive += weights[i, j] * tanh(delayed)
            xi = traj[k, i]
            nxt = -decay * xi + drive
            if k >= onset_step:
                nxt += stim[i]
            traj[k + 1, i] = xi + step * nxt
        for i in range(n):
            if not (fabs(traj[k + 1, i]) <= bound):
                return traj_arr, k + 1
    return traj_arr, -1
