"""Experiment datasets and the Nyström reference solver.

Two generators are provided:

* ``gen_ie_dataset``: trajectories of a linear integral equation whose kernel
  entries are built from hyperbolic functions, solved with ``nystrom_solve``
  and perturbed with Gaussian noise.
* ``gen_delay_dataset``: snapshots of a delay-coupled tanh network, a
  simplified stand-in for a whole-brain neural-mass simulation.

Every random draw comes from ``numpy.random.default_rng`` seeded with a tuple
``(seed, stream, index)``, so a sample does not depend on which other samples
were generated, or in what order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.interpolate import FloaterHormannInterpolator

from . import _kernels
from .chebyshev import time_map
from .errors import DivergedError, SingularSystemError
from .ie_core import Kind

log = logging.getLogger(__name__)

_STREAM_DATASET = 0
_STREAM_SAMPLE = 1
_STREAM_NOISE = 2
_STREAM_SUBSET = 3

IE_KIND = "synthetic-ie"
DELAY_KIND = "delay-net"


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.times.ndim != 1 or self.times.shape[0] < 2:
            raise ValueError("a trajectory needs at least two time points")
        if self.values.shape[0] != self.times.shape[0]:
            raise ValueError("times and values have different lengths")
        if not np.all(np.diff(self.times) > 0):
            raise ValueError("trajectory times must be strictly increasing")
        if not np.all(np.isfinite(self.values)) or not np.all(np.isfinite(self.times)):
            raise ValueError("trajectory contains non-finite entries")

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.times.shape[0]


@dataclass
class Dataset:
    samples: list[Trajectory]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = {s.dim for s in self.samples}
        if len(dims) > 1:
            raise ValueError(f"samples disagree on dimension: {sorted(dims)}")
        if self.samples and "dim" in self.meta and self.meta["dim"] != self.samples[0].dim:
            raise ValueError("meta dim disagrees with the samples")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def dim(self) -> int:
        return self.samples[0].dim if self.samples else int(self.meta["dim"])

    @property
    def tmap(self):
        return time_map(self.meta["t_min"], self.meta["t_max"])

    def subset(self, indices: Sequence[int], **meta_updates) -> "Dataset":
        meta = dict(self.meta)
        meta.update(meta_updates)
        return Dataset([self.samples[i] for i in indices], meta)


# --------------------------------------------------------------------------
# Nyström oracle
# --------------------------------------------------------------------------

def trapezoid_rule(n_quad: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.linspace(-1.0, 1.0, n_quad)
    w = np.full(n_quad, 2.0 / (n_quad - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return x, w


def _quadrature_weights(kind: Kind, n_quad: int) -> np.ndarray:
    """``W[i, j]``: weight of node ``j`` in the integral defining row ``i``."""
    x, w = trapezoid_rule(n_quad)
    if kind is Kind.FREDHOLM:
        return np.tile(w, (n_quad, 1))
    # causal trapezoid on [x_0, x_i]
    h = 2.0 / (n_quad - 1)
    wq = np.tril(np.full((n_quad, n_quad), h))
    wq[:, 0] = 0.5 * h
    wq[np.diag_indices(n_quad)] = 0.5 * h
    wq[0, 0] = 0.0
    return wq


def _as_matrix_kernel(values: np.ndarray, shape: tuple[int, int], d: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.shape == shape:
        values = values[..., None, None]
    return np.broadcast_to(values, (*shape, d, d))


class NystromSystem:
    """Factorised trapezoid-Nyström system for one kernel, reusable across free terms."""

    def __init__(self, kind, lam: float, K, n_quad: int, d: int):
        self.kind = Kind.parse(kind)
        if n_quad < 8:
            raise ValueError("n_quad must be >= 8")
        self.lam = float(lam)
        self.d = d
        self.x, _ = trapezoid_rule(n_quad)
        kx = _as_matrix_kernel(K(self.x[:, None], self.x[None, :]), (n_quad, n_quad), d)
        wq = _quadrature_weights(self.kind, n_quad)
        # A[(i, a), (j, b)] = delta - lam * wq[i, j] * K_ab(x_i, x_j)
        op = (wq[:, :, None, None] * kx).transpose(0, 2, 1, 3).reshape(n_quad * d, n_quad * d)
        system = np.eye(n_quad * d) - self.lam * op
        if self.lam != 0.0:
            cond = np.linalg.cond(system)
            if not np.isfinite(cond) or cond > 1e12:
                raise SingularSystemError(
                    f"Nyström system is singular (cond={cond:.3g}) at lambda={self.lam}"
                )
        try:
            self._lu = scipy.linalg.lu_factor(system, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SingularSystemError(str(exc)) from exc

    def solve(self, f: Callable[[np.ndarray], np.ndarray], times) -> Trajectory:
        times = np.asarray(times, dtype=np.float64)
        n_quad, d = self.x.shape[0], self.d
        fx = np.asarray(f(self.x), dtype=np.float64).reshape(n_quad, d)
        ft = np.asarray(f(times), dtype=np.float64).reshape(times.shape[0], d)
        if self.lam == 0.0:
            return Trajectory(times, ft)
        y = scipy.linalg.lu_solve(self._lu, fx.reshape(-1)).reshape(n_quad, d)
        correction = FloaterHormannInterpolator(self.x, y - fx, d=5)(times)
        return Trajectory(times, ft + np.asarray(correction).reshape(times.shape[0], d))


def nystrom_solve(
    kind,
    lam: float,
    f: Callable[[np.ndarray], np.ndarray],
    K: Callable[[np.ndarray, np.ndarray], np.ndarray],
    n_quad: int,
    times,
) -> Trajectory:
    """Solve ``y = f + lam * int K(t, s) y(s) ds`` on [-1, 1] by trapezoid Nyström.

    Parameters
    ----------
    kind : Kind or str
        Fredholm integrates over [-1, 1]; Volterra over [-1, t] with the
        trapezoid rule restricted to nodes at or before each row.
    f : callable
        Vectorised free term, ``f(x)`` with ``x`` shape (n,) returning (n,) or (n, d).
    K : callable
        Vectorised kernel, ``K(t, s)`` for broadcast arrays returning shape
        ``(..., d, d)`` (or ``(...)`` when d = 1).
    n_quad : int
        Number of equispaced quadrature nodes (>= 8).
    times : array
        Evaluation points in [-1, 1].

    Returns
    -------
    Trajectory
        The solution at ``times``: the free term plus a Floater-Hormann
        barycentric interpolant of the nodal integral part.

    Raises
    ------
    SingularSystemError
        When ``lam`` sits at (or numerically next to) a characteristic value.
    """
    x, _ = trapezoid_rule(max(n_quad, 8))
    d = np.asarray(f(x[:2]), dtype=np.float64).reshape(2, -1).shape[1]
    return NystromSystem(kind, lam, K, n_quad, d).solve(f, times)


def operator_norm_estimate(kind, K, d: int, n_quad: int = 200) -> float:
    """Discrete-L2 norm of the quadrature operator ``y -> int K(t, s) y(s) ds``."""
    kind = Kind.parse(kind)
    x, w = trapezoid_rule(n_quad)
    kx = _as_matrix_kernel(K(x[:, None], x[None, :]), (n_quad, n_quad), d)
    wq = _quadrature_weights(kind, n_quad)
    sw = np.sqrt(w)
    # symmetrise with the quadrature inner product: D^1/2 M D^-1/2
    scaled = (sw[:, None] * wq / sw[None, :])[:, :, None, None] * kx
    op = scaled.transpose(0, 2, 1, 3).reshape(n_quad * d, n_quad * d)
    return float(np.linalg.norm(op, 2))


# --------------------------------------------------------------------------
# synthetic integral-equation dataset
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HyperbolicKernel:
    """``K_ij(t, s) = a_ij tanh(b_ij t + c_ij s) + e_ij sech(g_ij s)``."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    e: np.ndarray
    g: np.ndarray

    @classmethod
    def random(cls, rng: np.random.Generator, d: int) -> "HyperbolicKernel":
        return cls(*(rng.uniform(-1.0, 1.0, size=(d, d)) for _ in range(5)))

    def __call__(self, t, s):
        t = np.asarray(t, dtype=np.float64)[..., None, None]
        s = np.asarray(s, dtype=np.float64)[..., None, None]
        return self.a * np.tanh(self.b * t + self.c * s) + self.e / np.cosh(self.g * s)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in "abceg"}


def _cheb_poly(coeffs: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    def f(x):
        return np.polynomial.chebyshev.chebval(np.asarray(x, dtype=np.float64), coeffs).T
    return f


DEFAULT_FREE_TERM_SCALES = (1.0, 0.05, 0.05, 0.05)


def gen_ie_dataset(
    n_samples: int,
    n_points: int = 100,
    d: int = 2,
    lam: float = 1.0,
    noise_sigma: float = 0.05,
    seed: int = 0,
    *,
    kind="fredholm",
    t_min: float = 0.0,
    t_max: float = 1.0,
    n_quad: int = 200,
    free_term_scales: Sequence[float] = DEFAULT_FREE_TERM_SCALES,
    max_norm: float = 0.5,
) -> Dataset:
    """Noisy solutions of a linear integral equation with a hyperbolic kernel.

    The kernel is drawn once per dataset. Each sample's free term is a
    degree-3 Chebyshev polynomial whose mode ``k`` coefficient is uniform in
    ``[-free_term_scales[k], free_term_scales[k]]``. ``lam`` is reduced so the
    discretised operator norm of ``lam * K`` is at most ``max_norm``; on a
    singular system it is halved, up to three times.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if d < 1:
        raise ValueError("d must be >= 1")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    kind = Kind.parse(kind)
    scales = np.asarray(free_term_scales, dtype=np.float64)
    rng = np.random.default_rng([seed, _STREAM_DATASET])
    kernel = HyperbolicKernel.random(rng, d)
    norm = operator_norm_estimate(kind, kernel, d, n_quad)
    lam_eff = float(lam)
    if norm > 0 and abs(lam_eff) * norm > max_norm:
        lam_eff = math.copysign(max_norm / norm, lam_eff)
    tmap = time_map(t_min, t_max)
    times = np.linspace(t_min, t_max, n_points)
    x = tmap.to_cheb(times)

    system = None
    retries = 0
    while system is None:
        try:
            system = NystromSystem(kind, lam_eff, kernel, n_quad, d)
        except SingularSystemError:
            if retries >= 3:
                raise
            retries += 1
            lam_eff *= 0.5
            log.warning("singular system, lambda rescaled to %g", lam_eff)

    samples = []
    free_terms = []
    for i in range(n_samples):
        srng = np.random.default_rng([seed, _STREAM_SAMPLE, i])
        coeffs = srng.uniform(-1.0, 1.0, size=(scales.shape[0], d)) * scales[:, None]
        clean = system.solve(_cheb_poly(coeffs), x)
        nrng = np.random.default_rng([seed, _STREAM_NOISE, i])
        noisy = clean.values + noise_sigma * nrng.standard_normal(clean.values.shape)
        samples.append(Trajectory(times.copy(), noisy))
        free_terms.append(coeffs.tolist())
    meta = {
        "kind": IE_KIND,
        "dim": d,
        "n_points": n_points,
        "t_min": float(t_min),
        "t_max": float(t_max),
        "noise_sigma": float(noise_sigma),
        "seed": int(seed),
        "generator": {
            "equation": kind.value,
            "lam_requested": float(lam),
            "lam": lam_eff,
            "operator_norm": norm,
            "n_quad": n_quad,
            "free_term_scales": scales.tolist(),
            "kernel": kernel.to_dict(),
            "free_terms": free_terms,
        },
    }
    return Dataset(samples, meta)


# --------------------------------------------------------------------------
# delay network dataset
# --------------------------------------------------------------------------

@dataclass
class DelayNetSpec:
    """Delay-coupled network ``x_i' = -decay x_i + sum_j W_ij tanh(x_j(t - D_ij)) + stim_i(t)``.

    ``stim_i(t) = stim_amplitude * stim_pattern[i]`` for ``t >= stim_onset``.
    """

    weights: np.ndarray
    delays: np.ndarray
    decay: float = 1.0
    stim_pattern: np.ndarray | None = None
    stim_amplitude: float = 0.0
    stim_onset: float = 0.0
    step: float = 0.01
    t_end: float = 4.0
    history_scale: float = 1.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.delays = np.asarray(self.delays, dtype=np.float64)
        n = self.weights.shape[0]
        if self.weights.shape != (n, n) or self.delays.shape != (n, n):
            raise ValueError("weights and delays must be square and of equal size")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("coupling weights must be finite")
        if np.any(self.delays < 0) or not np.all(np.isfinite(self.delays)):
            raise ValueError("delays must be finite and >= 0")
        if not self.step > 0 or not self.t_end > 0:
            raise ValueError("step and t_end must be positive")
        if self.stim_pattern is None:
            self.stim_pattern = np.zeros(n)
        self.stim_pattern = np.asarray(self.stim_pattern, dtype=np.float64)
        if self.stim_pattern.shape != (n,):
            raise ValueError("stim_pattern must have one entry per node")

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def random(
        cls,
        n_nodes: int = 80,
        seed: int = 0,
        *,
        coupling: float = 1.5,
        density: float = 0.2,
        max_delay: float = 1.0,
        stim_amplitude: float = 1.0,
        stim_onset: float = 1.0,
        **kwargs,
    ) -> "DelayNetSpec":
        """Sparse random coupling with uniform delays and a random stimulus pattern."""
        if n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        rng = np.random.default_rng([seed, _STREAM_DATASET])
        mask = rng.random((n_nodes, n_nodes)) < density
        np.fill_diagonal(mask, False)
        w = rng.standard_normal((n_nodes, n_nodes)) * mask
        w *= coupling / np.sqrt(max(1.0, density * n_nodes))
        delays = rng.uniform(0.0, max_delay, size=(n_nodes, n_nodes))
        pattern = (rng.random(n_nodes) < 0.25).astype(np.float64)
        return cls(w, delays, stim_pattern=pattern, stim_amplitude=stim_amplitude,
                   stim_onset=stim_onset, **kwargs)

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "decay": self.decay,
            "stim_amplitude": self.stim_amplitude,
            "stim_onset": self.stim_onset,
            "step": self.step,
            "t_end": self.t_end,
            "history_scale": self.history_scale,
            "weights": self.weights.tolist(),
            "delays": self.delays.tolist(),
            "stim_pattern": self.stim_pattern.tolist(),
        }


def integrate_delay_net(spec: DelayNetSpec, x0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Euler-integrate from constant history ``x0``; returns (step times, states)."""
    n_steps = int(round(spec.t_end / spec.step))
    lag = spec.delays / spec.step
    lag_steps = np.floor(lag).astype(np.int64)
    lag_frac = lag - lag_steps
    onset = int(math.ceil(spec.stim_onset / spec.step - 1e-9))
    stim = spec.stim_amplitude * spec.stim_pattern
    traj, status = _kernels.delay_euler(
        np.ascontiguousarray(x0, dtype=np.float64),
        np.ascontiguousarray(spec.weights),
        np.ascontiguousarray(lag_steps),
        np.ascontiguousarray(lag_frac),
        float(spec.decay),
        np.ascontiguousarray(stim),
        onset,
        float(spec.step),
        n_steps,
        1e6,
    )
    if status >= 0:
        raise DivergedError(f"state exceeded 1e6 at step {status}")
    return np.arange(n_steps + 1) * spec.step, traj


def gen_delay_dataset(spec: DelayNetSpec, n_samples: int, n_points: int = 20, seed: int = 0) -> Dataset:
    """Snapshots of the delay network from per-sample random constant histories."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    snap = np.linspace(0.0, spec.t_end, n_points)
    samples = []
    for i in range(n_samples):
        rng = np.random.default_rng([seed, _STREAM_SAMPLE, i])
        x0 = spec.history_scale * rng.uniform(-1.0, 1.0, size=spec.n_nodes)
        try:
            t, traj = integrate_delay_net(spec, x0)
        except DivergedError as exc:
            raise DivergedError(f"sample {i}: {exc}") from exc
        values = np.column_stack([np.interp(snap, t, traj[:, j]) for j in range(spec.n_nodes)])
        samples.append(Trajectory(snap.copy(), values))
    meta = {
        "kind": DELAY_KIND,
        "dim": spec.n_nodes,
        "n_points": n_points,
        "t_min": 0.0,
        "t_max": float(spec.t_end),
        "noise_sigma": 0.0,
        "seed": int(seed),
        "generator": {
            "model": "delay-coupled tanh network (stand-in for a neural-mass simulator)",
            **spec.to_dict(),
        },
    }
    return Dataset(samples, meta)


# --------------------------------------------------------------------------
# resampling and splitting
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Regular:
    keep_every: int

    def __post_init__(self):
        if self.keep_every < 1:
            raise ValueError("keep_every must be >= 1")

    def __str__(self):
        return f"regular:{self.keep_every}"


@dataclass(frozen=True)
class IrregularFraction:
    p: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")

    def __str__(self):
        return f"irregular:{self.p}:{self.seed}"


def parse_downsample(text: str):
    """Parse ``regular:K`` or ``irregular:P[:SEED]``."""
    parts = text.strip().split(":")
    try:
        if parts[0] == "regular" and len(parts) == 2:
            return Regular(int(parts[1]))
        if parts[0] == "irregular" and len(parts) in (2, 3):
            return IrregularFraction(float(parts[1]), int(parts[2]) if len(parts) == 3 else 0)
    except ValueError as exc:
        raise ValueError(f"bad downsample spec {text!r}: {exc}") from None
    raise ValueError(f"bad downsample spec {text!r}; use regular:K or irregular:P[:SEED]")


def downsample(ds: Dataset, mode) -> Dataset:
    """Keep a subset of each trajectory's time points.

    ``Regular(k)`` keeps indices 0, k, 2k, ...; ``IrregularFraction(p, seed)``
    keeps both endpoints plus a per-sample seeded random subset of interior
    points, ``ceil(p * n)`` points in total. The dataset's time range is kept.
    """
    out = []
    for i, traj in enumerate(ds.samples):
        n = len(traj)
        if isinstance(mode, Regular):
            idx = np.arange(0, n, mode.keep_every)
        elif isinstance(mode, IrregularFraction):
            keep = math.ceil(mode.p * n - 1e-9)
            if keep < 2:
                raise ValueError(f"fraction {mode.p} keeps fewer than 2 of {n} points")
            rng = np.random.default_rng([mode.seed, _STREAM_SUBSET, i])
            interior = rng.choice(np.arange(1, n - 1), size=keep - 2, replace=False)
            idx = np.sort(np.concatenate([[0, n - 1], interior]))
        else:
            raise TypeError(f"unknown downsample mode {mode!r}")
        if idx.shape[0] < 2:
            raise ValueError("downsampling leaves fewer than 2 points")
        out.append(Trajectory(traj.times[idx], traj.values[idx]))
    meta = dict(ds.meta)
    meta["downsample"] = str(mode)
    return Dataset(out, meta)


def split(ds: Dataset, fractions=(0.8, 0.1, 0.1), seed: int = 0) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded disjoint partition of the samples into train/val/test."""
    fr = np.asarray(fractions, dtype=np.float64)
    if fr.shape != (3,) or np.any(fr <= 0) or not math.isclose(fr.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("fractions must be three positive numbers summing to 1")
    n = len(ds)
    n_train = int(round(fr[0] * n))
    n_val = int(round(fr[1] * n))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"split of {n} samples by {tuple(fr)} leaves an empty part")
    perm = np.random.default_rng([seed, _STREAM_SUBSET]).permutation(n)
    parts = (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])
    return tuple(ds.subset(sorted(p.tolist())) for p in parts)
