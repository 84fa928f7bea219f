"""Training loop, evaluation metrics and the interpolation/benchmark protocols."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chebyshev import cheb_nodes, eval_series_grid, mc_buffer_bytes, project_mc, time_map
from .datagen import Dataset, Trajectory, downsample
from .errors import NonFiniteError
from .ie_core import Kind, SolverConfig
from .neural import (
    AdamState,
    MLPParams,
    ProblemTemplate,
    adam_step,
    init_params,
    loss_and_grad,
    mlp_spec,
    solve_batch,
)

log = logging.getLogger(__name__)

IMPROVEMENT_THRESHOLD = 1e-7
EPOCH_CSV_HEADER = ("epoch", "train_mse", "val_mse", "walltime_s")
BENCHMARK_CSV_HEADER = (
    "name", "params", "mc_samples", "memory_bytes", "walltime_s",
    "test_mse_mean", "test_mse_std", "interp_mse_mean", "interp_mse_std",
)


@dataclass(frozen=True)
class TrainConfig:
    n: int = 16
    hidden: tuple[int, ...] = (32,)
    kind: Kind = Kind.FREDHOLM
    lam: float = 1.0
    lr: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 1000
    patience_epochs: int = 200
    walltime_cap_s: float = 3600.0
    n_init_points: int = 2
    free_term_degree: int | None = None
    mc_samples: int = 1000
    seed: int = 0
    output_scale: float = 1.0
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.n_init_points < 2:
            raise ValueError("n_init_points must be >= 2")
        if self.patience_epochs < 1:
            raise ValueError("patience_epochs must be >= 1")
        if self.batch_size < 1 or self.mc_samples < 1 or self.max_epochs < 0:
            raise ValueError("batch_size and mc_samples must be >= 1, max_epochs >= 0")
        if not (self.lr > 0 and self.walltime_cap_s > 0):
            raise ValueError("lr and walltime_cap_s must be positive")
        if self.free_term_degree is not None and self.free_term_degree < 0:
            raise ValueError("free_term_degree must be >= 0")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be >= 1")

    @property
    def template(self) -> ProblemTemplate:
        return ProblemTemplate(self.kind, self.lam)


@dataclass
class EpochLog:
    epoch: int
    train_mse: float
    val_mse: float
    walltime_s: float


@dataclass
class Metrics:
    epochs: list[EpochLog] = field(default_factory=list)
    mse_mean: float = float("nan")
    mse_std: float = float("nan")
    per_sample: np.ndarray | None = None
    walltime_s: float = 0.0
    memory_bytes: int = 0
    n_params: int = 0
    best_epoch: int | None = None
    status: str = "ok"
    projection_mse: float = float("nan")


def new_model(config: TrainConfig, dim: int) -> MLPParams:
    m = config.n + 1
    return init_params(
        mlp_spec(m, dim, config.hidden), config.seed, m, dim, output_scale=config.output_scale
    )


# --------------------------------------------------------------------------
# data-side helpers
# --------------------------------------------------------------------------

def make_free_term(times, values, n: int, degree: int | None = None) -> np.ndarray:
    """Least-squares Chebyshev fit to the initial points, zero-padded to ``n + 1`` modes.

    ``times`` are already mapped to [-1, 1]. The default degree is
    ``min(p - 1, 2)`` for ``p`` points.
    """
    t = np.asarray(times, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    p = t.shape[0]
    if p < 2:
        raise ValueError("at least two initial points are required")
    if y.shape[0] != p:
        raise ValueError("times and values have different lengths")
    if np.unique(t).shape[0] != p:
        raise ValueError("initial points contain duplicate times")
    deg = min(p - 1, 2) if degree is None else min(int(degree), p - 1)
    deg = min(deg, n)
    vander = np.polynomial.chebyshev.chebvander(t, deg)
    coef, *_ = np.linalg.lstsq(vander, y, rcond=None)
    out = np.zeros((n + 1, y.shape[1]))
    out[: deg + 1] = coef
    return out


def project_trajectory(traj: Trajectory, n: int, mc_samples: int, seed: int,
                       tmap=None) -> np.ndarray:
    """Monte Carlo Chebyshev projection of the piecewise-linear interpolant of ``traj``.

    Times are mapped with ``tmap`` (default: the trajectory's own range).
    """
    if tmap is None:
        tmap = time_map(traj.times[0], traj.times[-1])
    x = tmap.to_cheb(traj.times)
    vals = traj.values

    def interp(s):
        return np.column_stack([np.interp(s, x, vals[:, c]) for c in range(vals.shape[1])])

    return project_mc(interp, n, mc_samples, seed)


@dataclass
class _Prepared:
    free: np.ndarray
    targets: list[np.ndarray]
    times: list[np.ndarray]


def _prepare(init_source: Dataset, target: Dataset, config: TrainConfig) -> _Prepared:
    """Free terms from ``init_source`` trajectories, targets from ``target``."""
    if len(init_source) != len(target):
        raise ValueError("initialisation and target datasets differ in size")
    tmap = target.tmap
    p = config.n_init_points
    free, targets, times = [], [], []
    for src, tgt in zip(init_source.samples, target.samples):
        if len(src) < p:
            raise ValueError(f"trajectory has {len(src)} points, {p} initial points requested")
        x0 = tmap.to_cheb(src.times[:p])
        free.append(make_free_term(x0, src.values[:p], config.n, config.free_term_degree))
        targets.append(tgt.values)
        times.append(np.asarray(tmap.to_cheb(tgt.times)))
    return _Prepared(np.stack(free), targets, times)


def _check_compatible(model: MLPParams, ds: Dataset, config: TrainConfig):
    if model.dim != ds.dim:
        raise ValueError(f"model has {model.dim} channels, dataset has {ds.dim}")
    if model.n_modes != config.n + 1:
        raise ValueError(f"model has {model.n_modes} modes, config needs {config.n + 1}")


def _score(model: MLPParams, prep: _Prepared, config: TrainConfig) -> np.ndarray:
    """Per-sample MSE of the solved trajectories against the targets."""
    grid = cheb_nodes(config.n)
    u, _ = solve_batch(model, prep.free, config.template, grid, config.solver)
    out = np.empty(len(prep.targets))
    for k, (y, t) in enumerate(zip(prep.targets, prep.times)):
        err = eval_series_grid(u[k], t) - y
        out[k] = np.mean(err * err)
    return out


def _summary(per_sample: np.ndarray) -> Metrics:
    return Metrics(
        mse_mean=float(per_sample.mean()),
        mse_std=float(per_sample.std()),
        per_sample=per_sample,
    )


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------

def train(
    model: MLPParams,
    ds_train: Dataset,
    ds_val: Dataset,
    config: TrainConfig,
) -> tuple[MLPParams, Metrics]:
    """Adam on shuffled mini-batches with validation-based early stopping.

    Returns the parameters with the best validation MSE. ``Metrics.status`` is
    one of ``max_epochs``, ``converged`` (patience exhausted), ``walltime`` or
    ``nonfinite``.
    """
    _check_compatible(model, ds_train, config)
    if ds_val.dim != ds_train.dim:
        raise ValueError("training and validation data differ in dimension")
    t0 = time.perf_counter()
    grid = cheb_nodes(config.n)
    train_prep = _prepare(ds_train, ds_train, config)
    val_prep = _prepare(ds_val, ds_val, config)
    projections = [
        project_trajectory(s, config.n, config.mc_samples, config.seed + i, ds_train.tmap)
        for i, s in enumerate(ds_train.samples)
    ]
    metrics = Metrics(n_params=model.total_params, status="max_epochs")
    state = AdamState(lr=config.lr)
    params = model.copy()
    best = params.copy()
    best_val = math.inf
    since_best = 0
    peak_tape = 0
    n = len(ds_train)
    samples = [
        (train_prep.free[k], train_prep.targets[k], train_prep.times[k]) for k in range(n)
    ]

    for epoch in range(1, config.max_epochs + 1):
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        total = 0.0
        try:
            for start in range(0, n, config.batch_size):
                idx = order[start:start + config.batch_size]
                res = loss_and_grad(params, config.template, [samples[k] for k in idx],
                                    grid, config.solver)
                peak_tape = max(peak_tape, res.tape_bytes)
                total += res.loss * idx.shape[0]
                params, state = adam_step(params, res.grads, state)
            val_mse = float(_score(params, val_prep, config).mean())
            if not np.isfinite(val_mse):
                raise NonFiniteError("validation loss is not finite")
        except NonFiniteError as exc:
            log.warning("epoch %d: %s; keeping last good parameters", epoch, exc)
            metrics.status = "nonfinite"
            break
        elapsed = time.perf_counter() - t0
        metrics.epochs.append(EpochLog(epoch, total / n, val_mse, elapsed))
        # patience counts from the last real improvement; best tracks the minimum
        if val_mse < best_val - IMPROVEMENT_THRESHOLD:
            since_best = 0
        else:
            since_best += 1
        if val_mse < best_val:
            best_val = val_mse
            best = params.copy()
            metrics.best_epoch = epoch
        log.debug("epoch %d train %.6g val %.6g", epoch, total / n, val_mse)
        if since_best >= config.patience_epochs:
            metrics.status = "converged"
            break
        if elapsed >= config.walltime_cap_s:
            metrics.status = "walltime"
            break

    metrics.walltime_s = time.perf_counter() - t0
    metrics.memory_bytes = (
        2 * 8 * best.total_params
        + state.nbytes()
        + peak_tape
        + mc_buffer_bytes(config.mc_samples, ds_train.dim)
    )
    if metrics.best_epoch is not None:
        metrics.mse_mean = best_val
    # coefficient-space distance to the projected data; diagnostic only
    try:
        u, _ = solve_batch(best, train_prep.free, config.template, grid, config.solver)
        metrics.projection_mse = float(np.mean([(u[k] - projections[k]) ** 2 for k in range(n)]))
    except NonFiniteError:
        metrics.projection_mse = float("nan")
    return best, metrics


def evaluate(model: MLPParams, ds_test: Dataset, config: TrainConfig) -> Metrics:
    """Solve every sample from its initial points; MSE over all observed points."""
    _check_compatible(model, ds_test, config)
    t0 = time.perf_counter()
    m = _summary(_score(model, _prepare(ds_test, ds_test, config), config))
    m.walltime_s = time.perf_counter() - t0
    m.n_params = model.total_params
    return m


def interpolation_eval(model: MLPParams, ds_full: Dataset, mode, config: TrainConfig) -> Metrics:
    """Initialise from the downsampled trajectories, score on every point of ``ds_full``."""
    _check_compatible(model, ds_full, config)
    t0 = time.perf_counter()
    m = _summary(_score(model, _prepare(downsample(ds_full, mode), ds_full, config), config))
    m.walltime_s = time.perf_counter() - t0
    m.n_params = model.total_params
    return m


# --------------------------------------------------------------------------
# benchmark
# --------------------------------------------------------------------------

@dataclass
class BenchmarkCase:
    name: str
    config: TrainConfig
    ds_train: Dataset
    ds_val: Dataset
    ds_test: Dataset
    interp_mode: object | None = None
    ds_train_full: Dataset | None = None
    ds_test_full: Dataset | None = None


def benchmark(cases: Sequence[BenchmarkCase]) -> list[dict]:
    """Train and evaluate every case; one row per case (failures give NaN rows).

    When ``interp_mode`` is set, training uses the downsampled training data
    and the interpolation columns score the test set at full resolution.
    """
    rows = []
    for case in cases:
        row = dict.fromkeys(BENCHMARK_CSV_HEADER, float("nan"))
        row.update(name=case.name, mc_samples=case.config.mc_samples)
        try:
            model = new_model(case.config, case.ds_train.dim)
            row["params"] = model.total_params
            trained, tm = train(model, case.ds_train, case.ds_val, case.config)
            test = evaluate(trained, case.ds_test, case.config)
            row.update(
                memory_bytes=tm.memory_bytes,
                walltime_s=tm.walltime_s,
                test_mse_mean=test.mse_mean,
                test_mse_std=test.mse_std,
            )
            if case.interp_mode is not None:
                full = case.ds_test_full if case.ds_test_full is not None else case.ds_test
                it = interpolation_eval(trained, full, case.interp_mode, case.config)
                row.update(interp_mse_mean=it.mse_mean, interp_mse_std=it.mse_std)
        except Exception as exc:  # noqa: BLE001 - a failed row must not stop the table
            log.error("benchmark case %s failed: %s", case.name, exc)
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows

