"""Spectral-domain integrand network, unrolled-solver gradients and Adam.

The network maps ``(flattened coefficients of u, t_i)`` to the coefficients of
the integrand at collocation point ``t_i``. Coefficients are flattened
column-major: all modes of channel 0, then channel 1, and so on. The output is
reshaped the same way.

Weights are stored as ``(in_dim, out_dim)`` matrices so a layer is
``x @ W + b`` on row-stacked inputs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chebyshev import (
    CollocationGrid,
    as_coeffs,
    eval_series_grid,
    node_projection_matrix,
    vandermonde,
)
from .errors import NonFiniteError
from .ie_core import Kind, SolveReport, SolverConfig, integration_matrix


class Activation(str, enum.Enum):
    TANH = "tanh"
    IDENTITY = "identity"


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: Activation = Activation.TANH

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dimensions must be >= 1")
        object.__setattr__(self, "activation", Activation(self.activation))


def mlp_spec(n_modes: int, dim: int, hidden: Sequence[int] = (32,)) -> list[LayerSpec]:
    """Layer chain ``n_modes*dim + 1 -> hidden... -> n_modes*dim``."""
    widths = [n_modes * dim + 1, *hidden, n_modes * dim]
    specs = [LayerSpec(a, b, Activation.TANH) for a, b in zip(widths[:-2], widths[1:-1])]
    specs.append(LayerSpec(widths[-2], widths[-1], Activation.IDENTITY))
    return specs


def _check_chain(specs: Sequence[LayerSpec], n_modes: int | None, dim: int | None):
    if not specs:
        raise ValueError("layer spec list is empty")
    for prev, nxt in zip(specs[:-1], specs[1:]):
        if prev.out_dim != nxt.in_dim:
            raise ValueError(
                f"inconsistent chain: {prev.out_dim} outputs feed {nxt.in_dim} inputs"
            )
    if specs[-1].activation is not Activation.IDENTITY:
        raise ValueError("final layer must use the identity activation")
    if n_modes is not None and dim is not None:
        width = n_modes * dim
        if specs[0].in_dim != width + 1 or specs[-1].out_dim != width:
            raise ValueError(
                f"network must map {width + 1} inputs to {width} outputs "
                f"for {n_modes} modes x {dim} channels"
            )


@dataclass
class MLPParams:
    specs: list[LayerSpec]
    layers: list[tuple[np.ndarray, np.ndarray]]
    n_modes: int | None = None
    dim: int | None = None

    def __post_init__(self):
        _check_chain(self.specs, self.n_modes, self.dim)
        if len(self.layers) != len(self.specs):
            raise ValueError("one (weight, bias) pair per layer spec is required")
        for spec, (w, b) in zip(self.specs, self.layers):
            if w.shape != (spec.in_dim, spec.out_dim) or b.shape != (spec.out_dim,):
                raise ValueError("parameter shapes do not match the layer specs")

    @property
    def total_params(self) -> int:
        return sum(s.in_dim * s.out_dim + s.out_dim for s in self.specs)

    def flat(self) -> np.ndarray:
        """All parameters, layer by layer, weights row-major then bias."""
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in self.layers])

    def with_flat(self, vec) -> "MLPParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.total_params,):
            raise ValueError(f"expected {self.total_params} values, got {vec.shape}")
        layers, pos = [], 0
        for s in self.specs:
            nw = s.in_dim * s.out_dim
            w = vec[pos:pos + nw].reshape(s.in_dim, s.out_dim).copy()
            pos += nw
            b = vec[pos:pos + s.out_dim].copy()
            pos += s.out_dim
            layers.append((w, b))
        return MLPParams(list(self.specs), layers, self.n_modes, self.dim)

    def copy(self) -> "MLPParams":
        return MLPParams(
            list(self.specs),
            [(w.copy(), b.copy()) for w, b in self.layers],
            self.n_modes,
            self.dim,
        )


def init_params(
    specs: Sequence[LayerSpec],
    seed: int,
    n_modes: int | None = None,
    dim: int | None = None,
    *,
    zero: bool = False,
    output_scale: float = 1.0,
) -> MLPParams:
    """Glorot-uniform weights and zero biases, deterministic per ``seed``.

    ``zero=True`` returns all-zero parameters. ``output_scale`` multiplies the
    final layer's weights (0 gives a network whose output starts at zero).
    """
    specs = list(specs)
    _check_chain(specs, n_modes, dim)
    rng = np.random.default_rng(seed)
    layers = []
    for i, s in enumerate(specs):
        if zero:
            w = np.zeros((s.in_dim, s.out_dim))
        else:
            lim = np.sqrt(6.0 / (s.in_dim + s.out_dim))
            w = rng.uniform(-lim, lim, size=(s.in_dim, s.out_dim))
            if i == len(specs) - 1:
                w = w * output_scale
        layers.append((w, np.zeros(s.out_dim)))
    return MLPParams(specs, layers, n_modes, dim)


def zeros_like_grads(params: MLPParams) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.layers]


def flatten_grads(grads) -> np.ndarray:
    return np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])


# --------------------------------------------------------------------------
# dense network
# --------------------------------------------------------------------------

def _mlp_forward(params: MLPParams, x: np.ndarray):
    acts = [x]
    a = x
    for spec, (w, b) in zip(params.specs, params.layers):
        z = a @ w + b
        a = np.tanh(z) if spec.activation is Activation.TANH else z
        acts.append(a)
    return a, acts


def _mlp_backward(params: MLPParams, acts, g_out: np.ndarray, grads) -> np.ndarray:
    g = g_out
    for layer in range(len(params.layers) - 1, -1, -1):
        spec = params.specs[layer]
        w, _ = params.layers[layer]
        if spec.activation is Activation.TANH:
            out = acts[layer + 1]
            g = g * (1.0 - out * out)
        gw, gb = grads[layer]
        gw += acts[layer].T @ g
        gb += g.sum(axis=0)
        g = g @ w.T
    return g


def _flatten_coeffs(u: np.ndarray) -> np.ndarray:
    # (..., M, d) -> (..., d*M), column-major per coefficient matrix
    return np.swapaxes(u, -1, -2).reshape(*u.shape[:-2], -1)


def _unflatten_coeffs(v: np.ndarray, n_modes: int, dim: int) -> np.ndarray:
    return np.swapaxes(v.reshape(*v.shape[:-1], dim, n_modes), -1, -2)


def _require_layout(params: MLPParams) -> tuple[int, int]:
    if params.n_modes is None or params.dim is None:
        raise ValueError("parameters carry no coefficient layout (n_modes, dim)")
    return params.n_modes, params.dim


# --------------------------------------------------------------------------
# tape
# --------------------------------------------------------------------------

class Tape:
    """Forward intermediates recorded for reverse-mode replay.

    Each record turns the cotangent of its output into the cotangent of its
    input while accumulating parameter gradients. ``backward`` replays the
    records newest first.
    """

    def __init__(self):
        self.records: list = []

    def __len__(self) -> int:
        return len(self.records)

    def push(self, record) -> None:
        self.records.append(record)

    def nbytes(self) -> int:
        return sum(r.nbytes() for r in self.records)

    def backward(self, params: MLPParams, cotangent):
        """Return ``(param_grads, input_cotangent)``."""
        grads = zeros_like_grads(params)
        cot = cotangent
        for rec in reversed(self.records):
            cot = rec.backward(params, cot, grads)
        return grads, cot


@dataclass
class _ForwardRecord:
    acts: list
    n_modes: int
    dim: int

    def nbytes(self) -> int:
        return sum(a.nbytes for a in self.acts)

    def backward(self, params, cot, grads):
        g_out = _flatten_coeffs(np.asarray(cot, dtype=np.float64))[None, :]
        g_in = _mlp_backward(params, self.acts, g_out, grads)
        return _unflatten_coeffs(g_in[0, :-1], self.n_modes, self.dim)


@dataclass
class _PicardRecord:
    active: np.ndarray
    acts: list
    quad: np.ndarray
    proj: np.ndarray
    lam: float
    rho: float

    def nbytes(self) -> int:
        return sum(a.nbytes for a in self.acts) + self.active.nbytes

    def backward(self, params, cot, grads):
        m, d = params.n_modes, params.dim
        idx = self.active
        n_active = idx.shape[0]
        n_nodes = self.quad.shape[0]
        g_next = cot[idx]
        g_nodes = np.einsum("mi,amc->aic", self.proj, self.rho * g_next)
        g_b = (self.lam * self.quad)[None, :, :, None] * g_nodes[:, :, None, :]
        g_h = _flatten_coeffs(g_b).reshape(n_active * n_nodes, m * d)
        g_x = _mlp_backward(params, self.acts, g_h, grads)
        g_u = g_x[:, : m * d].reshape(n_active, n_nodes, m * d).sum(axis=1)
        out = cot.copy()
        out[idx] = (1.0 - self.rho) * g_next + _unflatten_coeffs(g_u, m, d)
        return out


# --------------------------------------------------------------------------
# forward and solver
# --------------------------------------------------------------------------

def forward(params: MLPParams, u, t: float, tape: Tape | None = None) -> np.ndarray:
    """Integrand coefficients ``G_theta(u, t)``, shape ``(n_modes, dim)``."""
    m, d = _require_layout(params)
    u = as_coeffs(u, "u")
    if u.shape != (m, d):
        raise ValueError(f"u has shape {u.shape}, network expects {(m, d)}")
    x = np.concatenate([_flatten_coeffs(u), [float(t)]])[None, :]
    out, acts = _mlp_forward(params, x)
    if tape is not None:
        tape.push(_ForwardRecord(acts, m, d))
    return _unflatten_coeffs(out[0], m, d)


class NeuralIntegrand:
    """Adapter exposing the network through the integrand evaluator interface."""

    def __init__(self, params: MLPParams):
        self.params = params

    def spectral_integrand(self, u, t):
        return forward(self.params, u, t)

    def spectral_integrand_batch(self, u, ts):
        m, d = _require_layout(self.params)
        u = as_coeffs(u, "u")
        ts = np.asarray(ts, dtype=np.float64)
        flat = np.broadcast_to(_flatten_coeffs(u), (ts.shape[0], m * d))
        x = np.concatenate([flat, ts[:, None]], axis=1)
        out, _ = _mlp_forward(self.params, x)
        return _unflatten_coeffs(out, m, d)


@dataclass(frozen=True)
class ProblemTemplate:
    """Equation kind and lambda shared by every sample of a learning problem."""

    kind: Kind = Kind.FREDHOLM
    lam: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        if not np.isfinite(self.lam):
            raise ValueError("lambda must be finite")


@dataclass
class _SolverOperators:
    quad: np.ndarray
    proj: np.ndarray
    nodes_eval: np.ndarray
    points: np.ndarray


def _operators(kind: Kind, grid: CollocationGrid) -> _SolverOperators:
    return _SolverOperators(
        quad=integration_matrix(kind, grid),
        proj=node_projection_matrix(grid.n),
        nodes_eval=vandermonde(grid.points, grid.size),
        points=np.asarray(grid.points),
    )


def solve_batch(
    params: MLPParams,
    free_terms,
    template: ProblemTemplate,
    grid: CollocationGrid,
    config: SolverConfig | None = None,
    tape: Tape | None = None,
) -> tuple[np.ndarray, list[SolveReport]]:
    """Picard-solve one neural equation per free term, vectorised over samples.

    Each sample stops updating as soon as its own stopping rule fires, so the
    result and iteration counts equal separate per-sample solves.

    Parameters
    ----------
    free_terms : array, shape (B, n_modes, dim)

    Returns
    -------
    solutions : ndarray, shape (B, n_modes, dim)
    reports : list of SolveReport
    """
    config = config or SolverConfig()
    m, d = _require_layout(params)
    f = np.array(free_terms, dtype=np.float64)
    if f.ndim != 3 or f.shape[1:] != (m, d):
        raise ValueError(f"free terms must have shape (B, {m}, {d}), got {f.shape}")
    if grid.size != m:
        raise ValueError("collocation grid does not match the network's n_modes")
    ops = _operators(template.kind, grid)
    rho = config.relaxation
    lam = float(template.lam)
    n_samples = f.shape[0]
    n_nodes = grid.size
    f_nodes = np.einsum("ij,bjc->bic", ops.nodes_eval, f)
    t_col = np.repeat(ops.points[None, :, None], n_samples, axis=0)

    u = f.copy()
    reports = [SolveReport() for _ in range(n_samples)]
    active = np.arange(n_samples)
    for _ in range(config.max_iter):
        if active.size == 0:
            break
        ua = u[active]
        n_active = active.shape[0]
        flat = np.broadcast_to(_flatten_coeffs(ua)[:, None, :], (n_active, n_nodes, m * d))
        x = np.concatenate([flat, t_col[:n_active]], axis=2).reshape(n_active * n_nodes, -1)
        out, acts = _mlp_forward(params, x)
        b = _unflatten_coeffs(out.reshape(n_active, n_nodes, m * d), m, d)
        node_vals = f_nodes[active] + lam * np.einsum("ij,aijc->aic", ops.quad, b)
        w = np.einsum("mi,aic->amc", ops.proj, node_vals)
        u_next = w if rho == 1.0 else (1.0 - rho) * ua + rho * w
        bad = ~np.isfinite(u_next).all(axis=(1, 2))
        if bad.any():
            k = int(active[np.argmax(bad)])
            raise NonFiniteError(
                f"iterate {reports[k].iterations + 1} of sample {k} is not finite", sample=k
            )
        res = np.sqrt(((u_next - ua) ** 2).sum(axis=(1, 2)))
        if tape is not None:
            tape.push(_PicardRecord(active.copy(), acts, ops.quad, ops.proj, lam, rho))
        u[active] = u_next
        done = np.zeros(n_active, dtype=bool)
        for j, k in enumerate(active):
            rep = reports[k]
            rep.iterations += 1
            rep.residuals.append(float(res[j]))
            if res[j] <= config.tol:
                rep.converged = True
                done[j] = True
        active = active[~done]
    return u, reports


# --------------------------------------------------------------------------
# loss
# --------------------------------------------------------------------------

@dataclass
class LossResult:
    loss: float
    grads: list[tuple[np.ndarray, np.ndarray]]
    per_sample: np.ndarray
    reports: list[SolveReport] = field(default_factory=list)
    tape_bytes: int = 0


def loss_and_grad(
    params: MLPParams,
    template: ProblemTemplate,
    batch: Sequence[tuple],
    grid: CollocationGrid,
    solver_config: SolverConfig | None = None,
) -> LossResult:
    """Batch-mean MSE between interpolated solutions and targets, with gradients.

    Parameters
    ----------
    batch : sequence of (f, targets, target_times)
        ``f`` free-term coefficients (n_modes, dim); ``targets`` observations
        (T, dim); ``target_times`` mapped to [-1, 1], shape (T,).

    Raises
    ------
    NonFiniteError
        With ``.sample`` set to the offending batch index.
    """
    if len(batch) == 0:
        raise ValueError("batch is empty")
    m, d = _require_layout(params)
    free = np.stack([as_coeffs(f, "f") for f, _, _ in batch])
    tape = Tape()
    u, reports = solve_batch(params, free, template, grid, solver_config, tape=tape)
    n = len(batch)
    per_sample = np.empty(n)
    cot = np.zeros_like(u)
    for k, (_, targets, times) in enumerate(batch):
        y = np.asarray(targets, dtype=np.float64).reshape(-1, d)
        pred = eval_series_grid(u[k], times)
        err = pred - y
        per_sample[k] = np.mean(err * err)
        if not np.isfinite(per_sample[k]):
            raise NonFiniteError(f"loss of sample {k} is not finite", sample=k)
        cot[k] = (2.0 / (err.size * n)) * (vandermonde(times, m).T @ err)
    grads, _ = tape.backward(params, cot)
    for gw, gb in grads:
        if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
            raise NonFiniteError("gradient is not finite")
    return LossResult(float(per_sample.mean()), grads, per_sample, reports, tape.nbytes())


# --------------------------------------------------------------------------
# optimiser
# --------------------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list | None = None
    v: list | None = None

    def nbytes(self) -> int:
        if self.m is None:
            return 0
        return 2 * sum(gw.nbytes + gb.nbytes for gw, gb in self.m)


def adam_step(params: MLPParams, grads, state: AdamState) -> tuple[MLPParams, AdamState]:
    """One bias-corrected Adam update; returns new parameters and state."""
    if len(grads) != len(params.layers):
        raise ValueError("gradient structure does not match parameters")
    if state.m is None:
        state.m = zeros_like_grads(params)
        state.v = zeros_like_grads(params)
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.step
    corr2 = 1.0 - b2 ** state.step
    layers = []
    for i, ((w, b), (gw, gb)) in enumerate(zip(params.layers, grads)):
        new = []
        for j, (p, g) in enumerate(((w, gw), (b, gb))):
            if p.shape != g.shape:
                raise ValueError("gradient shape does not match parameter shape")
            mom = state.m[i][j]
            vel = state.v[i][j]
            mom *= b1
            mom += (1.0 - b1) * g
            vel *= b2
            vel += (1.0 - b2) * (g * g)
            m_hat = mom / corr1
            v_hat = vel / corr2
            new.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        layers.append((new[0], new[1]))
    return MLPParams(list(params.specs), layers, params.n_modes, params.dim), state
