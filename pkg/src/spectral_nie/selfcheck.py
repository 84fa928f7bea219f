"""Analytic oracle checks shared by ``spectral-nie selfcheck`` and the test suite."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import _kernels, _kernels as kernels_mod
from .chebyshev import cheb_nodes, eval_series_grid, project_nodes
from .datagen import nystrom_solve
from .ie_core import IEProblem, Kind, SolverConfig, classical_to_spectral, picard_solve
from .neural import (
    LossResult,
    MLPParams,
    ProblemTemplate,
    flatten_grads,
    init_params,
    loss_and_grad,
    mlp_spec,
)
from .spectral_ops import fredholm_integral, volterra_eval


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def __post_init__(self):
        self.passed = bool(self.passed)


# --------------------------------------------------------------------------
# exact rational integration of Chebyshev series
# --------------------------------------------------------------------------

def cheb_power_coeffs(k: int) -> list[int]:
    """Integer monomial coefficients of ``C_k`` via ``C_{k+1} = 2x C_k - C_{k-1}``."""
    prev, cur = [1], [0, 1]
    if k == 0:
        return prev
    for _ in range(k - 1):
        nxt = [0] + [2 * c for c in cur]
        for i, c in enumerate(prev):
            nxt[i] -= c
        prev, cur = cur, nxt
    return cur


def exact_integral(coeffs, lo: Fraction, hi: Fraction) -> Fraction:
    """Exact integral of ``sum_k coeffs[k] C_k`` over [lo, hi] (coefficients as Fractions)."""
    total = Fraction(0)
    for k, c in enumerate(coeffs):
        if c == 0:
            continue
        for j, a in enumerate(cheb_power_coeffs(k)):
            if a:
                total += c * a * (hi ** (j + 1) - lo ** (j + 1)) / (j + 1)
    return total


def check_spectral_exactness(n_draws: int = 100, max_degree: int = 20, seed: int = 0,
                             tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_draws):
        deg = int(rng.integers(0, max_degree + 1))
        b = rng.uniform(-1.0, 1.0, deg + 1)
        exact_coeffs = [Fraction(float(x)) for x in b]
        t = float(rng.uniform(-1.0, 1.0))
        v_exact = float(exact_integral(exact_coeffs, Fraction(-1), Fraction(t)))
        f_exact = float(exact_integral(exact_coeffs, Fraction(-1), Fraction(1)))
        worst = max(worst, abs(volterra_eval(b, t)[0] - v_exact),
                    abs(fredholm_integral(b)[0] - f_exact))
    return CheckResult("spectral-integration", worst <= tol, f"max error {worst:.2e}")


def check_fredholm_volterra(n_draws: int = 1000, seed: int = 1, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_draws):
        b = rng.uniform(-1.0, 1.0, (int(rng.integers(1, 22)), 2))
        worst = max(worst, float(np.max(np.abs(volterra_eval(b, 1.0) - fredholm_integral(b)))))
    return CheckResult("fredholm-volterra-consistency", worst <= tol, f"max error {worst:.2e}")


def check_projection_roundtrip(seed: int = 2, tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in range(1, 25):
        c = rng.uniform(-1.0, 1.0, (n + 1, 2))
        grid = cheb_nodes(n)
        worst = max(worst, float(np.max(np.abs(project_nodes(eval_series_grid(c, grid.points)) - c))))
    return CheckResult("projection-roundtrip", worst <= tol, f"max error {worst:.2e}")


def separable_fredholm_error(n: int = 8, tol: float = 1e-10) -> float:
    """Uniform error of ``y = t + 1/2 int t s y(s) ds`` against ``1.5 t``."""
    grid = cheb_nodes(n)
    f = np.zeros((n + 1, 1))
    f[1, 0] = 1.0
    integrand = classical_to_spectral(lambda y, t, s: t * s[:, None] * y, grid, vectorized=True)
    u, _ = picard_solve(IEProblem(Kind.FREDHOLM, 0.5, f, integrand), grid, SolverConfig(tol=tol))
    ts = np.linspace(-1.0, 1.0, 201)
    return float(np.max(np.abs(eval_series_grid(u, ts)[:, 0] - 1.5 * ts)))


def volterra_exponential_error(n: int = 16, tol: float = 1e-10) -> float:
    """Uniform error of ``y = 1 + int_{-1}^t y(s) ds`` against ``exp(t + 1)``."""
    grid = cheb_nodes(n)
    f = np.zeros((n + 1, 1))
    f[0, 0] = 1.0
    integrand = classical_to_spectral(lambda y, t, s: y, grid, vectorized=True)
    u, _ = picard_solve(IEProblem(Kind.VOLTERRA, 1.0, f, integrand), grid,
                        SolverConfig(tol=tol, max_iter=200))
    ts = np.linspace(-1.0, 1.0, 201)
    return float(np.max(np.abs(eval_series_grid(u, ts)[:, 0] - np.exp(ts + 1.0))))


def check_separable_fredholm() -> CheckResult:
    err = separable_fredholm_error()
    return CheckResult("separable-fredholm", err <= 1e-6, f"uniform error {err:.2e}")


def check_volterra_exponential() -> CheckResult:
    err = volterra_exponential_error()
    return CheckResult("volterra-exponential", err <= 1e-4, f"uniform error {err:.2e}")


def check_nystrom_oracle() -> CheckResult:
    x = np.linspace(-1.0, 1.0, 41)
    y = nystrom_solve("fredholm", 0.5, lambda t: t, lambda t, s: t * s, 200, x)
    err = float(np.max(np.abs(y.values[:, 0] - 1.5 * x)))
    return CheckResult("nystrom-separable", err <= 1e-4, f"uniform error {err:.2e}")


# --------------------------------------------------------------------------
# gradients
# --------------------------------------------------------------------------

@dataclass
class GradientCase:
    params: MLPParams
    template: ProblemTemplate
    batch: list
    n: int
    solver: SolverConfig


def random_gradient_case(rng: np.random.Generator, max_params: int = 200) -> GradientCase:
    """Small random network, problem and batch with a fixed number of solver iterations."""
    n = int(rng.integers(2, 9))
    dim = int(rng.integers(1, 3))
    width = (n + 1) * dim
    hidden = max(1, min(int(rng.integers(2, 9)), (max_params - width) // (2 * width + 2)))
    params = init_params(mlp_spec(n + 1, dim, (hidden,)), int(rng.integers(2**31)), n + 1, dim)
    params = params.with_flat(rng.uniform(-0.5, 0.5, params.total_params))
    template = ProblemTemplate(Kind.VOLTERRA if rng.random() < 0.5 else Kind.FREDHOLM,
                               float(rng.uniform(-0.8, 0.8)))
    batch = []
    for _ in range(int(rng.integers(1, 4))):
        n_obs = int(rng.integers(3, 12))
        batch.append((
            rng.uniform(-1.0, 1.0, (n + 1, dim)) / (1.0 + np.arange(n + 1))[:, None],
            rng.uniform(-1.0, 1.0, (n_obs, dim)),
            np.sort(rng.uniform(-1.0, 1.0, n_obs)),
        ))
    relaxation = 1.0 if rng.random() < 0.5 else float(rng.uniform(0.5, 1.0))
    # tol far below reach keeps the iteration count fixed under perturbation
    solver = SolverConfig(tol=1e-300, max_iter=int(rng.integers(1, 4)), relaxation=relaxation)
    return GradientCase(params, template, batch, n, solver)


def finite_difference_error(case: GradientCase, h: float = 1e-5, floor: float = 1e-8) -> float:
    """Max relative error of analytic vs central-difference gradients over ``|g| > floor``."""
    grid = cheb_nodes(case.n)

    def loss(p: MLPParams) -> LossResult:
        return loss_and_grad(p, case.template, case.batch, grid, case.solver)

    g = flatten_grads(loss(case.params).grads)
    theta = case.params.flat()
    fd = np.empty_like(theta)
    for i in range(theta.shape[0]):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        fd[i] = (loss(case.params.with_flat(up)).loss
                 - loss(case.params.with_flat(down)).loss) / (2.0 * h)
    mask = np.abs(g) > floor
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(g[mask] - fd[mask]) / np.maximum(np.abs(g[mask]), np.abs(fd[mask]))))


def check_gradients(n_cases: int = 5, seed: int = 3, tol: float = 1e-4) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = max(finite_difference_error(random_gradient_case(rng)) for _ in range(n_cases))
    return CheckResult("gradient-finite-difference", worst < tol, f"max relative error {worst:.2e}")


def check_kernel_backends(seed: int = 4) -> CheckResult:
    """The active compiled kernels agree with the NumPy fallback."""
    from ._kernels import _pykernels

    rng = np.random.default_rng(seed)
    c = rng.standard_normal((17, 3))
    x = rng.uniform(-1.0, 1.0, 50)
    err = float(np.max(np.abs(kernels_mod.clenshaw(c, x) - _pykernels.clenshaw(c, x))))
    theta = rng.uniform(0.0, np.pi, 200)
    vals = rng.standard_normal((200, 3))
    err = max(err, float(np.max(np.abs(kernels_mod.cos_moments(theta, vals, 16)
                                       - _pykernels.cos_moments(theta, vals, 16)))))
    return CheckResult(f"kernel-backend[{_kernels.BACKEND}]", err <= 1e-12, f"max difference {err:.2e}")


CHECKS: tuple[Callable[[], CheckResult], ...] = (
    check_spectral_exactness,
    check_fredholm_volterra,
    check_projection_roundtrip,
    check_separable_fredholm,
    check_volterra_exponential,
    check_nystrom_oracle,
    check_gradients,
    check_kernel_backends,
)


def run_all() -> list[CheckResult]:
    results = []
    for check in CHECKS:
        try:
            results.append(check())
        except Exception as exc:  # noqa: BLE001 - a crashing check is a failed check
            results.append(CheckResult(check.__name__.removeprefix("check_"), False,
                                       f"{type(exc).__name__}: {exc}"))
    return results
