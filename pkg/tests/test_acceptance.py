"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` to see the lines as they
happen; they are also repeated in the terminal summary. The learning
criteria train real models and take a few minutes in total.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from spectral_nie import io, selfcheck
from spectral_nie.chebyshev import cheb_nodes, eval_series_grid, project_nodes
from spectral_nie.cli import main
from spectral_nie.datagen import (
    DelayNetSpec,
    IrregularFraction,
    Regular,
    downsample,
    gen_delay_dataset,
    gen_ie_dataset,
    split,
)
from spectral_nie.train_eval import (
    BenchmarkCase,
    TrainConfig,
    benchmark,
    evaluate,
    interpolation_eval,
    new_model,
    train,
)

pytestmark = pytest.mark.acceptance

RESULTS: list[str] = []

# desk-scale learning setup shared by the synthetic IE criteria
IE_CONFIG = TrainConfig(n=16, hidden=(32,), n_init_points=2, free_term_degree=0,
                        lr=1e-3, max_epochs=600, seed=0)


def record(number: int, title: str, passed: bool, detail: str):
    line = f"{'PASS' if passed else 'FAIL'} [{number:>2}] {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert passed, line


@pytest.fixture(scope="module")
def ie_splits():
    return split(gen_ie_dataset(100, d=2, noise_sigma=0.05, seed=0), seed=0)


@pytest.fixture(scope="module")
def full_run(ie_splits):
    tr, va, te = ie_splits
    t0 = time.perf_counter()
    best, metrics = train(new_model(IE_CONFIG, 2), tr, va, IE_CONFIG)
    return best, metrics, evaluate(best, te, IE_CONFIG), time.perf_counter() - t0


def _train_downsampled(ie_splits, mode):
    tr, va, te = ie_splits
    best, _ = train(new_model(IE_CONFIG, 2), downsample(tr, mode), downsample(va, mode), IE_CONFIG)
    return interpolation_eval(best, te, mode, IE_CONFIG).mse_mean


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


class TestAcceptance:
    def test_01_spectral_exactness(self):
        res, dt = _timed(selfcheck.check_spectral_exactness)
        record(1, "spectral integration exact to 1e-10", res.passed and dt < 1.0,
               f"{res.detail}, {dt:.2f} s")

    def test_02_fredholm_volterra(self):
        res, dt = _timed(selfcheck.check_fredholm_volterra)
        record(2, "volterra_eval(b, 1) == fredholm_integral(b)", res.passed and dt < 1.0,
               f"{res.detail}, {dt:.2f} s")

    def test_03_classical_oracles(self):
        sep, dt_sep = _timed(lambda: selfcheck.separable_fredholm_error(n=8))
        vol, dt_vol = _timed(lambda: selfcheck.volterra_exponential_error(n=16))
        ok = sep <= 1e-6 and vol <= 1e-4 and dt_sep < 1.0 and dt_vol < 1.0
        record(3, "classical solver oracles", ok,
               f"separable {sep:.2e} ({dt_sep:.2f} s), exponential {vol:.2e} ({dt_vol:.2f} s)")

    def test_04_gradients(self):
        rng = np.random.default_rng(2024)
        t0 = time.perf_counter()
        worst = max(selfcheck.finite_difference_error(selfcheck.random_gradient_case(rng))
                    for _ in range(20))
        dt = time.perf_counter() - t0
        record(4, "unrolled gradients vs central differences", worst < 1e-4 and dt < 30.0,
               f"max relative error {worst:.2e} over 20 cases, {dt:.1f} s")

    def test_05_desk_scale_learning(self, full_run):
        best, _, test, dt = full_run
        ok = test.mse_mean <= 0.01 and best.total_params <= 10_000 and dt < 900.0
        record(5, "synthetic IE test MSE <= 0.01", ok,
               f"test MSE {test.mse_mean:.4g} +- {test.mse_std:.2g}, "
               f"{best.total_params} params, {dt:.0f} s")

    def test_06_interpolation_stability(self, ie_splits, full_run):
        full = full_run[2].mse_mean
        regular = _train_downsampled(ie_splits, Regular(2))
        sweep = [_train_downsampled(ie_splits, IrregularFraction(p)) for p in (0.7, 0.5, 0.3)]
        ratio = max(sweep) / min(sweep)
        ok = regular <= 2.0 * full and ratio <= 3.0
        record(6, "interpolation stability", ok,
               f"regular:2 {regular:.4g} vs full {full:.4g}; irregular 0.7/0.5/0.3 "
               f"{'/'.join(f'{v:.4g}' for v in sweep)}, max/min {ratio:.2f}")

    def test_07_init_point_monotonicity(self):
        spec = DelayNetSpec.random(80, seed=0)
        tr, va, te = split(gen_delay_dataset(spec, 50, 20, seed=0), seed=0)
        mse = {}
        for p in (3, 7):
            cfg = TrainConfig(n=8, hidden=(8,), kind="volterra", n_init_points=p,
                              lr=3e-3, batch_size=8, max_epochs=100, seed=0)
            best, _ = train(new_model(cfg, 80), tr, va, cfg)
            mse[p] = evaluate(best, te, cfg).mse_mean
        record(7, "delay net: 7 init points <= 3 init points", mse[7] <= mse[3],
               f"p=3 {mse[3]:.4g}, p=7 {mse[7]:.4g}")

    def test_08_mc_tradeoff(self, ie_splits):
        tr, va, te = ie_splits
        cases = [BenchmarkCase(f"mc={m}", TrainConfig(**{**_fields(IE_CONFIG), "mc_samples": m,
                                                         "max_epochs": 200}), tr, va, te)
                 for m in (500, 1000, 2000)]
        rows = benchmark(cases)
        memory = [r["memory_bytes"] for r in rows]
        errors = [r["test_mse_mean"] for r in rows]
        ok = all(a < b for a, b in zip(memory, memory[1:])) and max(errors) <= 1.5 * min(errors)
        record(8, "MC sample trade-off", ok,
               f"memory {memory}, test MSE {'/'.join(f'{e:.4g}' for e in errors)}")

    def test_09_spectral_convergence(self):
        ts = np.linspace(-1.0, 1.0, 2001)
        errors = []
        for n in (4, 6, 8, 10):
            c = project_nodes(np.exp(cheb_nodes(n).points)[:, None])
            errors.append(float(np.max(np.abs(eval_series_grid(c, ts)[:, 0] - np.exp(ts)))))
        ok = all(a > b for a, b in zip(errors, errors[1:])) and errors[-1] < 1e-8
        record(9, "exp(t) projection converges spectrally", ok,
               ", ".join(f"N={n}: {e:.1e}" for n, e in zip((4, 6, 8, 10), errors)))

    def test_10_end_to_end_determinism(self, tmp_path):
        outputs = []
        for run in ("a", "b"):
            d = tmp_path / run
            data, out = d / "data.json", d / "train"
            assert main(["gen-data", "--out", str(data), "--samples", "30", "--points", "40",
                         "--seed", "7"]) == 0
            assert main(["--threads", "1", "train", "--data", str(data), "--out-dir", str(out),
                         "--n", "8", "--hidden", "16", "--max-epochs", "15", "--seed", "7"]) == 0
            assert main(["--threads", "1", "eval", "--checkpoint", str(out / "checkpoint.json"),
                         "--data", str(data), "--out", str(d / "eval.csv")]) == 0
            outputs.append({
                "data": data.read_bytes(),
                "eval": (d / "eval.csv").read_bytes(),
                "checkpoint": (out / "checkpoint.bin").read_bytes(),
                "metrics": _mask_walltime(io.read_csv(out / "metrics.csv")),
                "summary": _mask_walltime(io.read_csv(out / "summary.csv")),
            })
        same = [k for k in outputs[0] if outputs[0][k] == outputs[1][k]]
        record(10, "gen-data -> train -> eval determinism", len(same) == len(outputs[0]),
               f"identical: {', '.join(same)} (walltime column excluded from training CSVs)")


def _fields(cfg: TrainConfig) -> dict:
    return {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}


def _mask_walltime(rows: list[dict]) -> list[dict]:
    return [{k: v for k, v in row.items() if k != "walltime_s"} for row in rows]
