from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from spectral_nie.chebyshev import cheb_nodes, eval_series_grid
from spectral_nie.errors import NonFiniteError
from spectral_nie.ie_core import IEProblem, Kind, SolverConfig, picard_solve
from spectral_nie.neural import (
    Activation,
    AdamState,
    LayerSpec,
    MLPParams,
    NeuralIntegrand,
    ProblemTemplate,
    Tape,
    adam_step,
    flatten_grads,
    forward,
    init_params,
    loss_and_grad,
    mlp_spec,
    solve_batch,
    zeros_like_grads,
)
from spectral_nie.selfcheck import finite_difference_error, random_gradient_case


def _net(m=5, d=2, hidden=(8,), seed=0, **kw):
    return init_params(mlp_spec(m, d, hidden), seed, m, d, **kw)


def _batch(rng, m, d, n=3):
    return [(rng.standard_normal((m, d)) * 0.3, rng.standard_normal((7, d)),
             np.sort(rng.uniform(-1, 1, 7))) for _ in range(n)]


class TestParams:
    def test_count_example(self):
        p = init_params([LayerSpec(5, 3), LayerSpec(3, 2, Activation.IDENTITY)], 0)
        assert p.total_params == 26

    def test_seed_determinism(self):
        assert_array_equal(_net(seed=3).flat(), _net(seed=3).flat())
        assert not np.array_equal(_net(seed=3).flat(), _net(seed=4).flat())

    def test_glorot_bounds_and_zero_bias(self):
        p = _net(m=9, d=2, hidden=(16,))
        for spec, (w, b) in zip(p.specs, p.layers):
            assert np.all(np.abs(w) <= np.sqrt(6 / (spec.in_dim + spec.out_dim)))
            assert_array_equal(b, 0.0)

    def test_inconsistent_chain(self):
        with pytest.raises(ValueError):
            init_params([LayerSpec(5, 3), LayerSpec(4, 2, Activation.IDENTITY)], 0)

    def test_final_layer_must_be_identity(self):
        with pytest.raises(ValueError):
            init_params([LayerSpec(5, 3), LayerSpec(3, 2)], 0)

    def test_io_widths_checked(self):
        with pytest.raises(ValueError):
            init_params(mlp_spec(5, 2), 0, 6, 2)

    def test_flat_round_trip(self, rng):
        p = _net()
        vec = rng.standard_normal(p.total_params)
        assert_array_equal(p.with_flat(vec).flat(), vec)

    def test_flat_layout_weights_row_major_then_bias(self):
        p = init_params([LayerSpec(2, 2, Activation.IDENTITY)], 0)
        p = p.with_flat(np.arange(6.0))
        assert_array_equal(p.layers[0][0], [[0, 1], [2, 3]])
        assert_array_equal(p.layers[0][1], [4, 5])


class TestForward:
    def test_zero_params_give_zero(self, rng):
        p = _net(zero=True)
        assert_array_equal(forward(p, rng.standard_normal((5, 2)), 0.3), 0.0)

    def test_identity_layer(self, rng):
        m, d = 4, 2
        w = np.zeros((m * d + 1, m * d))
        w[: m * d] = np.eye(m * d)
        p = MLPParams([LayerSpec(m * d + 1, m * d, Activation.IDENTITY)],
                      [(w, np.zeros(m * d))], m, d)
        u = rng.standard_normal((m, d))
        assert_allclose(forward(p, u, 0.7), u, atol=1e-15)

    def test_golden_vector(self):
        p = init_params(mlp_spec(5, 2, (8,)), 42, 5, 2)
        u = np.arange(10.0).reshape(5, 2) / 10
        out = forward(p, u, 0.0).ravel()[:6]
        golden = [1.0309911883096337, -0.65899483172341, -0.7212780480303708,
                  0.28485389925086, -0.6327887696856158, -0.14795403623393913]
        assert_array_equal(out, golden)

    def test_taped_equals_untaped(self, rng):
        p = _net()
        u = rng.standard_normal((5, 2))
        tape = Tape()
        assert_array_equal(forward(p, u, 0.1, tape), forward(p, u, 0.1))
        assert len(tape) == 1

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            forward(_net(), np.zeros((4, 2)), 0.0)

    def test_batch_adapter_matches_forward(self, rng):
        p = _net()
        u = rng.standard_normal((5, 2))
        ts = cheb_nodes(4).points
        batch = NeuralIntegrand(p).spectral_integrand_batch(u, ts)
        for i, t in enumerate(ts):
            assert_allclose(batch[i], forward(p, u, t), atol=1e-14)


class TestTape:
    def test_empty_tape_zero_grads(self):
        p = _net()
        grads, cot = Tape().backward(p, np.ones((5, 2)))
        assert_array_equal(flatten_grads(grads), 0.0)

    def test_forward_record_gradient(self, rng):
        p = _net()
        u = rng.standard_normal((5, 2))
        v = rng.standard_normal((5, 2))
        tape = Tape()
        forward(p, u, 0.2, tape)
        grads, g_u = tape.backward(p, v)
        h = 1e-6
        fd = np.empty_like(u)
        for idx in np.ndindex(u.shape):
            du = np.zeros_like(u)
            du[idx] = h
            fd[idx] = np.sum(v * (forward(p, u + du, 0.2) - forward(p, u - du, 0.2))) / (2 * h)
        assert_allclose(g_u, fd, rtol=1e-6, atol=1e-9)


class TestSolveBatch:
    def test_matches_generic_solver(self, rng):
        p = _net(m=9, d=2, hidden=(6,), output_scale=0.3)
        grid = cheb_nodes(8)
        free = rng.standard_normal((3, 9, 2)) * 0.2
        cfg = SolverConfig(tol=1e-10)
        for kind in Kind:
            u, reps = solve_batch(p, free, ProblemTemplate(kind, 0.5), grid, cfg)
            for k in range(3):
                ref, rep = picard_solve(IEProblem(kind, 0.5, free[k], NeuralIntegrand(p)), grid, cfg)
                assert_allclose(u[k], ref, atol=1e-12)
                assert reps[k].iterations == rep.iterations

    def test_zero_output_layer_converges_fast(self, rng):
        p = _net(m=9, hidden=(6,), output_scale=0.0)
        p.layers[0] = (rng.standard_normal(p.layers[0][0].shape), p.layers[0][1])
        free = rng.standard_normal((4, 9, 2))
        u, reps = solve_batch(p, free, ProblemTemplate(), cheb_nodes(8))
        assert all(r.iterations <= 2 and r.converged for r in reps)
        assert_allclose(u, free, atol=1e-14)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_names_sample(self):
        p = _net(m=3, d=1, hidden=(2,))
        free = np.zeros((2, 3, 1))
        free[1, 0, 0] = np.inf
        with pytest.raises(NonFiniteError) as info:
            solve_batch(p, free, ProblemTemplate(), cheb_nodes(2))
        assert info.value.sample == 1

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            solve_batch(_net(), np.zeros((1, 5, 2)), ProblemTemplate(), cheb_nodes(6))


class TestLossAndGrad:
    def test_targets_on_solution_give_zero(self, rng):
        p = _net(m=7, hidden=(5,), output_scale=0.2)
        grid = cheb_nodes(6)
        cfg = SolverConfig(tol=1e-12)
        f = rng.standard_normal((7, 2)) * 0.3
        u, _ = solve_batch(p, f[None], ProblemTemplate(), grid, cfg)
        ts = np.linspace(-1, 1, 9)
        res = loss_and_grad(p, ProblemTemplate(), [(f, eval_series_grid(u[0], ts), ts)], grid, cfg)
        assert res.loss < 1e-28
        assert np.max(np.abs(flatten_grads(res.grads))) < 1e-13

    def test_zero_params_loss_is_free_term_mse(self, rng):
        p = _net(zero=True)
        f, y, ts = _batch(rng, 5, 2, 1)[0]
        res = loss_and_grad(p, ProblemTemplate(lam=1.0), [(f, y, ts)], cheb_nodes(4))
        assert res.reports[0].iterations <= 2
        assert_allclose(res.loss, np.mean((eval_series_grid(f, ts) - y) ** 2), rtol=1e-14)

    def test_permutation_invariant(self, rng):
        p = _net()
        batch = _batch(rng, 5, 2, 4)
        a = loss_and_grad(p, ProblemTemplate(), batch, cheb_nodes(4))
        b = loss_and_grad(p, ProblemTemplate(), batch[::-1], cheb_nodes(4))
        assert_allclose(a.loss, b.loss, rtol=1e-14)
        assert_allclose(flatten_grads(a.grads), flatten_grads(b.grads), rtol=1e-10, atol=1e-15)

    def test_batch_mean(self, rng):
        p = _net()
        batch = _batch(rng, 5, 2, 3)
        whole = loss_and_grad(p, ProblemTemplate(), batch, cheb_nodes(4))
        parts = [loss_and_grad(p, ProblemTemplate(), [s], cheb_nodes(4)) for s in batch]
        assert_allclose(whole.loss, np.mean([r.loss for r in parts]), rtol=1e-13)
        assert_allclose(flatten_grads(whole.grads),
                        np.mean([flatten_grads(r.grads) for r in parts], axis=0),
                        rtol=1e-10, atol=1e-15)

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            loss_and_grad(_net(), ProblemTemplate(), [], cheb_nodes(4))

    @given(st.integers(0, 2**31 - 1))
    def test_finite_differences(self, seed):
        case = random_gradient_case(np.random.default_rng(seed))
        assert finite_difference_error(case) < 1e-4

    def test_unrolled_iterations_match_solve(self, rng):
        p = _net(output_scale=0.3)
        res = loss_and_grad(p, ProblemTemplate(), _batch(rng, 5, 2, 2), cheb_nodes(4),
                            SolverConfig(tol=1e-9))
        assert all(r.converged and r.iterations > 2 for r in res.reports)
        assert res.tape_bytes > 0


class TestAdam:
    def _scalar(self):
        return init_params([LayerSpec(1, 1, Activation.IDENTITY)], 0).with_flat([0.5, 0.0])

    def test_first_step_is_lr(self):
        p = self._scalar()
        grads = [(np.ones((1, 1)), np.zeros(1))]
        new, state = adam_step(p, grads, AdamState(lr=0.1))
        step = 0.5 - new.layers[0][0][0, 0]
        assert 0.1 / (1 + 1e-7) <= step <= 0.1
        assert state.step == 1

    def test_zero_gradient_keeps_params(self):
        p = _net()
        new, state = adam_step(p, zeros_like_grads(p), AdamState())
        assert_array_equal(new.flat(), p.flat())
        assert state.step == 1

    def test_deterministic(self, rng):
        p = _net()
        gs = [[(rng.standard_normal(w.shape), rng.standard_normal(b.shape)) for w, b in p.layers]
              for _ in range(5)]

        def run():
            q, s = p, AdamState()
            for g in gs:
                q, s = adam_step(q, g, s)
            return q.flat()

        assert_array_equal(run(), run())

    def test_minimises_quadratic(self):
        p = self._scalar()
        state = AdamState(lr=0.05)
        for _ in range(500):
            w = p.layers[0][0]
            p, state = adam_step(p, [(2 * (w - 3.0), np.zeros(1))], state)
        assert_allclose(p.layers[0][0][0, 0], 3.0, atol=1e-2)

    def test_structure_mismatch(self):
        with pytest.raises(ValueError):
            adam_step(_net(), [], AdamState())
