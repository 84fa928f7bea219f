from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from spectral_nie.chebyshev import (
    as_coeffs,
    cheb_nodes,
    eval_series,
    eval_series_grid,
    mc_buffer_bytes,
    node_projection_matrix,
    project_mc,
    project_nodes,
    time_map,
    vandermonde,
)
from spectral_nie.errors import NonFiniteError

coeff_arrays = st.integers(1, 24).flatmap(
    lambda n: st.lists(st.floats(-1, 1), min_size=n + 1, max_size=n + 1)
)


class TestNodes:
    def test_n4_values(self):
        expected = [1.0, np.sqrt(2) / 2, 0.0, -np.sqrt(2) / 2, -1.0]
        assert_allclose(cheb_nodes(4).points, expected, atol=1e-15)

    def test_endpoints_exact_and_middle_zero(self):
        for n in (1, 2, 7, 16, 33):
            pts = cheb_nodes(n).points
            assert pts[0] == 1.0 and pts[-1] == -1.0
            if n % 2 == 0:
                assert pts[n // 2] == 0.0

    @given(st.integers(1, 200))
    def test_descending_and_symmetric(self, n):
        pts = cheb_nodes(n).points
        assert pts.shape == (n + 1,)
        assert np.all(np.diff(pts) < 0)
        assert_array_equal(pts, -pts[::-1])

    def test_rejects_bad_n(self):
        with pytest.raises(ValueError):
            cheb_nodes(0)

    def test_grid_is_read_only(self):
        with pytest.raises(ValueError):
            cheb_nodes(4).points[0] = 2.0


class TestEvalSeries:
    def test_chebyshev_basis_values(self):
        # C_3(t) = 4t^3 - 3t
        assert_allclose(eval_series([0, 0, 0, 1], 0.5), [-1.0])
        assert_allclose(eval_series([2.0], 0.3), [2.0])

    def test_multichannel_shape(self):
        c = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert_allclose(eval_series_grid(c, [-1.0, 0.0, 1.0]), [[1, -1], [1, 0], [1, 1]])

    @given(coeff_arrays, st.floats(-1, 1))
    def test_matches_numpy_chebval(self, c, t):
        assert_allclose(eval_series(c, t)[0], np.polynomial.chebyshev.chebval(t, c), atol=1e-12)

    def test_rejects_points_outside_interval(self):
        with pytest.raises(ValueError):
            eval_series([1.0, 1.0], 1.0 + 1e-6)

    def test_clamps_roundoff(self):
        assert_allclose(eval_series([0.0, 1.0], 1.0 + 1e-14), [1.0])

    def test_non_finite_coefficients(self):
        with pytest.raises(NonFiniteError):
            eval_series([1.0, np.nan], 0.0)

    def test_vandermonde_agrees(self, rng):
        c = rng.standard_normal((9, 2))
        ts = rng.uniform(-1, 1, 13)
        assert_allclose(vandermonde(ts, 9) @ c, eval_series_grid(c, ts), atol=1e-13)


class TestProjection:
    def test_quadratic_example(self):
        pts = cheb_nodes(4).points
        vals = 3.0 * (2 * pts**2 - 1)
        assert_allclose(project_nodes(vals)[:, 0], [0, 0, 3, 0, 0], atol=1e-14)

    @given(coeff_arrays)
    def test_round_trip(self, c):
        c = np.asarray(c)
        n = c.shape[0] - 1
        if n < 1:
            return
        vals = eval_series_grid(c, cheb_nodes(n).points)
        assert_allclose(project_nodes(vals)[:, 0], c, atol=1e-10)

    def test_interpolates_node_values(self, rng):
        vals = rng.standard_normal((11, 3))
        c = project_nodes(vals)
        assert_allclose(eval_series_grid(c, cheb_nodes(10).points), vals, atol=1e-12)

    def test_matrix_shape(self):
        assert node_projection_matrix(6).shape == (7, 7)

    def test_exp_converges_spectrally(self):
        # error of the degree-N interpolant of exp, decreasing in N
        ts = np.linspace(-1, 1, 401)
        errs = []
        for n in (4, 6, 8, 10):
            c = project_nodes(np.exp(cheb_nodes(n).points))
            errs.append(np.max(np.abs(eval_series_grid(c, ts)[:, 0] - np.exp(ts))))
        assert all(a > b for a, b in zip(errs, errs[1:]))
        assert errs[-1] < 1e-8


class TestProjectMC:
    def test_constant_mode_zero_exact(self):
        c = project_mc(lambda s: np.full_like(s, 2.5), 4, 500, 0)
        assert_allclose(c[0], [2.5], rtol=1e-14)

    def test_seed_determinism(self):
        a = project_mc(np.exp, 6, 300, 11)
        b = project_mc(np.exp, 6, 300, 11)
        assert_array_equal(a, b)

    def test_quadratic_within_standard_error(self):
        true = np.array([0.3, -0.5, 0.8])
        c = project_mc(lambda s: np.polynomial.chebyshev.chebval(s, true), 4, 10000, 3)
        assert_allclose(c[:3, 0], true, atol=0.02)
        assert_allclose(c[3:, 0], 0.0, atol=0.02)

    def test_multichannel(self):
        c = project_mc(lambda s: np.column_stack([s, -s]), 2, 4000, 1)
        assert c.shape == (3, 2)
        assert_allclose(c[1], [1.0, -1.0], atol=0.05)

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            project_mc(np.exp, 3, 0, 0)
        with pytest.raises(ValueError):
            project_mc(np.exp, -1, 10, 0)

    def test_buffer_bytes_increasing(self):
        sizes = [mc_buffer_bytes(n, 2) for n in (500, 1000, 2000)]
        assert sizes == sorted(set(sizes))


class TestTimeMap:
    def test_endpoints_exact(self):
        tm = time_map(0.3, 7.1)
        assert tm.to_cheb(0.3) == -1.0
        assert tm.to_cheb(7.1) == 1.0

    @given(st.floats(-1, 1))
    def test_inverse(self, x):
        tm = time_map(-2.0, 5.0)
        assert abs(tm.to_cheb(tm.from_cheb(x)) - x) < 1e-14

    def test_degenerate_interval(self):
        with pytest.raises(ValueError):
            time_map(1.0, 1.0)


class TestAsCoeffs:
    def test_promotes_vector(self):
        assert as_coeffs([1.0, 2.0]).shape == (2, 1)

    def test_rejects_3d(self):
        with pytest.raises(ValueError):
            as_coeffs(np.zeros((2, 2, 2)))
