from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from spectral_nie.selfcheck import exact_integral
from spectral_nie.spectral_ops import (
    antiderivative,
    antiderivative_matrix,
    eval_antiderivative,
    fredholm_integral,
    fredholm_weights,
    volterra_eval,
    volterra_weights,
)

coeffs = st.lists(st.floats(-1, 1), min_size=1, max_size=21)


class TestAntiderivative:
    def test_c2_example(self):
        # int_{-1}^t C_2 = (2t^3)/3 - t - 1/3 = C_3/6 - C_1/2 - 1/3
        assert_allclose(antiderivative([0, 0, 1, 0])[:, 0], [-2 / 3, -1 / 2, 0, 1 / 6, 0])

    def test_one_more_mode(self):
        assert antiderivative(np.ones((5, 3))).shape == (6, 3)

    @given(coeffs)
    def test_vanishes_at_minus_one(self, b):
        d = antiderivative(b)
        assert abs(eval_antiderivative(d, [-1.0])[0, 0]) < 1e-12

    @given(coeffs)
    def test_derivative_recovers_integrand(self, b):
        d = antiderivative(b)[:, 0].copy()
        d[0] *= 0.5
        deriv = np.polynomial.chebyshev.chebder(d)
        assert_allclose(deriv[: len(b)], b, atol=1e-12)

    def test_matrix_is_cached_and_read_only(self):
        a = antiderivative_matrix(7)
        assert a is antiderivative_matrix(7)
        with pytest.raises(ValueError):
            a[0, 0] = 1.0

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            antiderivative_matrix(0)


class TestIntegrals:
    def test_constant(self):
        assert_allclose(fredholm_integral([1.0]), [2.0])
        assert_allclose(volterra_eval([1.0, 0, 0, 0], 0.5), [1.5])

    def test_c2_fredholm(self):
        assert_allclose(fredholm_integral([0, 0, 1, 0]), [-2 / 3])

    @given(coeffs)
    def test_volterra_at_one_is_fredholm(self, b):
        assert_allclose(volterra_eval(b, 1.0), fredholm_integral(b), atol=1e-12)

    @given(coeffs, st.floats(-1, 1))
    def test_matches_rational_oracle(self, b, t):
        exact = exact_integral([Fraction(x) for x in b], Fraction(-1), Fraction(t))
        assert abs(volterra_eval(b, t)[0] - float(exact)) < 1e-10

    @given(coeffs, coeffs, st.floats(-3, 3))
    def test_linear(self, a, b, s):
        n = max(len(a), len(b))
        a = np.pad(a, (0, n - len(a)))
        b = np.pad(b, (0, n - len(b)))
        assert_allclose(fredholm_integral(a + s * b),
                        fredholm_integral(a) + s * fredholm_integral(b), atol=1e-11)

    @given(coeffs)
    def test_odd_modes_integrate_to_zero(self, b):
        b = np.asarray(b)
        b[::2] = 0.0
        assert abs(fredholm_integral(b)[0]) < 1e-12

    def test_weight_forms_agree(self, rng):
        b = rng.standard_normal((9, 2))
        ts = rng.uniform(-1, 1, 5)
        assert_allclose(fredholm_weights(9) @ b, fredholm_integral(b), atol=1e-14)
        q = volterra_weights(9, ts)
        for i, t in enumerate(ts):
            assert_allclose(q[i] @ b, volterra_eval(b, t), atol=1e-13)
