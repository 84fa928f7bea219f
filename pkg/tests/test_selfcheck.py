from __future__ import annotations

import numpy as np

from spectral_nie import selfcheck, spectral_ops
from spectral_nie.selfcheck import cheb_power_coeffs, exact_integral, run_all
from fractions import Fraction


class TestOracleHelpers:
    def test_power_coefficients(self):
        assert cheb_power_coeffs(0) == [1]
        assert cheb_power_coeffs(1) == [0, 1]
        assert cheb_power_coeffs(4) == [1, 0, -8, 0, 8]

    def test_exact_integral(self):
        # int_{-1}^{1} C_2 = -2/3
        assert exact_integral([0, 0, Fraction(1)], Fraction(-1), Fraction(1)) == Fraction(-2, 3)


class TestSuite:
    def test_all_pass(self):
        results = run_all()
        assert len(results) >= 6
        assert all(r.passed for r in results), [r for r in results if not r.passed]

    def test_sign_flip_is_caught(self, monkeypatch):
        original = spectral_ops._antiderivative_matrix

        def flipped(n):
            a = original(n).copy()
            a[2:] *= -1.0
            return a

        monkeypatch.setattr(spectral_ops, "_antiderivative_matrix", flipped)
        result = selfcheck.check_spectral_exactness()
        assert not result.passed

    def test_crashing_check_reported(self, monkeypatch):
        def boom():
            raise RuntimeError("broken")

        monkeypatch.setattr(selfcheck, "CHECKS", (boom,))
        (res,) = run_all()
        assert not res.passed and "broken" in res.detail
        assert np.isscalar(res.passed)
