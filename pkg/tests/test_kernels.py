from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from spectral_nie import _kernels
from spectral_nie._kernels import _pykernels

try:
    from spectral_nie._kernels import _ckernels
except ImportError:
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def _delay_inputs(rng, n=6, steps=300):
    w = rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.5)
    lag = rng.uniform(0, 50, (n, n))
    q = np.floor(lag).astype(np.int64)
    return (rng.uniform(-1, 1, n), w, q, lag - q, 1.0, rng.random(n), 100, 0.01, steps, 1e6)


class TestPythonKernels:
    def test_clenshaw_matches_chebval(self, rng):
        c = rng.standard_normal((12, 3))
        x = rng.uniform(-1, 1, 20)
        assert_allclose(_pykernels.clenshaw(c, x), np.polynomial.chebyshev.chebval(x, c).T,
                        atol=1e-13)

    def test_cos_moments(self, rng):
        theta = rng.uniform(0, np.pi, 50)
        vals = rng.standard_normal((50, 2))
        expected = np.cos(np.arange(5)[:, None] * theta[None, :]) @ vals
        assert_allclose(_pykernels.cos_moments(theta, vals, 4), expected, atol=1e-12)

    def test_delay_euler_divergence_status(self):
        out, status = _pykernels.delay_euler(
            np.ones(1), np.zeros((1, 1)), np.zeros((1, 1), dtype=np.int64), np.zeros((1, 1)),
            -100.0, np.zeros(1), 0, 0.1, 100, 1e6)
        assert status > 0 and np.abs(out[status]) > 1e6


@needs_ext
class TestBackendParity:
    def test_clenshaw(self, rng):
        c = rng.standard_normal((17, 2))
        x = rng.uniform(-1, 1, 40)
        assert_allclose(_ckernels.clenshaw(c, x), _pykernels.clenshaw(c, x), atol=1e-14)

    def test_cos_moments(self, rng):
        theta = rng.uniform(0, np.pi, 500)
        vals = rng.standard_normal((500, 3))
        assert_allclose(_ckernels.cos_moments(theta, vals, 16),
                        _pykernels.cos_moments(theta, vals, 16), atol=1e-11)

    def test_delay_euler(self, rng):
        args = _delay_inputs(rng)
        a, sa = _ckernels.delay_euler(*args)
        b, sb = _pykernels.delay_euler(*args)
        assert sa == sb == -1
        assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_delay_euler_divergence(self):
        args = (np.ones(1), np.zeros((1, 1)), np.zeros((1, 1), dtype=np.int64), np.zeros((1, 1)),
                -100.0, np.zeros(1), 0, 0.1, 100, 1e6)
        assert _ckernels.delay_euler(*args)[1] == _pykernels.delay_euler(*args)[1]


class TestBackendSelection:
    def test_backend_name(self):
        assert _kernels.BACKEND in ("cython", "python")

    def test_env_forces_python(self):
        env = dict(os.environ, SPECTRAL_NIE_PURE_PYTHON="1")
        out = subprocess.run(
            [sys.executable, "-c", "import spectral_nie; print(spectral_nie.BACKEND)"],
            env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "python"

    def test_library_results_agree_across_backends(self):
        code = ("import numpy as np; from spectral_nie.selfcheck import volterra_exponential_error;"
                "print(repr(volterra_exponential_error()))")
        outs = []
        for flag in ("1", "0"):
            env = dict(os.environ, SPECTRAL_NIE_PURE_PYTHON=flag)
            res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                 text=True, check=True)
            outs.append(float(res.stdout))
        assert_allclose(outs[0], outs[1], rtol=1e-6)
        assert_array_equal(np.array(outs) < 1e-4, True)
