"""Both kernel lanes (compiled loop and vectorized numpy) compute the same thing."""

import numpy as np
import pytest

from microbeam import kernels
from microbeam.kernels import (
    _centroid_stretch_numpy,
    _centroid_stretch_py,
    _eval_deflection_py,
    _newmark_step_py,
)


def test_backend_selected():
    assert kernels.BACKEND in ("numba", "numpy")


def test_centroid_stretch_lanes_agree():
    rng = np.random.default_rng(1)
    for n in (1, 4, 32):
        h = 300e-6 / n
        q = 1e-6 * rng.standard_normal(2 * (n + 1))
        a = kernels.centroid_stretch(q, h, n)
        b = _centroid_stretch_numpy(q, h, n)
        c = _centroid_stretch_py(q, h, n)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-30)
        assert a == pytest.approx(c, rel=1e-12, abs=1e-30)


def test_centroid_stretch_exact_zero_when_straight():
    q = np.zeros(10)
    assert kernels.centroid_stretch(q, 1e-5, 4) == 0.0
    assert _centroid_stretch_numpy(q, 1e-5, 4) == 0.0


def test_eval_deflection_lanes_agree():
    rng = np.random.default_rng(2)
    n = 8
    h = 300e-6 / n
    q = 1e-6 * rng.standard_normal(2 * (n + 1))
    for s in (0.0, 0.37 * n * h, n * h):
        assert kernels.eval_deflection(q, h, n, s) == pytest.approx(
            _eval_deflection_py(q, h, n, s), rel=1e-14)


def test_newmark_lanes_agree():
    rng = np.random.default_rng(3)
    n = 10
    m = np.eye(n) + 0.01 * rng.random((n, n))
    m = 0.5 * (m + m.T)
    k = 5.0 * np.eye(n) + 0.1 * rng.random((n, n))
    k = 0.5 * (k + k.T)
    c = 0.01 * k
    f = rng.standard_normal(n)
    q = rng.standard_normal(n)
    v = rng.standard_normal(n)
    a = rng.standard_normal(n)
    got = kernels.newmark_step(m, c, k, f, q, v, a, 1e-3, 0.25, 0.5)
    want = _newmark_step_py(m, c, k, f, q, v, a, 1e-3, 0.25, 0.5)
    for g, w in zip(got, want):
        assert np.allclose(g, w, rtol=1e-10)


def test_warmup_runs():
    kernels.warmup()
