"""Hot per-tick numeric kernels, compiled with numba when available.

The physics loop calls these at 1 kHz, so they avoid allocation-heavy numpy
idioms. Set MICROBEAM_NUMBA=0 to force the pure-numpy implementations
(benchmarks/bench_kernels.py compares the two lanes).
"""

import os

import numpy as np

_ENV = os.environ.get("MICROBEAM_NUMBA", "1").strip().lower()
_WANT_NUMBA = _ENV not in ("0", "false", "off", "no")

# 4-point Gauss-Legendre rule on [0, 1]; exact for the degree-6 integrands
# that arise from cubic shape-function derivatives.
_GAUSS_XI = np.array([
    0.06943184420297371, 0.33000947820757187,
    0.6699905217924281, 0.9305681557970262,
])
_GAUSS_W = np.array([
    0.17392742256872693, 0.3260725774312731,
    0.3260725774312731, 0.17392742256872693,
])


def _hermite_dxi(xi):
    """Derivatives (w.r.t. xi) of the four cubic interpolation shapes."""
    return (
        6.0 * xi * xi - 6.0 * xi,
        3.0 * xi * xi - 4.0 * xi + 1.0,
        6.0 * xi - 6.0 * xi * xi,
        3.0 * xi * xi - 2.0 * xi,
    )


def _centroid_stretch_py(q, h, n_elements):
    """Arc-length gain of the interpolated centroid line over the flat span.

    Integrates sqrt(1 + w'^2) - 1 in the cancellation-free form
    w'^2 / (1 + sqrt(1 + w'^2)), so an undeflected line yields exactly 0.
    """
    total = 0.0
    for e in range(n_elements):
        w1 = q[2 * e]
        t1 = q[2 * e + 1]
        w2 = q[2 * e + 2]
        t2 = q[2 * e + 3]
        for g in range(_GAUSS_XI.size):
            xi = _GAUSS_XI[g]
            d1, d2, d3, d4 = _hermite_dxi(xi)
            # dw/ds = (1/h) dw/dxi, rotation DOFs carry the h scale
            wp = (d1 * w1 + h * d2 * t1 + d3 * w2 + h * d4 * t2) / h
            wp2 = wp * wp
            total += _GAUSS_W[g] * h * wp2 / (1.0 + np.sqrt(1.0 + wp2))
    return total


def _eval_deflection_py(q, h, n_elements, s):
    """Deflection and slope of the interpolated centroid line at position s."""
    e = int(s / h)
    if e >= n_elements:
        e = n_elements - 1
    xi = s / h - e
    w1 = q[2 * e]
    t1 = q[2 * e + 1]
    w2 = q[2 * e + 2]
    t2 = q[2 * e + 3]
    h1 = 1.0 - 3.0 * xi * xi + 2.0 * xi ** 3
    h2 = xi - 2.0 * xi * xi + xi ** 3
    h3 = 3.0 * xi * xi - 2.0 * xi ** 3
    h4 = -xi * xi + xi ** 3
    d1, d2, d3, d4 = _hermite_dxi(xi)
    w = h1 * w1 + h * h2 * t1 + h3 * w2 + h * h4 * t2
    theta = (d1 * w1 + h * d2 * t1 + d3 * w2 + h * d4 * t2) / h
    return w, theta


def _centroid_stretch_numpy(q, h, n_elements):
    """Vectorized lane of _centroid_stretch_py (all elements x Gauss points)."""
    w1 = q[0::2][:-1]
    w2 = q[0::2][1:]
    t1 = q[1::2][:-1]
    t2 = q[1::2][1:]
    xi = _GAUSS_XI[:, None]
    d1 = 6.0 * xi * xi - 6.0 * xi
    d2 = 3.0 * xi * xi - 4.0 * xi + 1.0
    d3 = 6.0 * xi - 6.0 * xi * xi
    d4 = 3.0 * xi * xi - 2.0 * xi
    wp = (d1 * w1 + h * d2 * t1 + d3 * w2 + h * d4 * t2) / h
    wp2 = wp * wp
    return float(h * (_GAUSS_W @ (wp2 / (1.0 + np.sqrt(1.0 + wp2)))).sum())


def _newmark_step_py(m, c, k, f, q, v, a, dt, beta, gamma):
    """One implicit average-acceleration step of m q'' + c q' + k q = f."""
    a0 = 1.0 / (beta * dt * dt)
    a1 = gamma / (beta * dt)
    a2 = 1.0 / (beta * dt)
    a3 = 1.0 / (2.0 * beta) - 1.0
    a4 = gamma / beta - 1.0
    a5 = 0.5 * dt * (gamma / beta - 2.0)
    k_eff = k + a0 * m + a1 * c
    rhs = f + m @ (a0 * q + a2 * v + a3 * a) + c @ (a1 * q + a4 * v + a5 * a)
    q1 = np.linalg.solve(k_eff, rhs)
    a1_new = a0 * (q1 - q) - a2 * v - a3 * a
    v1 = v + dt * ((1.0 - gamma) * a + gamma * a1_new)
    return q1, v1, a1_new


if _WANT_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _WANT_NUMBA = False

if _WANT_NUMBA:
    BACKEND = "numba"
    # helper must be jitted first so the kernels can call it in nopython mode
    _hermite_dxi = njit(cache=True)(_hermite_dxi)
    centroid_stretch = njit(cache=True)(_centroid_stretch_py)
    eval_deflection = njit(cache=True)(_eval_deflection_py)
    newmark_step = njit(cache=True)(_newmark_step_py)
else:
    BACKEND = "numpy"
    centroid_stretch = _centroid_stretch_numpy
    eval_deflection = _eval_deflection_py
    newmark_step = _newmark_step_py


def warmup():
    """Trigger JIT compilation before entering any deadline-bound loop."""
    q = np.zeros(4)
    centroid_stretch(q, 1.0, 1)
    eval_deflection(q, 1.0, 1, 0.5)
    eye = np.eye(2)
    z = np.zeros(2)
    newmark_step(eye, 0.0 * eye, eye, z, z, z, z, 1e-3, 0.25, 0.5)
