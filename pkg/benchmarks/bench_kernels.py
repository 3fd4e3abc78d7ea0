"""Benchmark the numba kernels against the pure-numpy fallback lane.

Runs each hot kernel at session-typical sizes plus the whole per-tick session
advance, in the backend selected by MICROBEAM_NUMBA. Run twice to compare:

    python benchmarks/bench_kernels.py
    MICROBEAM_NUMBA=0 python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from microbeam import kernels
from microbeam.service import CONFIG_DEFAULTS, build_session_config
from microbeam.session import HapticSession


def bench(label, fn, repeats=5000):
    fn()  # warm (jit-compile on the numba lane)
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    print(f"{label:45s} {best * 1e6:10.2f} us")
    return best


def main():
    print(f"kernel backend: {kernels.BACKEND}")
    n_elements = 32
    n_dof = 2 * (n_elements + 1)
    rng = np.random.default_rng(0)
    q = 1e-6 * rng.standard_normal(n_dof)
    h = 300e-6 / n_elements

    bench("centroid_stretch (32 elements)",
          lambda: kernels.centroid_stretch(q, h, n_elements))
    bench("eval_deflection",
          lambda: kernels.eval_deflection(q, h, n_elements, 1.7e-4))

    for n in (8, 62):
        m = np.eye(n) + 1e-3 * rng.random((n, n))
        m = 0.5 * (m + m.T)
        k = 4.0 * np.eye(n) + 1e-2 * rng.random((n, n))
        k = 0.5 * (k + k.T)
        c = 1e-3 * k
        f = rng.standard_normal(n)
        z = np.zeros(n)
        bench(f"newmark_step ({n} DOF dense)",
              lambda: kernels.newmark_step(m, c, k, f, z, z, z, 1e-3, 0.25, 0.5),
              repeats=2000)

    session = HapticSession(build_session_config(dict(CONFIG_DEFAULTS)))
    session.warmup()
    per_tick = bench("session.advance (n=32, modal m=8)", session.advance,
                     repeats=2000)
    print(f"\nper-tick budget at 1 kHz: 1000 us; headroom "
          f"{1000 - per_tick * 1e6:.0f} us")


if __name__ == "__main__":
    main()
