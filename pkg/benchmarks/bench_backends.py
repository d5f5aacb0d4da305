#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Runs each hot kernel under both implementations (importing both variants
directly, regardless of DOCGAZE_BACKEND), checks they agree, and prints
per-kernel timings.
"""

import time

import numpy as np

from docgaze.backend import USING_NUMBA
from docgaze.kernels import (
    _conv1d_renorm_np,
    _kmeans_assign_np,
    _nw_matches_py,
    edge_mass,
    gaussian_kernel,
)


def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return out, best


def main():
    rng = np.random.default_rng(0)
    rows = []

    img = rng.random((320, 480))
    kern = gaussian_kernel(25.0)
    points = rng.random((5000, 4))
    centers = rng.random((6, 4))
    seq_a = rng.integers(0, 12, 400)
    seq_b = rng.integers(0, 12, 400)

    np_out, np_t = timeit(lambda: _conv1d_renorm_np(img, kern))
    rows.append(("gaussian blur pass 320x480 sigma=25", "numpy", np_t, None))
    kx_out, kx_t = timeit(lambda: _kmeans_assign_np(points, centers))
    rows.append(("kmeans assign 5000x4 k=6", "numpy", kx_t, None))
    nw_out, nw_t = timeit(lambda: _nw_matches_py(list(seq_a), list(seq_b)))
    rows.append(("needleman-wunsch 400x400", "numpy", nw_t, None))

    if USING_NUMBA:
        from docgaze.kernels import _conv1d_renorm_nb, _kmeans_assign_nb, _nw_matches_nb

        z = edge_mass(img.shape[1], kern)
        _conv1d_renorm_nb(img, kern, z)  # warm up JIT
        nb_out, nb_t = timeit(lambda: _conv1d_renorm_nb(img, kern, z))
        assert np.allclose(nb_out, np_out, rtol=1e-12, atol=1e-15)
        rows.append(("gaussian blur pass 320x480 sigma=25", "numba", nb_t,
                     np_t / nb_t))

        _kmeans_assign_nb(points, centers)
        knb_out, knb_t = timeit(lambda: _kmeans_assign_nb(points, centers))
        assert np.array_equal(knb_out[0], kx_out[0])
        rows.append(("kmeans assign 5000x4 k=6", "numba", knb_t, kx_t / knb_t))

        _nw_matches_nb(seq_a, seq_b)
        nwnb_out, nwnb_t = timeit(lambda: _nw_matches_nb(seq_a, seq_b))
        assert int(nwnb_out) == nw_out
        rows.append(("needleman-wunsch 400x400", "numba", nwnb_t,
                     nw_t / nwnb_t))
    else:
        print("numba unavailable or disabled; numpy timings only\n")

    print(f"{'kernel':<40} {'backend':<8} {'best (ms)':>10} {'speedup':>8}")
    for name, backend, t, speedup in rows:
        sp = f"{speedup:6.1f}x" if speedup else "      -"
        print(f"{name:<40} {backend:<8} {t * 1e3:>10.3f} {sp:>8}")


if __name__ == "__main__":
    main()
