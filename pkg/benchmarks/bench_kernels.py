"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Compilation is excluded by a warm-up call.  Outputs agree across backends;
the script asserts that too.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from wiretap_ot import kernels
from wiretap_ot.bounds import _lp_system, _subsets, besbc_constants
from wiretap_ot.channel import ChannelParams
from wiretap_ot.hashing import pack_bits, sample_linear_hash


def best_of(fn, repeat: int) -> float:
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    h = sample_linear_hash(8000, 3000, rng)
    x = pack_bits(rng.integers(0, 2, 8000, dtype=np.uint8))
    yield "gf2_matvec 3000x8000", lambda b: kernels.gf2_matvec(h.words, x, backend=b)

    params = ChannelParams(0.4, 0.2, 0.5)
    c = besbc_constants(params)
    A, bvec = _lp_system(c, params.eps1)
    subsets = _subsets(A.shape[1], A.shape[2])
    yield "lp_vertex_candidates 4x715", lambda b: kernels.lp_vertex_candidates(A, bvec, subsets, backend=b)
    yield "grid_maxmin res=1000", lambda b: kernels.grid_maxmin(c.C0, c.CG, c.CB, params.eps1, 1000, backend=b)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        print("numba not importable; only the numpy path can be timed")
    print(f"{'kernel':32s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases():
        t_np = best_of(lambda: fn("numpy"), args.repeat)
        if kernels.HAVE_NUMBA:
            a, b = fn("numpy"), fn("numba")
            if isinstance(a, tuple):
                assert abs(a[0] - b[0]) < 1e-12, name
            else:
                ua = np.unique(np.round(a, 9), axis=0)
                ub = np.unique(np.round(b, 9), axis=0)
                assert ua.shape == ub.shape and np.allclose(ua, ub), name
            t_nb = best_of(lambda: fn("numba"), args.repeat)
            print(f"{name:32s} {t_np * 1e3:12.3f} {t_nb * 1e3:12.3f} {t_np / t_nb:8.1f}x")
        else:
            print(f"{name:32s} {t_np * 1e3:12.3f} {'-':>12s} {'-':>8s}")


if __name__ == "__main__":
    main()
