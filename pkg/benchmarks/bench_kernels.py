"""Time the numba kernels against their numpy twins on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is run once per backend to warm up (and to JIT-compile), then
timed ``--repeat`` times; the best time is reported together with the
largest relative difference between the two backends' results.
"""

import argparse
import time

import numpy as np

from robinlab import _accel, kernels


def _cases(rng):
    x = np.cos(np.linspace(0.01, 3.13, 129))
    pts = rng.standard_normal((8000, 3))
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    mass = rng.random(8000)
    xy = rng.random((6000, 2))
    a = rng.random(6000)
    return {
        "legendre_table (129 nodes, lmax 128)": lambda: kernels.legendre_table(x, 128),
        "sphere_ball_masses (8000 points)": lambda: kernels.sphere_ball_masses(pts, mass, 0.9),
        "log_pair_sum (6000 cells)": lambda: kernels.log_pair_sum(xy, a),
    }


def _best(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), np.asarray(out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    if len(backends) == 1:
        print("numba is not installed; timing the numpy backend only")
    prev = _accel.backend()
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} " + " ".join(f"{b:>10s}" for b in backends) + "   speedup   max rel diff")
    for name, fn in _cases(rng).items():
        res = {}
        for b in backends:
            _accel.set_backend(b)
            res[b] = _best(fn, args.repeat)
        row = f"{name:40s} " + " ".join(f"{res[b][0] * 1e3:8.1f}ms" for b in backends)
        if "numba" in res:
            ref, fast = res["numpy"][1], res["numba"][1]
            diff = float(np.max(np.abs(fast - ref)) / max(np.max(np.abs(ref)), 1e-300))
            row += f"   {res['numpy'][0] / res['numba'][0]:6.1f}x   {diff:.1e}"
        print(row)
    _accel.set_backend(prev)


if __name__ == "__main__":
    main()
