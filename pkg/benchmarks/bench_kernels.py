"""Compare the compiled and numpy Radon plane kernels.

    python3 benchmarks/bench_kernels.py [--n 48] [--directions 60] [--repeat 3]

Prints the best wall time of each backend and the maximum difference
between their outputs.
"""
import argparse
import time

import numpy as np

from dissipscat import _pykernels
from dissipscat.translation_rep import _plane_frames, sphere_quadrature

try:
    from dissipscat import _ckernels
except ImportError:
    _ckernels = None


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=48)
    ap.add_argument("--directions", type=int, default=60)
    ap.add_argument("--ns", type=int, default=64)
    ap.add_argument("--fields", type=int, default=6)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    n, L = args.n, 8.0
    h = L / n
    x = -0.5 * L + h * np.arange(n)
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"))
    base = np.exp(-np.sum(X**2, axis=0) / 0.5)
    vol = np.ascontiguousarray(np.stack([base * (1 + 0.1 * c) for c in range(args.fields)]))
    origin = np.full(3, -0.5 * L)
    normals = sphere_quadrature(8).nodes[: args.directions]
    normals = np.ascontiguousarray(normals)
    e1, e2 = _plane_frames(normals)
    radius = 2.5
    s = np.linspace(-radius, radius, args.ns)
    call = lambda mod: mod.radon_planes(vol, origin, h, normals, e1, e2, s, radius,
                                        args.threads)

    t_py, out_py = best_time(lambda: call(_pykernels), args.repeat)
    print(f"grid {n}^3, {len(normals)} directions x {len(s)} offsets x {args.fields} fields")
    print(f"python    {t_py:9.4f} s")
    if _ckernels is None:
        print("compiled  unavailable (extension not built)")
        return
    t_c, out_c = best_time(lambda: call(_ckernels), args.repeat)
    diff = np.abs(out_c - out_py).max() / np.abs(out_py).max()
    print(f"compiled  {t_c:9.4f} s   ({args.threads} thread(s))")
    print(f"speedup   {t_py / t_c:9.1f} x")
    print(f"max relative difference {diff:.2e}")


if __name__ == "__main__":
    main()
