"""Compare the compiled and NumPy element kernels.

Usage::

    python benchmarks/bench_kernels.py [--h 0.0625] [--repeat 5]

Reports the best-of-``repeat`` wall time of each kernel on every backend
and the largest entrywise difference between the backends.
"""

import argparse
import time

import numpy as np

from oseencpf.fem import _kernels_py, build_spaces
from oseencpf.mesh import ChannelParams, generate_channel_mesh

try:
    from oseencpf.fem import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=0.0625)
    ap.add_argument("--sides", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    space = build_spaces(generate_channel_mesh(ChannelParams(h=args.h, sides=args.sides)))
    rng = np.random.default_rng(0)
    wloc = rng.standard_normal((space.mesh.n_triangles, 12))
    cases = {
        "stokes": lambda k: k.stokes_local(space.grads, space.areas),
        "divergence": lambda k: k.divergence_local(space.grads, space.areas),
        "convection": lambda k: k.convection_local(space.grads, space.areas, wloc),
    }
    print(f"{space.mesh.n_triangles} triangles, {space.n_velocity} velocity DOFs")
    print(f"{'kernel':<12}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>9}{'max diff':>11}")
    for name, call in cases.items():
        t_py, out_py = best_of(lambda: call(_kernels_py), args.repeat)
        if _kernels_c is None:
            print(f"{name:<12}{1e3 * t_py:12.2f}{'n/a':>13}")
            continue
        t_c, out_c = best_of(lambda: call(_kernels_c), args.repeat)
        a = np.concatenate([np.ravel(x) for x in (out_py if isinstance(out_py, tuple) else (out_py,))])
        b = np.concatenate([np.ravel(x) for x in (out_c if isinstance(out_c, tuple) else (out_c,))])
        diff = np.abs(a - b).max() / max(np.abs(a).max(), 1e-300)
        print(f"{name:<12}{1e3 * t_py:12.2f}{1e3 * t_c:13.2f}{t_py / t_c:9.1f}{diff:11.1e}")


if __name__ == "__main__":
    main()
