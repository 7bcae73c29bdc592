"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the comparison does not depend on
MINMETRIC_PURE_PYTHON. Outputs are checked for agreement before timing.
"""

import argparse
import timeit

import numpy as np

from minmetric import _pykernels
from minmetric.groups import make_group
from minmetric.linalg import random_skew_hermitian, expm_skew

try:
    from minmetric import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    tower = make_group({"kind": "finite_cyclic_tower", "p": 2, "depth": 11})
    step = np.ascontiguousarray(tower.table[:, 1:], dtype=np.int64)
    weight = rng.random(step.shape[1]) + 0.01
    gens = np.array([0, step.shape[1] - 1], dtype=np.int64)  # +1 and -1
    us = np.stack([expm_skew(random_skew_hermitian(rng, 3, 0.3)) for _ in range(512)])
    ms = rng.standard_normal((4096, 3, 3)) + 1j * rng.standard_normal((4096, 3, 3))
    return {
        "dijkstra_steps (2048 nodes, dense)": lambda k: k.dijkstra_steps(step, weight, 0),
        "bfs_steps (2048 nodes)": lambda k: k.bfs_steps(step, gens, 0),
        "opnorm_batch (4096 x 3x3)": lambda k: k.opnorm_batch(ms, 1e-13, 64)[0],
        "power_trace_batch (512 x 64 powers)": lambda k: k.power_trace_batch(us, 64)[0],
        "dyadic_trace_batch (512 x 16 squarings)": lambda k: k.dyadic_trace_batch(us, 16)[0],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    if _ckernels is None:
        print("compiled extension not built; only the fallback is timed")
    print(f"{'kernel':42s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speed-up':>9s}")
    for name, fn in cases(rng).items():
        t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:42s} {t_py:12.2f} {'-':>12s} {'-':>9s}")
            continue
        a, b = np.asarray(fn(_pykernels)), np.asarray(fn(_ckernels))
        if not np.allclose(a, b, rtol=1e-10, atol=1e-12):
            raise SystemExit(f"backends disagree on {name}")
        t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:42s} {t_py:12.2f} {t_c:12.2f} {t_py / t_c:8.1f}x")


if __name__ == "__main__":
    main()
