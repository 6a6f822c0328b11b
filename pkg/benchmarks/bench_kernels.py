"""Time the compiled kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The first compiled call (JIT warm-up) is excluded from the timings.
"""
import argparse
import time

import numpy as np

from countca import kernels
from countca._accel import HAVE_NUMBA
from countca.automaton import fd_rule
from countca.measures import MeasureParams, sample_batch


FD = fd_rule()


def _cases(rng):
    p = MeasureParams(extent=400)
    rows = sample_batch(p, 200, 300, 300, rng)
    line = sample_batch(p, 1, 0, 600, rng)[0]
    line[0] = 0
    drive = rng.choice(np.array([0, 2], np.uint8), size=(200, 256))
    drive[:, 0] = rows[:, 1]
    burn = rng.integers(0, 64, size=200).astype(np.int64)
    l = rng.integers(3, 8, size=40).astype(np.int64)
    c = np.array([rng.integers(0, 1 << int(v)) for v in l], dtype=np.int64)
    hdrive = rng.integers(1, 3, size=20_000).astype(np.int64)
    return {
        "table_apply": (rows, FD.table, 5, FD.radius),
        "fd_run": (rows, 128),
        "fd_column": (rows, burn, 128, 300),
        "fd_driven": (np.ascontiguousarray(rows[:, :80]), drive),
        "fd_split": (line, int(line[1]), 20_000),
        "h_run": (l, c, np.zeros_like(l), hdrive, False),
    }


def _time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<14}{'numba s':>12}{'numpy s':>12}{'speed-up':>10}")
    for name, call in _cases(rng).items():
        nb, np_ = kernels.implementations(name)
        nb(*call)
        t_nb = _time(nb, call, args.repeat)
        t_np = _time(np_, call, args.repeat)
        print(f"{name:<14}{t_nb:>12.5f}{t_np:>12.5f}{t_np / t_nb:>10.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
