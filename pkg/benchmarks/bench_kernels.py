"""Compare the compiled and pure-Python kernel backends.

Run with ``python3 benchmarks/bench_kernels.py``.  Each kernel is timed on
identical inputs in both backends; outputs are checked to agree first.
"""
import argparse
import json
import math
import timeit

import numpy as np

from mixspec import _pure, lsd
from mixspec import processes as P

try:
    from mixspec import _kernels
except ImportError:  # extension not built
    _kernels = None


def cases(scale: float):
    rng = np.random.default_rng(0)
    L = int(200_000 * scale)
    u, fresh = rng.random(L), rng.uniform(-1, 1, L)
    digits = rng.integers(0, 2, L + 63, dtype=np.uint8)
    f = lsd.spectral_density(P.autocovariance_closed_form(P.ProcessSpec(kind="harris_chain"), 2000))
    w, p = lsd.quadrature_nodes(f, 512)
    z = np.linspace(-0.5, 6.0, max(8, int(200 * scale))) + 1e-3j
    return {
        f"harris_path L={L}": lambda m: m.harris_path(0.3, u, fresh),
        f"doubling_windows L={L}": lambda m: m.doubling_windows(digits, L),
        f"solve_points {z.size} pts, {w.size} nodes": lambda m: m.solve_points(z, w, p, 1.0, 1e-12, 10_000),
    }


def agree(a, b) -> bool:
    if isinstance(a, tuple):
        return all(agree(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype.kind in "fc":
        return bool(np.allclose(a, b, rtol=0, atol=1e-10))
    return bool(np.array_equal(a, b))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scale", type=float, default=1.0, help="problem size multiplier")
    parser.add_argument("--repeat", type=int, default=3, help="timings per kernel; the best is kept")
    parser.add_argument("--json", action="store_true", help="print results as JSON")
    args = parser.parse_args(argv)

    backends = {"python": _pure}
    if _kernels is not None:
        backends["cython"] = _kernels
    results = []
    for name, run in cases(args.scale).items():
        row = {"kernel": name}
        outputs = {}
        for label, mod in backends.items():
            outputs[label] = run(mod)
            row[label] = min(timeit.repeat(lambda: run(mod), number=1, repeat=args.repeat))
        if "cython" in row:
            row["agree"] = agree(outputs["python"], outputs["cython"])
            row["speedup"] = row["python"] / row["cython"] if row["cython"] > 0 else math.inf
        results.append(row)

    if args.json:
        print(json.dumps(results, indent=2))
        return 0
    if _kernels is None:
        print("compiled extension not built; timing the pure-Python backend only")
    print(f"{'kernel':42s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s}  agree")
    for r in results:
        if "cython" in r:
            print(f"{r['kernel']:42s} {r['python']:10.4f} {r['cython']:10.4f} {r['speedup']:8.1f}  {r['agree']}")
        else:
            print(f"{r['kernel']:42s} {r['python']:10.4f} {'-':>10s} {'-':>8s}  -")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
