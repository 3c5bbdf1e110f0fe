"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N] [--json]

Times ``lattice_keys`` (torus enumeration, single thread) and
``neumaier_sum`` for both backends and checks that they agree.
"""
import argparse
import json
import math
import sys
import timeit

import numpy as np

from bieberbach import _kernels_py

try:
    from bieberbach import _kernels
except ImportError:
    _kernels = None

COUPLINGS = {"pi/2": 0.0, "2pi/3": -1.0, "pi/4": math.sqrt(2.0)}


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_lattice(radius, token, repeat):
    c = COUPLINGS[token]
    xmax = 2 * radius
    xs = np.arange(-xmax + 1, xmax + 1, 2, dtype=np.int64)
    bound = float(4 * radius * radius)
    row = {"kernel": "lattice_keys", "case": f"phi={token} lambda_max={radius}"}
    py = lambda: _kernels_py.lattice_keys(xs, 0, 0, c, bound, 1e-6)
    row["python_s"] = _best(py, repeat)
    a, _ = py()
    row["points"] = int(len(a))
    if _kernels is not None:
        cy = lambda: _kernels.lattice_keys(xs, 0, 0, c, bound, 1e-6)
        row["compiled_s"] = _best(cy, repeat)
        ca, cb = cy()
        pa, pb = py()
        row["agree"] = sorted(zip(ca.tolist(), cb.tolist())) == sorted(zip(pa.tolist(), pb.tolist()))
    return row


def bench_sum(n, repeat):
    rng = np.random.default_rng(7)
    vals = rng.standard_normal(n) * 10.0 ** rng.integers(-8, 8, n)
    row = {"kernel": "neumaier_sum", "case": f"n={n}", "points": n}
    row["python_s"] = _best(lambda: _kernels_py.neumaier_sum(vals), repeat)
    if _kernels is not None:
        row["compiled_s"] = _best(lambda: _kernels.neumaier_sum(vals), repeat)
        row["agree"] = _kernels.neumaier_sum(vals) == _kernels_py.neumaier_sum(vals)
    return row


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", action="store_true", help="emit JSON lines instead of a table")
    args = ap.parse_args(argv)
    rows = [bench_lattice(r, t, args.repeat) for r in (20, 40) for t in COUPLINGS]
    rows += [bench_sum(n, args.repeat) for n in (10_000, 1_000_000)]
    if _kernels is None:
        print("compiled extension not built; timing the fallback only", file=sys.stderr)
    for row in rows:
        if "compiled_s" in row:
            row["speedup"] = row["python_s"] / row["compiled_s"]
        if args.json:
            print(json.dumps(row, sort_keys=True))
    if not args.json:
        print(f"{'kernel':<14}{'case':<28}{'points':>10}{'python s':>12}{'compiled s':>12}{'speedup':>9}  agree")
        for r in rows:
            print(f"{r['kernel']:<14}{r['case']:<28}{r['points']:>10}{r['python_s']:>12.4f}"
                  f"{r.get('compiled_s', float('nan')):>12.4f}{r.get('speedup', float('nan')):>9.1f}  {r.get('agree', '-')}")
    return 0 if all(r.get("agree", True) for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
