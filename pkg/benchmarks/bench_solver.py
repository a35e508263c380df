"""Time the compiled and pure-Python Dijkstra kernels on the same raster.

    python benchmarks/bench_solver.py [--h 1/256] [--repeat 3]
"""
import argparse
import time
from fractions import Fraction

import numpy as np

from qhavg import kernels
from qhavg.geometry import Cusp, UnitCube, rasterize
from qhavg.solver import solve


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--h", default="1/256")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    h = float(Fraction(args.h))
    backends = kernels.available_backends()
    cases = [("unit square", UnitCube(2), (0.5, 0.1)), ("cusp alpha=3", Cusp(alpha=3.0, n=2, x_min=0.19), (0.9, 0.0))]
    print(f"h = {args.h}, backends: {', '.join(backends)}")
    for name, spec, z0 in cases:
        raster = rasterize(spec, h)
        row, fields = [], {}
        for b in backends:
            t, fld = best_of(lambda: solve(raster, z0, backend=b), args.repeat)
            fields[b] = fld.k
            row.append(f"{b} {t * 1e3:8.1f} ms")
        line = f"{name:14s} cells={raster.n_inside:7d}  " + "  ".join(row)
        if len(fields) == 2:
            a, c = fields["python"], fields["cython"]
            fin = np.isfinite(a)
            line += f"  speedup {float(row[0].split()[1]) / float(row[1].split()[1]):5.1f}x"
            line += f"  max|diff| {np.max(np.abs(a[fin] - c[fin])):.1e}"
        print(line)


if __name__ == "__main__":
    main()
