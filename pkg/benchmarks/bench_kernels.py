"""Time the tube-flux node kernel: compiled extension vs numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 20] [--degree 10 12]

Also times one full bound-flux window with each backend.
"""
import argparse
import time

import numpy as np

from rrlab import _backend, fluxlab as fl
from rrlab.worldline import WorldlineSpec


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--degree", type=int, nargs="+", default=[8, 10, 12])
    ap.add_argument("--window", action="store_true", help="also time a full [0,1] window")
    args = ap.parse_args(argv)

    backends = sorted(_backend.BACKENDS)
    if "compiled" not in backends:
        print("compiled extension not built; only the numpy kernel is timed")
    print(f"{'D':>2} {'deg':>4} {'nodes':>6} " + " ".join(f"{b:>12}" for b in backends) + "  speedup")
    for D, spec in ((4, "circular:omega=0.8,R=0.5"), (6, "circular:omega=0.8,R=0.5")):
        w = WorldlineSpec.parse(spec, D)
        st = w.state(0.3, 3)
        for deg in args.degree:
            rule = fl.sphere_quadrature(D - 2, deg)
            k, _ = fl.lab_directions(rule, st.u)
            k = np.ascontiguousarray(k)
            a1 = st.a1 if D == 6 else np.zeros(D)
            cols = {}
            for b in backends:
                kern = _backend.get(b)
                cols[b] = best_of(lambda: kern(k, rule.weights, st.z, st.u, st.a, a1, D, 1.0),
                                  args.repeat)
            speed = cols["python"] / cols["compiled"] if "compiled" in cols else float("nan")
            print(f"{D:>2} {deg:>4} {rule.size:>6} "
                  + " ".join(f"{cols[b] * 1e3:>10.3f}ms" for b in backends) + f"  {speed:6.1f}x")

    if args.window:
        w = WorldlineSpec.parse("hyperbolic:g=0.2", 6)
        for b in backends:
            t0 = time.perf_counter()
            fl.tube_flux_window(w, 0.0, 1.0, 0.05, "bnd", backend=b)
            print(f"6D bound window [0,1] ({b}): {time.perf_counter() - t0:.2f}s")


if __name__ == "__main__":
    main()
