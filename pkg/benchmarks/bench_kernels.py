"""Compare the numba loop kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Both implementations are called directly, so the LVGEN_NUMBA flag does not
matter here. Prints best-of-N wall time per call and checks agreement.
"""
import argparse
import time

import numpy as np

from lvgen.metrics.kernels import sqdist_loop, sqdist_numpy
from lvgen.powerflow import build_ybus, load_fixture
from lvgen.powerflow.solver import bus_power_loop, bus_power_numpy, jacobian_loop, jacobian_numpy


def best_of(fn, args, repeat):
    fn(*args)  # warm-up, includes JIT compilation for the loop versions
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    x = rng.normal(size=(400, 96))
    y = rng.normal(size=(300, 96))
    net = load_fixture()
    ybus = build_ybus(net)
    g, b = ybus.real.copy(), ybus.imag.copy()
    v = rng.uniform(0.97, 1.03, net.n_bus)
    th = rng.uniform(-0.05, 0.05, net.n_bus)
    pq = net.pq

    cases = [
        ("sqdist 400x300x96", sqdist_loop, sqdist_numpy, (x, y)),
        ("bus_power 77-bus", bus_power_loop, bus_power_numpy, (v, th, g, b)),
        ("jacobian 77-bus", jacobian_loop, jacobian_numpy, (v, th, g, b, pq)),
    ]
    print(f"{'kernel':<22}{'numba (ms)':>12}{'numpy (ms)':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, loop, vec, a in cases:
        tl = best_of(loop, a, args.repeat)
        tv = best_of(vec, a, args.repeat)
        diff = np.max(np.abs(np.asarray(loop(*a)) - np.asarray(vec(*a))))
        print(f"{name:<22}{tl * 1e3:>12.3f}{tv * 1e3:>12.3f}{tv / tl:>10.2f}{diff:>14.2e}")


if __name__ == "__main__":
    main()
