"""Compiled vs pure-Python kernel throughput.

    python3 benchmarks/bench_kernels.py [--steps N]

Runs the single-circuit integrator, the coupled pair and the Lyapunov kernel
on the reference circuit, checks both backends give bit-identical states and
prints ns/step and the speedup.
"""

import argparse
import time

import numpy as np

from chualab import _pycore
from chualab.circuit import table_one
from chualab.integrator import _diode_arrays

try:
    from chualab import _core
except ImportError:
    _core = None


def _single(mod, n):
    p = table_one()
    bp, sl, gb, nb = _diode_arrays(p)
    state = np.array([0.1, 0.0, 0.0])
    out = np.empty((n // 10 + 1, 3))
    mod.integrate(state, 0, n, 1e-7, p.consts(), p.r0, 0.0, 0.0, bp, sl, gb, nb, 10, out, 0, 1e6)
    return state


def _pair(mod, n):
    p = table_one()
    bp, sl, gb, nb = _diode_arrays(p)
    state = np.array([0.1, 0.0, 0.0, -0.1, 0.05, 0.0])
    out = np.empty((n // 10 + 1, 6))
    mod.integrate_pair(state, 0, n, 1e-7, p.consts(), p.r0, p.consts(), p.r0,
                       bp, sl, gb, nb, bp, sl, gb, nb, 1, 0, 0.0, 10, out, 0, 1e6)
    return state


def _lyap(mod, n):
    p = table_one()
    bp, sl, gb, nb = _diode_arrays(p)
    state = np.array([0.1, 0.0, 0.0])
    acc, _ = mod.lyapunov(state, 1e-7, 0, 1000, max(1, n // 1000), 1e-8, p.consts(), p.r0,
                          bp, sl, gb, nb, p.tank_impedance, 1e6)
    return np.append(state, acc)


def _time(fn, mod, n):
    t = time.perf_counter()
    s = fn(mod, n)
    return (time.perf_counter() - t) / n * 1e9, s


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=20000, help="steps for the Python backend")
    ap.add_argument("--factor", type=int, default=100, help="compiled runs this many times more steps")
    a = ap.parse_args()
    print(f"{'kernel':<10}{'python ns/step':>16}{'compiled ns/step':>18}{'speedup':>10}  identical")
    for name, fn in (("single", _single), ("pair", _pair), ("lyapunov", _lyap)):
        tp, sp = _time(fn, _pycore, a.steps)
        if _core is None:
            print(f"{name:<10}{tp:16.1f}{'n/a':>18}{'n/a':>10}  n/a")
            continue
        _, sc = _time(fn, _core, a.steps)
        tc, _ = _time(fn, _core, a.steps * a.factor)
        print(f"{name:<10}{tp:16.1f}{tc:18.1f}{tp / tc:10.1f}  {np.array_equal(sp, sc)}")


if __name__ == "__main__":
    main()
