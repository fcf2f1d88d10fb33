"""Time the hot kernels under both backends.

Run ``python3 benchmarks/bench_kernels.py --steps 1000000``. Compilation
time of the numba backend is reported separately from the timed runs, and
each row reports the largest difference between backend outputs (zero
for the samplers, rounding level for the solver).
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from maxentchain import complete_bernoulli, maxent_product_form, simulate_direct, simulate_splice
from maxentchain.io import spec_from_dict
from maxentchain.kernels import available_backends

DESK = {
    "visible": ["i1", "i2"], "hidden": ["e1", "e2"],
    "P_II": [[0.3, 0.3], [0.3, 0.3]], "P_IE": [[0.2, 0.2], [0.1, 0.3]],
    "P_EI": [[0.3, 0.3], [0.3, 0.3]], "pi_I": [0.3, 0.3],
}


def best_of(fn, repeats):
    times, out = [], None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def product_form_case(n, seed):
    rng = np.random.default_rng(seed)
    L = (rng.random((n, n)) < 0.3).astype(float)
    L[np.arange(n), (np.arange(n) + 1) % n] = 1.0
    np.fill_diagonal(L, 1.0)
    pihat = rng.dirichlet(np.ones(n))
    return pihat, L


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=1_000_000)
    parser.add_argument("--size", type=int, default=40, help="labyrinth size for the solver")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)

    chain = complete_bernoulli(spec_from_dict(DESK))
    pihat, L = product_form_case(args.size, 0)
    cases = {
        f"splice T={args.steps}": lambda b: simulate_splice(chain, args.steps, 1, backend=b).w,
        f"direct T={args.steps}": lambda b: simulate_direct(chain, args.steps, 1, backend=b),
        f"product form n={args.size}": lambda b: maxent_product_form(pihat, L, backend=b).p_hat,
    }
    backends = available_backends()

    if "numba" in backends:
        t0 = time.perf_counter()
        simulate_splice(chain, 10, 0, backend="numba")
        simulate_direct(chain, 10, 0, backend="numba")
        maxent_product_form(pihat, L, backend="numba")
        print(f"numba compile/load: {time.perf_counter() - t0:.2f}s")

    print(f"{'kernel':<26}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}  max|diff|")
    for name, fn in cases.items():
        timings, outputs = {}, {}
        for b in backends:
            timings[b], outputs[b] = best_of(lambda: fn(b), args.repeats)
        diff = max(float(np.abs(np.asarray(outputs[b], float) - outputs[backends[0]]).max())
                   for b in backends)
        speed = timings["numpy"] / timings["numba"] if len(backends) == 2 else float("nan")
        row = "".join(f"{timings[b]:>11.4f}s" for b in backends)
        print(f"{name:<26}{row}{speed:>9.1f}x  {diff:.1e}")


if __name__ == "__main__":
    main()
