"""Compare kernel backends on training-shaped workloads.

Times one order-2 forward+backward pass (the residual term of the
objective, which dominates) and one full objective evaluation per
built-in problem, for every available backend and dtype.

Run:  python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from dspinn import geometry as geo
from dspinn import kernels, loss, net, problems

LAYERS = [2, 50, 50, 50, 50, 50, 1]


def time_call(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_jets(backend, n, dtype, repeats):
    rng = np.random.default_rng(0)
    params = net.init_params(LAYERS, rng)
    w = [a.astype(dtype) for a in params.weights]
    b = [a.astype(dtype) for a in params.biases]
    x = rng.uniform(-1, 1, (n, 2)).astype(dtype)
    ws = backend.JetWorkspace(LAYERS, n, 2, dtype)
    wv = np.ones(n, dtype)
    wh = np.ones((2, n), dtype)
    out = np.empty(params.n_params, dtype)

    def step():
        backend.jet_forward(ws, w, b, x)
        backend.jet_backward(ws, w, b, wv, None, wh, out=out)

    step()
    return time_call(step, repeats)


def bench_objective(backend, problem_name, dtype, repeats):
    p = problems.builtin(problem_name)
    ts = geo.build_training_set(p, geo.SampleCounts(), np.random.default_rng(0))
    z = loss.compute_normalizers(ts, p)
    params = net.init_params(LAYERS, np.random.default_rng(1))
    ev = loss.LossEvaluator(LAYERS, "nds", ts, p, normalizers=z,
                            dtype=dtype, backend=backend)
    theta = net.flatten(params)
    ev(theta)
    return time_call(lambda: ev(theta), repeats), ts


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    names = kernels.available_backends()
    print(f"backends: {', '.join(names)}")
    print(f"network: {LAYERS}")

    print("\norder-2 jet forward+backward, batch 10000")
    for dt in (np.float64, np.float32):
        for name in names:
            be = kernels.get_backend(name)
            t = bench_jets(be, 10000, dt, args.repeats)
            print(f"  {name:8s} {np.dtype(dt).name:8s} {t * 1e3:8.1f} ms")

    print("\nfull objective (nds, default sample counts)")
    for pname in problems.available_problems():
        if pname == "smooth_sanity":
            continue
        for name in names:
            be = kernels.get_backend(name)
            t, ts = bench_objective(be, pname, np.float64, args.repeats)
            pts = ts.n_interior + ts.n_boundary + 2 * ts.n_interface
            print(f"  {pname:6s} {name:8s} float64 {t * 1e3:8.1f} ms"
                  f"   ({pts} evaluation points)")


if __name__ == "__main__":
    main()
