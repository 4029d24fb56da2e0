"""Wall-clock comparison of the compiled and plain-numpy kernel builds.

Runs the same noisy trajectory on both backends for each model family
and reports steps per second plus the largest final-weight discrepancy.
The builds agree to roundoff, not bit for bit.  The compiled build wins
by an order of magnitude on the small-vector kernel; the batched
sensing and network cases spend their time in BLAS either way, and the
numpy build can come out ahead on machines without SVML.

Usage: python benchmarks/bench_kernels.py [--steps N] [--repeats K]
"""

import argparse
import time

import numpy as np

from driftlab.backend import HAS_NUMBA
from driftlab.models import (
    MLPDataset,
    MLPModel,
    MatrixSensingModel,
    NoiseMap,
    VectorUVModel,
    sensing_dataset,
    uv_dataset,
)
from driftlab.numerics import RandomStream, gaussian_stream
from driftlab.optimizer import HyperParams, project_to_manifold, run_trajectory


def _uv_case():
    model = VectorUVModel(10, uv_dataset(5, RandomStream(2, 0)))
    w0 = model.manifold_point(RandomStream(2, 1))
    return "vector-uv n=10 P=5", model, w0, HyperParams(eta=0.01, beta=0.9)


def _sensing_case():
    model = MatrixSensingModel(sensing_dataset(20, 2, 200, RandomStream(2, 0)))
    w0 = project_to_manifold(model, model.identity_init(), loss_tol=1e-11)
    return "matrix-sensing d=20 P=200", model, w0, HyperParams(eta=0.1, beta=0.9)


def _mlp_case():
    stream = RandomStream(2, 0)
    x = gaussian_stream(stream, (256, 16))
    y = np.sign(gaussian_stream(stream.child(1), (256, 1)))
    model = MLPModel((16, 32, 1), "tanh", MLPDataset(x=x, y=y))
    s = RandomStream(2, 1)
    w0 = np.concatenate([gaussian_stream(s, 32), gaussian_stream(s.child(1), (32, 16)).ravel() / 4.0])
    return "mlp 16-32-1 P=256", model, w0, HyperParams(eta=0.05, beta=0.9)


def _run(model, w0, hyper, steps, backend):
    return run_trajectory(
        model,
        w0,
        hyper,
        noise=NoiseMap(variant="gaussian", epsilon=0.5),
        stream=RandomStream(7, 0),
        max_steps=steps,
        record_every=steps,
        divergence_limit=1e30,
        backend=backend,
    )


def _time_backend(model, w0, hyper, steps, repeats, backend):
    _run(model, w0, hyper, min(steps, 200), backend)  # compile + cache warmup
    best = float("inf")
    rec = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        rec = _run(model, w0, hyper, steps, backend)
        best = min(best, time.perf_counter() - t0)
    return steps / best, rec


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=20_000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    if len(backends) == 1:
        print("compiled build unavailable; timing the numpy build only")

    header = f"{'case':28s} " + " ".join(f"{b + ' steps/s':>16s}" for b in backends)
    print(header + ("  max |dw|" if len(backends) == 2 else ""))
    print("-" * len(header))
    for case in (_uv_case, _sensing_case, _mlp_case):
        name, model, w0, hyper = case()
        rates, finals = [], []
        for backend in backends:
            rate, rec = _time_backend(model, w0, hyper, args.steps, args.repeats, backend)
            rates.append(rate)
            finals.append(rec.final_w)
        line = f"{name:28s} " + " ".join(f"{r:16.0f}" for r in rates)
        if len(finals) == 2:
            line += f"  {np.abs(finals[0] - finals[1]).max():.3e}"
        print(line)


if __name__ == "__main__":
    main()
