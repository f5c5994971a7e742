"""Benchmark the compiled kernel backend against the numpy fallback.

Times the fused elementwise kernels at several sizes, then a composed
encoder/decoder training step under each backend. Run from the repo root:

    python benchmarks/bench_kernels.py
"""

import argparse
import time

import numpy as np

from dual_aae import kernels
from dual_aae.distributions import PriorSpec
from dual_aae.optim import AdamState
from dual_aae.trainer import TrainConfig, build_state, train_step


def _timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(sizes, repeats):
    rng = np.random.default_rng(0)
    rows = []
    for size in sizes:
        x = rng.standard_normal(size)
        g = rng.standard_normal(size)
        u = rng.random(size)
        cases = {
            "leaky_relu_fwd": lambda k: k.leaky_relu_fwd(x, 0.1),
            "leaky_relu_bwd": lambda k: k.leaky_relu_bwd(x, g, 0.1),
            "sigmoid_fwd": lambda k: k.sigmoid_fwd(x),
            "dropout_fwd": lambda k: k.dropout_fwd(x, u, 0.2),
        }

        def adam_case(k):
            p = x.copy()
            m = np.zeros_like(p)
            v = np.zeros_like(p)
            k.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)

        cases["adam_update"] = adam_case
        for name, case in cases.items():
            times = {}
            for backend in kernels.available_backends():
                kernels.use_backend(backend)
                times[backend] = _timeit(lambda: case(kernels), repeats)
            rows.append((name, size, times))
    return rows


def bench_train_step(backends, steps=20):
    """One small-model training step per backend (same seed, same data)."""
    results = {}
    for backend in backends:
        kernels.use_backend(backend)
        cfg = TrainConfig(prior=PriorSpec(k=4, d_h=2, d_z=2),
                          data_mode="feature", enc_hidden=(256, 256),
                          dec_hidden=(256, 256), batch_size=128, epochs=1)
        rng = np.random.default_rng(0)
        state = build_state(cfg, in_dim=64)
        opt_g = AdamState.for_params(state.enc_dec_params(), cfg.lr_enc_dec)
        opt_c = AdamState.for_params(state.critic_params(), cfg.lr_critic)
        batch = rng.standard_normal((cfg.batch_size, 64))
        train_step(state, batch, cfg, opt_g, opt_c, rng)  # warm up
        t0 = time.perf_counter()
        for _ in range(steps):
            train_step(state, batch, cfg, opt_g, opt_c, rng)
        results[backend] = (time.perf_counter() - t0) / steps
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[10_000, 100_000, 1_000_000])
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"available backends: {', '.join(backends)}")
    if "compiled" not in backends:
        print("compiled backend missing; showing python timings only\n")

    print(f"{'kernel':<16} {'size':>9} " +
          " ".join(f"{b:>12}" for b in backends) + "   speedup")
    for name, size, times in bench_kernels(args.sizes, args.repeats):
        cells = " ".join(f"{times[b] * 1e6:>10.1f}us" for b in backends)
        if "compiled" in times and times["compiled"] > 0:
            speedup = f"{times['python'] / times['compiled']:>8.2f}x"
        else:
            speedup = "       -"
        print(f"{name:<16} {size:>9} {cells} {speedup}")

    print("\ncomposed training step (batch 128, widths 256):")
    for backend, seconds in bench_train_step(backends).items():
        print(f"  {backend:<9} {seconds * 1e3:8.2f} ms/step")
    kernels.use_backend(kernels._initial_choice())


if __name__ == "__main__":
    main()
