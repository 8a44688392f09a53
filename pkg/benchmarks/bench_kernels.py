"""Compiled vs numpy kernel timings.

    python benchmarks/bench_kernels.py [--repeat 7] [--steps 300]

Per-kernel timings call both backends in-process. The training-step timing runs
a short stage-1 loop in a subprocess per backend, since the backend is chosen
at import time.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from dglgan import kernels

STEP_SNIPPET = """
import time
from dataclasses import replace
from dglgan import kernels, trainer
from dglgan.config import ExperimentConfig
from dglgan.distill import Strategy
cfg = replace(ExperimentConfig.default().train_config(strategy=Strategy("baseline"), multiplier=1, seed=0),
              T={steps}, S=0, eval_every=10**9)
t0 = time.perf_counter()
trainer.stage1(cfg)
print(kernels.BACKEND, (time.perf_counter() - t0) / {steps})
"""


def cases():
    rs = np.random.default_rng(0)
    act = rs.normal(size=(64, 64)) * 3
    grad = rs.normal(size=(64, 64))
    k = 32
    a, b = rs.uniform(0.01, 1, k), rs.uniform(0.01, 1, k)
    pts = rs.normal(size=(4096, 2))
    return {
        "sigmoid 64x64": lambda m: m.sigmoid(act),
        "softplus 64x64": lambda m: m.softplus(act),
        "leaky_relu 64x64": lambda m: m.leaky_relu(act, 0.2),
        "leaky_relu_grad 64x64": lambda m: m.leaky_relu_grad(act, grad, 0.2),
        "tabular_ascent K=32": lambda m: m.tabular_ascent(a, b, np.zeros(k), 1.0, 1e-12, 100000, -16.0, 16.0),
        "hist2d 4096 pts 60x60": lambda m: m.hist2d(pts, -3.0, 3.0, -3.0, 3.0, 60, 60),
    }


def best_of(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def step_time(pure: bool, steps: int) -> float:
    env = dict(os.environ, DGLGAN_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", STEP_SNIPPET.format(steps=steps)], env=env,
                         capture_output=True, text=True, check=True).stdout.split()
    return float(out[1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--steps", type=int, default=300)
    args = ap.parse_args(argv)
    if kernels.compiled_backend is None:
        print("compiled kernels are not built; nothing to compare", file=sys.stderr)
        return 1
    py, cy = kernels.get_backend("python"), kernels.get_backend("cython")
    print("kernel,python_us,cython_us,speedup")
    for name, fn in cases().items():
        tp, tc = best_of(lambda: fn(py), args.repeat), best_of(lambda: fn(cy), args.repeat)
        print(f"{name},{tp * 1e6:.2f},{tc * 1e6:.2f},{tp / tc:.2f}")
    tp, tc = step_time(True, args.steps), step_time(False, args.steps)
    print(f"train step [64,64] batch 64,{tp * 1e6:.1f},{tc * 1e6:.1f},{tp / tc:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
