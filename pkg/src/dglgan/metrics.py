"""Toy quality metrics, the SmoothGrad input-gradient probe, and inference timing."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass

import numpy as np

from . import kernels, nn, oracle
from . import numcore as nc

WARMUP_RUNS = 10


@dataclass(frozen=True)
class GaussianFit:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=np.float64)
        if not np.allclose(cov, cov.T, atol=1e-12, rtol=0):
            raise ValueError("covariance must be symmetric")
        cov = 0.5 * (cov + cov.T)
        w, v = np.linalg.eigh(cov)
        if w.min() < -1e-10:
            raise ValueError(f"covariance is not positive semi-definite (eigenvalue {w.min():.3g})")
        if w.min() < 0:
            cov = (v * np.clip(w, 0.0, None)) @ v.T
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "cov", cov)


def fit_gaussian(samples) -> GaussianFit:
    x = np.asarray(samples, dtype=np.float64)
    n, d = x.shape
    if n < d + 1:
        raise ValueError(f"need at least d+1={d + 1} samples, got {n}")
    mu = x.mean(axis=0)
    c = x - mu
    return GaussianFit(mu, c.T @ c / (n - 1))


def _psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def trace_sqrt_product(s1: np.ndarray, s2: np.ndarray) -> float:
    """``tr((s1 s2)^{1/2})`` for symmetric PSD ``s1, s2``."""
    if s1.shape == (2, 2):
        # eigenvalues l1, l2 >= 0 of s1 s2: (sqrt l1 + sqrt l2)^2 = tr + 2 sqrt(det)
        prod = s1 @ s2
        det = max(np.linalg.det(s1), 0.0) * max(np.linalg.det(s2), 0.0)
        return math.sqrt(max(np.trace(prod) + 2.0 * math.sqrt(det), 0.0))
    r = _psd_sqrt(s1)
    w = np.linalg.eigvalsh(r @ s2 @ r)
    return float(np.sqrt(np.clip(w, 0.0, None)).sum())


def frechet(a: GaussianFit, b: GaussianFit) -> float:
    if a.mean.shape != b.mean.shape:
        raise ValueError("fits have different dimensions")
    if np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov):
        return 0.0
    # canonical argument order makes the result bit-symmetric
    if (a.mean.tobytes(), a.cov.tobytes()) > (b.mean.tobytes(), b.cov.tobytes()):
        a, b = b, a
    diff = a.mean - b.mean
    if np.array_equal(a.cov, b.cov):
        tr = 0.0  # tr(2S - 2S) exactly
    else:
        tr = np.trace(a.cov) + np.trace(b.cov) - 2.0 * trace_sqrt_product(a.cov, b.cov)
    return max(float(diff @ diff + tr), 0.0)


@dataclass(frozen=True)
class Grid:
    x0: float = -3.0
    x1: float = 3.0
    y0: float = -3.0
    y1: float = 3.0
    bins: int = 60

    def to_dict(self) -> dict:
        return {"x0": self.x0, "x1": self.x1, "y0": self.y0, "y1": self.y1, "bins": self.bins}


def histogram(samples, grid: Grid, eps: float = 1e-10) -> np.ndarray:
    counts = kernels.hist2d(np.asarray(samples, dtype=np.float64), grid.x0, grid.x1, grid.y0, grid.y1, grid.bins, grid.bins)
    p = counts.ravel() + eps
    return p / p.sum()


def hist_jsd(samples_p, samples_q, grid: Grid = Grid(), eps: float = 1e-10) -> float:
    """JSD between eps-smoothed 2-D histograms of two sample sets."""
    if len(samples_p) == 0 or len(samples_q) == 0:
        raise ValueError("empty sample set")
    return oracle.jsd(histogram(samples_p, grid, eps), histogram(samples_q, grid, eps))


def input_gradient(d_spec: nn.ModelSpec, d_params, x) -> np.ndarray:
    """Gradient of the summed logits w.r.t. each input row (rows are independent)."""
    xt = nc.Tensor(np.asarray(x, dtype=np.float64), requires_grad=True)
    logit, _ = nn.forward_d(d_spec, d_params, xt)
    (g,) = nc.grad(nc.sum_(logit), [xt])
    return g


def smoothgrad(d_spec: nn.ModelSpec, d_params, x, n: int = 16, sigma=0.1, rng: nc.Rng | None = None) -> np.ndarray:
    """Average input gradient of the logit over ``n`` Gaussian-perturbed copies of ``x``.

    ``sigma`` is a scalar or one noise scale per input dimension.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.asarray(sigma) < 0):
        raise ValueError("sigma must be non-negative")
    if np.all(np.asarray(sigma) == 0):
        return input_gradient(d_spec, d_params, x)
    rng = rng if rng is not None else nc.Rng(0)
    acc = np.zeros_like(x)
    for i in range(n):
        acc += input_gradient(d_spec, d_params, x + rng.split("smoothgrad", i).normal(x.shape, sigma))
    return acc / n


def clip_3sigma(g: np.ndarray) -> np.ndarray:
    mu, sd = g.mean(), g.std()
    return np.clip(g, mu - 3 * sd, mu + 3 * sd)


def write_gradmap(path, points, grads: dict, header: str, clip: bool = False) -> None:
    """CSV of per-point coordinates and gradient columns, one block of columns per probed network."""
    pts = np.asarray(points)
    cols = ["x", "y"]
    blocks = []
    for name, g in grads.items():
        g = clip_3sigma(g) if clip else g
        cols += [f"{name}_dx", f"{name}_dy"]
        blocks.append(g)
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header}\n")
        w = csv.writer(fh)
        w.writerow(cols)
        for i, p in enumerate(pts):
            row = [repr(float(v)) for v in p]
            for g in blocks:
                row += [repr(float(v)) for v in g[i]]
            w.writerow(row)


@dataclass(frozen=True)
class BenchResult:
    mean_s: float
    std_s: float
    median_s: float
    runs: int
    param_count: int


def benchmark_inference(g_spec: nn.ModelSpec, g_params, batch: int = 256, runs: int = 200, seed: int = 0) -> BenchResult:
    """Wall-clock per generator forward pass; the first WARMUP_RUNS runs are dropped.

    Latencies depend on the machine and its load.
    """
    if runs <= WARMUP_RUNS:
        raise ValueError(f"runs must exceed the {WARMUP_RUNS} warmup runs, got {runs}")
    z = nc.Rng(seed).split("bench").normal((batch, g_spec.latent_dim))
    times = []
    for _ in range(runs):
        t0 = time.perf_counter()
        nn.forward_g(g_spec, g_params, z)
        times.append(time.perf_counter() - t0)
    kept = np.array(times[WARMUP_RUNS:])
    return BenchResult(float(kept.mean()), float(kept.std()), float(np.median(kept)), len(kept), nn.param_count(g_spec))
