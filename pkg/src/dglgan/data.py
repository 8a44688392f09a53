"""Synthetic 2-D datasets with known densities."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np

from .numcore import Rng

KINDS = ("ring", "grid", "spiral")


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "ring"
    k: int = 8
    radius: float = 2.0
    sigma: float = 0.02
    rows: int = 5
    cols: int = 5
    spacing: float = 1.0
    turns: float = 1.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}; expected one of {KINDS}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.k < 1 or self.rows < 1 or self.cols < 1:
            raise ValueError("mode counts must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def mode_centers(spec: DatasetSpec) -> np.ndarray:
    if spec.kind == "ring":
        angles = 2 * np.pi * np.arange(spec.k) / spec.k
        return spec.radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if spec.kind == "grid":
        ii, jj = np.meshgrid(np.arange(spec.rows), np.arange(spec.cols), indexing="ij")
        xs = (ii.ravel() - (spec.rows - 1) / 2) * spec.spacing
        ys = (jj.ravel() - (spec.cols - 1) / 2) * spec.spacing
        return np.stack([xs, ys], axis=1).astype(np.float64)
    raise ValueError(f"{spec.kind} has no discrete modes")


def sample(spec: DatasetSpec, n: int, rng: Rng) -> np.ndarray:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if spec.kind == "spiral":
        t = rng.uniform(n)
        angle = 2 * np.pi * spec.turns * t
        base = (spec.radius * t)[:, None] * np.stack([np.cos(angle), np.sin(angle)], axis=1)
        return base + rng.normal((n, 2), spec.sigma)
    centers = mode_centers(spec)
    idx = rng.integers(len(centers), n)
    return centers[idx] + rng.normal((n, 2), spec.sigma)


def sample_latent(n: int, dim: int, rng: Rng) -> np.ndarray:
    return rng.normal((n, dim))


def true_density(spec: DatasetSpec, x) -> np.ndarray:
    """Exact mixture density at each row of ``x`` (or at a single point)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = x.reshape(-1, 2)
    if spec.kind == "spiral":
        raise ValueError("spiral has no closed-form density")
    centers = mode_centers(spec)
    sq = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    dens = np.exp(-sq / (2 * spec.sigma**2)).mean(axis=1) / (2 * math.pi * spec.sigma**2)
    return dens[0] if single else dens


def nearest_mode(spec: DatasetSpec, x) -> np.ndarray:
    centers = mode_centers(spec)
    sq = ((np.asarray(x)[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return sq.argmin(axis=1)


def dump_csv(samples, path, header: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for row in np.asarray(samples):
            w.writerow([repr(float(row[0])), repr(float(row[1]))])
