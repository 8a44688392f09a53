import math

import numpy as np
import pytest
from scipy import stats

from dglgan import data
from dglgan.numcore import Rng

RING = data.DatasetSpec()


def test_spec_validation():
    for bad in (dict(kind="moons"), dict(sigma=0.0), dict(k=0)):
        with pytest.raises(ValueError):
            data.DatasetSpec(**bad)
    with pytest.raises(ValueError):
        data.sample(RING, 0, Rng(0))


def test_single_gaussian_ring():
    spec = data.DatasetSpec(k=1, radius=0.0, sigma=0.5)
    x = data.sample(spec, 4000, Rng(1))
    assert np.all(np.abs(x.mean(axis=0)) < 4 * 0.5 / math.sqrt(4000))


def test_same_seed_same_samples():
    np.testing.assert_array_equal(data.sample(RING, 100, Rng(3)), data.sample(RING, 100, Rng(3)))


def test_ring_mode_balance():
    n = 100_000
    counts = np.bincount(data.nearest_mode(RING, data.sample(RING, n, Rng(2))), minlength=8)
    assert np.all(np.abs(counts - n / 8) <= 0.05 * n / 8)
    # chi-square goodness of fit against uniform mode choice
    assert stats.chisquare(counts).pvalue > 1e-4


def test_true_density_peak_and_symmetry():
    spec = data.DatasetSpec(k=1, radius=0.0, sigma=0.3)
    assert data.true_density(spec, np.zeros(2)) == pytest.approx(1 / (2 * math.pi * 0.09), rel=1e-12)
    pts = np.array([[2.1, 0.05], [2.1, -0.05], [-0.05, 2.1]])
    d = data.true_density(RING, pts)
    assert d[0] == pytest.approx(d[1], rel=1e-12) and d[0] == pytest.approx(d[2], rel=1e-9)
    with pytest.raises(ValueError):
        data.true_density(data.DatasetSpec(kind="spiral"), np.zeros(2))


@pytest.mark.parametrize("spec", [RING, data.DatasetSpec(kind="grid", rows=3, cols=4, sigma=0.1)])
def test_density_integrates_to_one(spec):
    c = data.mode_centers(spec)
    pad = 6 * spec.sigma
    h = spec.sigma / 5
    xs = np.arange(c[:, 0].min() - pad, c[:, 0].max() + pad, h)
    ys = np.arange(c[:, 1].min() - pad, c[:, 1].max() + pad, h)
    xx, yy = np.meshgrid(xs, ys)
    mass = data.true_density(spec, np.stack([xx.ravel(), yy.ravel()], axis=1)).sum() * h * h
    assert mass == pytest.approx(1.0, abs=0.01)
    assert np.all(data.true_density(spec, np.random.default_rng(0).normal(size=(50, 2))) >= 0)


def test_pooled_moments_match_mixture():
    # ring mixture: mean 0, covariance (r^2/2 + sigma^2) I for k >= 3
    spec = data.DatasetSpec(k=8, radius=2.0, sigma=0.1)
    x = np.concatenate([data.sample(spec, 2000, Rng(s)) for s in range(20)])
    var = spec.radius**2 / 2 + spec.sigma**2
    se = math.sqrt(var / len(x))
    assert np.all(np.abs(x.mean(axis=0)) < 5 * se)
    np.testing.assert_allclose(np.cov(x.T), var * np.eye(2), atol=0.05)


def test_spiral_and_grid_sample_shapes():
    assert data.sample(data.DatasetSpec(kind="spiral"), 10, Rng(0)).shape == (10, 2)
    assert data.mode_centers(data.DatasetSpec(kind="grid", rows=2, cols=3)).shape == (6, 2)


def test_dump_csv(tmp_path):
    x = data.sample(RING, 5, Rng(0))
    data.dump_csv(x, tmp_path / "s.csv", header="h")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "# h" and lines[1] == "x,y" and len(lines) == 7
    assert float(lines[2].split(",")[0]) == x[0, 0]


def test_latent_is_standard_normal():
    z = data.sample_latent(20000, 3, Rng(0))
    assert z.shape == (20000, 3)
    assert stats.kstest(z[:, 0], "norm").pvalue > 1e-4
