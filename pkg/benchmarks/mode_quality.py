"""Baseline stage-1 probe on mixture data: toy Fréchet next to mode quality.

    python benchmarks/mode_quality.py [--steps 20000] [--every 2500] [--seed 0] [--config PATH] [--override k=v ...]

Toy Fréchet only compares first and second moments, so a diffuse blob with the
data covariance scores well. This probe also reports the fraction of samples
within 0.1 of a mode centre (``hq``) and how many modes hold more than 1% of
samples (``cov``).
"""

import argparse
import sys
from dataclasses import replace

import numpy as np

from dglgan import data, nn, trainer
from dglgan import numcore as nc
from dglgan.config import ExperimentConfig
from dglgan.distill import Strategy


def mode_quality(cfg, g_params, n=2048, radius_tol=0.1):
    modes = data.mode_centers(cfg.dataset)
    z = data.sample_latent(n, cfg.g_spec.latent_dim, nc.Rng(99).split("quality"))
    fake = nn.forward_g(cfg.student_g_spec, g_params, z).data
    dist = np.linalg.norm(fake[:, None] - modes[None], axis=2)
    near = dist.min(1) < radius_tol
    counts = np.bincount(dist.argmin(1)[near], minlength=len(modes))
    return float(near.mean()), int((counts > 0.01 * n).sum())


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--every", type=int, default=2500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--config", default=None)
    ap.add_argument("--override", action="append", default=[])
    args = ap.parse_args(argv)
    exp = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.default()
    exp = exp.with_overrides(*args.override)
    cfg = replace(exp.train_config(strategy=Strategy("baseline"), multiplier=1, seed=args.seed), T=0, S=0)
    if cfg.dataset.kind == "spiral":
        print("mode quality needs discrete modes (ring or grid)", file=sys.stderr)
        return 1
    ck = trainer.init_checkpoint(cfg)
    print("step,toy_frechet,hq,cov")
    for step in range(1, args.steps + 1):
        ck, _ = trainer.train_step(cfg, ck, Strategy("baseline"), None, step)
        if step % args.every == 0:
            hq, cov = mode_quality(cfg, ck.g_params)
            print(f"{step},{trainer.evaluate(cfg, ck.g_params)['toy_frechet']:.4f},{hq:.3f},{cov}", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
