"""Command-line entry point.

Exit status: 0 on success, 1 on invalid configuration or inputs, 2 on runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import checks, data, metrics, nn, sweep, trainer
from . import numcore as nc
from .config import ConfigError, ExperimentConfig
from .distill import MissingTeacherError, TeacherBundle
from .provenance import header_line

log = logging.getLogger("dglgan")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(ValueError):
    """Bad inputs that are not config fields (missing files, incompatible checkpoints)."""


def _load_config(args) -> ExperimentConfig:
    overrides = list(args.override or [])
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.out is not None:
        overrides.append(f"run.out={_toml_str(args.out)}")
    if args.config:
        if not Path(args.config).exists():
            raise UsageError(f"config file {args.config} not found")
        return ExperimentConfig.load(args.config, overrides)
    return ExperimentConfig.from_doc({}, overrides)


def _toml_str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _load_checkpoint(path) -> nn.Checkpoint:
    if not path:
        raise UsageError("a checkpoint path is required")
    if not Path(path).exists():
        raise UsageError(f"checkpoint {path} not found")
    try:
        return nn.Checkpoint.load(path)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"checkpoint {path} is malformed: {exc}") from exc


def _teachers(exp: ExperimentConfig, strategy) -> TeacherBundle | None:
    path = exp.doc["teacher"]["checkpoint"]
    if not path:
        if strategy.needs_teacher_d or strategy.needs_teacher_g:
            raise MissingTeacherError(f"strategy {strategy.variant!r} needs teacher.checkpoint")
        return None
    return TeacherBundle.from_checkpoint(_load_checkpoint(path))


def _run_dir(exp: ExperimentConfig, cfg: trainer.TrainConfig) -> Path:
    d = Path(exp.out) / f"{cfg.hash}-s{cfg.seed}"
    d.mkdir(parents=True, exist_ok=True)
    exp.save(d / "config.toml")
    return d


def _write_stage(res: trainer.StageResult, cfg, out: Path) -> None:
    trainer.write_outputs(res, cfg, out)
    print(f"wrote {out}")


# ---------------------------------------------------------------- subcommands


def cmd_train(args) -> int:
    exp = _load_config(args)
    cfg = exp.train
    teachers = _teachers(exp, cfg.strategy)
    out = _run_dir(exp, cfg)
    trainer.init_checkpoint(cfg).save(out / "checkpoint_init.json")
    res = trainer.train_two_stage(cfg, teachers, out)
    _write_stage(res, cfg, out)
    return EXIT_OK


def cmd_distill(args) -> int:
    exp = _load_config(args)
    cfg = exp.train
    start = _load_checkpoint(args.checkpoint or exp.doc["start"]["checkpoint"])
    teachers = _teachers(exp, cfg.strategy)
    out = _run_dir(exp, cfg)
    try:
        res = trainer.stage2(cfg, start, teachers, out)
    except ValueError as exc:
        if isinstance(exc, (MissingTeacherError, nc.NonFiniteError)):
            raise
        raise UsageError(str(exc)) from exc
    _write_stage(res, cfg, out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    exp = _load_config(args)
    result = sweep.run_sweep(exp, exp.out, jobs=max(1, args.jobs))
    md, _ = sweep.emit_table(result)
    print(md, end="")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    results, elapsed = checks.timed_suite(n=args.cases, seed=args.seed or 0)
    print(checks.format_table(results, elapsed))
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


def cmd_metrics(args) -> int:
    exp = _load_config(args)
    ckpt = _load_checkpoint(args.checkpoint or exp.doc["start"]["checkpoint"])
    cfg = replace(exp.train, g_spec=ckpt.g_spec, d_spec=ckpt.d_spec, multiplier=ckpt.multiplier)
    res = trainer.evaluate(cfg, ckpt.g_params)
    print(f"# {cfg.header}")
    print("step,toy_frechet,hist_jsd")
    print(f"{ckpt.step},{res['toy_frechet']!r},{res['hist_jsd']!r}")
    return EXIT_OK


def cmd_bench(args) -> int:
    exp = _load_config(args)
    b = exp.doc["bench"]
    mults = [Fraction(m) for m in (args.multipliers or exp.doc["sweep"]["multipliers"])]
    if Fraction(1) not in mults:
        mults = [Fraction(1)] + mults
    base = exp.train
    print(f"# {base.header}")
    print("multiplier,params,mean_s,std_s,median_s,runs")
    for m in mults:
        spec = nn.apply_multiplier(base.g_spec, m)
        params = nn.init(spec, nc.Rng(base.seed).split("bench_init"))
        r = metrics.benchmark_inference(spec, params, batch=b["batch"], runs=b["runs"], seed=base.seed)
        print(f"{m},{r.param_count},{r.mean_s!r},{r.std_s!r},{r.median_s!r},{r.runs}")
    return EXIT_OK


def cmd_gradprobe(args) -> int:
    exp = _load_config(args)
    ckpt = _load_checkpoint(args.checkpoint or exp.doc["start"]["checkpoint"])
    cfg = replace(exp.train, g_spec=ckpt.g_spec, d_spec=ckpt.d_spec, multiplier=ckpt.multiplier)
    gp = exp.doc["gradprobe"]
    rng = nc.Rng(cfg.seed)
    ref = data.sample(cfg.dataset, 4096, rng.split("gradprobe_ref"))
    sigma = gp["sigma_rel"] * (ref.max(axis=0) - ref.min(axis=0))
    z = data.sample_latent(gp["points"], cfg.g_spec.latent_dim, rng.split("gradprobe_latent"))
    points = nn.forward_g(ckpt.student_g_spec, ckpt.g_params, z).data
    grads = {"student": metrics.smoothgrad(ckpt.student_d_spec, ckpt.d_params, points, gp["n"], sigma, rng.split("student"))}
    tpath = exp.doc["teacher"]["checkpoint"]
    if tpath or "teacher_d" in ckpt.params:
        tb = TeacherBundle.from_checkpoint(_load_checkpoint(tpath)) if tpath else TeacherBundle()
        td = ckpt.params.get("teacher_d", tb.d_params)
        grads["teacher"] = metrics.smoothgrad(tb.d_spec or ckpt.d_spec, td, points, gp["n"], sigma, rng.split("teacher"))
    out = Path(exp.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "gradmap.csv"
    metrics.write_gradmap(path, points, grads, cfg.header, clip=args.clip_3sigma)
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML experiment config")
    common.add_argument("--seed", type=int, help="override run.seed")
    common.add_argument("--out", metavar="DIR", help="override run.out")
    common.add_argument("--override", action="append", metavar="KEY=VALUE", help="section.key=value, repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dglgan", description="Discriminator-guided GAN compression on toy 2-D data.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="stage 1 then stage 2 per config").set_defaults(fn=cmd_train)
    d = sub.add_parser("distill", parents=[common], help="stage 2 from a checkpoint")
    d.add_argument("--checkpoint", metavar="PATH", help="start checkpoint (default: start.checkpoint)")
    d.set_defaults(fn=cmd_distill)
    s = sub.add_parser("sweep", parents=[common], help="strategies x multipliers x seeds")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(fn=cmd_sweep)
    o = sub.add_parser("oracle-check", parents=[common], help="finite-sample-space derivation checks")
    o.add_argument("--cases", type=int, default=100)
    o.set_defaults(fn=cmd_oracle_check)
    m = sub.add_parser("metrics", parents=[common], help="recompute metrics on a checkpoint")
    m.add_argument("--checkpoint", metavar="PATH")
    m.set_defaults(fn=cmd_metrics)
    b = sub.add_parser("bench", parents=[common], help="generator inference latency per multiplier")
    b.add_argument("--multipliers", nargs="*", metavar="M")
    b.set_defaults(fn=cmd_bench)
    g = sub.add_parser("gradprobe", parents=[common], help="SmoothGrad export of discriminator input gradients")
    g.add_argument("--checkpoint", metavar="PATH")
    g.add_argument("--clip-3sigma", action="store_true", help="clip each gradient block to mean +- 3 std")
    g.set_defaults(fn=cmd_gradprobe)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except (ConfigError, MissingTeacherError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except trainer.DivergenceError as exc:
        print(f"error: diverged at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, RuntimeError, FloatingPointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
