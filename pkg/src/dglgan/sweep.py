"""Strategy x multiplier x seed sweeps and their comparison tables.

Layout under the output directory::

    _teacher/checkpoint_final.json        full-width teacher (unless given)
    _shared/stage1-m<m>-s<seed>/          stage-1 checkpoints shared by all strategies
    _shared/chain-m<m>-s<seed>/           intermediate students for gradual distillation
    runs/<config-hash>-s<seed>/           one directory per (strategy, multiplier, seed)
    sweep_runs.csv, sweep.csv, sweep.md
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import nn, trainer
from .config import ExperimentConfig
from .distill import Strategy, TeacherBundle
from .provenance import header_line

log = logging.getLogger(__name__)

RUN_COLUMNS = ("strategy", "multiplier", "seed", "config_hash", "params", "toy_frechet", "hist_jsd", "status")
TABLE_COLUMNS = ("strategy", "multiplier", "params", "median_toy_frechet", "iqr_toy_frechet", "median_hist_jsd", "runs")


def _mtag(m) -> str:
    return str(Fraction(m)).replace("/", "_")


@dataclass
class SweepResult:
    header: str
    runs: list = field(default_factory=list)

    def write_runs(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# {self.header}\n")
            w = csv.writer(fh)
            w.writerow(RUN_COLUMNS)
            for r in self.runs:
                w.writerow([r[c] if not isinstance(r[c], float) else repr(r[c]) for c in RUN_COLUMNS])

    @classmethod
    def load(cls, path) -> "SweepResult":
        with open(path) as fh:
            header = fh.readline()[2:].rstrip("\n")
            rows = list(csv.DictReader(fh))
        for r in rows:
            r["seed"] = int(r["seed"])
            r["params"] = int(r["params"])
            r["toy_frechet"] = float(r["toy_frechet"])
            r["hist_jsd"] = float(r["hist_jsd"])
        return cls(header, rows)


def aggregate(result: SweepResult) -> list[dict]:
    if not result.runs:
        raise ValueError("empty sweep")
    groups: dict = {}
    for r in result.runs:
        groups.setdefault((Fraction(r["multiplier"]), r["strategy"]), []).append(r)
    table = []
    for (m, s), rs in sorted(groups.items()):
        ok = [r for r in rs if r["status"] == "ok"] or [{"toy_frechet": float("nan"), "hist_jsd": float("nan")}]
        fr = np.array([r["toy_frechet"] for r in ok])
        js = np.array([r["hist_jsd"] for r in ok])
        q75, q25 = np.percentile(fr, [75, 25])
        table.append(
            {
                "strategy": s,
                "multiplier": str(m),
                "params": rs[0]["params"],
                "median_toy_frechet": float(np.median(fr)),
                "iqr_toy_frechet": float(q75 - q25),
                "median_hist_jsd": float(np.median(js)),
                "runs": sum(r["status"] == "ok" for r in rs),
            }
        )
    return table


def emit_table(result: SweepResult) -> tuple[str, str]:
    """Markdown and CSV renderings of the aggregated comparison table."""
    table = aggregate(result)
    buf = io.StringIO()
    buf.write(f"# {result.header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for row in table:
        w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in TABLE_COLUMNS])
    md = [
        f"<!-- {result.header} -->",
        "",
        "| Strategy | Ch-Mul | #Params | Toy Fréchet (median) | IQR | Hist-JSD (median) | Runs ok |",
        "|---|---|---|---|---|---|---|",
    ]
    for row in table:
        md.append(
            f"| {row['strategy']} | {row['multiplier']} | {row['params']} | {row['median_toy_frechet']:.4f} "
            f"| {row['iqr_toy_frechet']:.4f} | {row['median_hist_jsd']:.4f} | {row['runs']} |"
        )
    return "\n".join(md) + "\n", buf.getvalue()


def write_tables(result: SweepResult, out_dir) -> None:
    md, csv_text = emit_table(result)
    Path(out_dir, "sweep.md").write_text(md)
    Path(out_dir, "sweep.csv").write_text(csv_text)


# ---------------------------------------------------------------- execution


def _train_teacher(exp: ExperimentConfig, out: Path) -> Path:
    path = out / "_teacher" / "checkpoint_final.json"
    if path.exists():
        return path
    path.parent.mkdir(parents=True, exist_ok=True)
    cfg = replace(
        exp.train_config(strategy=Strategy("baseline"), multiplier=1, seed=exp.doc["teacher"]["seed"]),
        T=exp.doc["teacher"]["steps"],
        S=0,
    )
    res = trainer.stage1(cfg)
    trainer.write_outputs(res, cfg, path.parent)
    return path


def _stage1_job(args) -> str:
    cfg, path = args
    path = Path(path)
    if not path.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
        res = trainer.stage1(cfg)
        res.runlog.write_csv(path.parent / "runlog.csv", cfg.header)
        res.checkpoint.save(path)
    return str(path)


def _chain_job(args) -> str:
    cfg, stage1_path, teacher_path, path = args
    path = Path(path)
    if not path.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
        teachers = TeacherBundle.from_checkpoint(nn.Checkpoint.load(teacher_path))
        res = trainer.stage2(cfg, nn.Checkpoint.load(stage1_path), teachers)
        res.checkpoint.save(path)
    return str(path)


def _run_job(args) -> dict:
    name, cfg, stage1_path, teacher_path, run_dir = args
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    teachers = TeacherBundle.from_checkpoint(nn.Checkpoint.load(teacher_path))
    row = {
        "strategy": name,
        "multiplier": str(cfg.multiplier),
        "seed": cfg.seed,
        "config_hash": cfg.hash,
        "params": nn.param_count(cfg.student_g_spec),
    }
    try:
        if cfg.from_scratch:
            res = trainer.train_two_stage(cfg, teachers, run_dir)
        else:
            res = trainer.stage2(cfg, nn.Checkpoint.load(stage1_path), teachers, run_dir)
    except trainer.DivergenceError as exc:
        log.warning("run %s diverged: %s", run_dir.name, exc)
        return {**row, "toy_frechet": float("nan"), "hist_jsd": float("nan"), "status": "diverged"}
    trainer.write_outputs(res, cfg, run_dir)
    final = trainer.evaluate(cfg, res.checkpoint.g_params)
    return {**row, **final, "status": "ok"}


def _map(fn, items, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def run_sweep(exp: ExperimentConfig, out_dir, jobs: int = 1) -> SweepResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sw = exp.doc["sweep"]
    names = list(sw["strategies"])
    mults = [Fraction(m) for m in sw["multipliers"]]
    seeds = [int(s) for s in sw["seeds"]]
    if not names or not mults or not seeds:
        raise ValueError("sweep needs at least one strategy, multiplier and seed")
    strategies = {n: exp.strategy(n) for n in names}

    given = exp.doc["teacher"]["checkpoint"]
    teacher_path = Path(given) if given else _train_teacher(exp, out)
    if not teacher_path.exists():
        raise FileNotFoundError(f"teacher checkpoint {teacher_path} not found")

    def base(m, seed):
        return exp.train_config(strategy=Strategy("baseline"), multiplier=m, seed=seed)

    stage1_jobs = {}
    if not exp.doc["run"]["from_scratch"]:
        for m in mults:
            for seed in seeds:
                cfg = base(m, seed)
                stage1_jobs[(m, seed)] = (cfg, str(out / "_shared" / f"stage1-m{_mtag(m)}-s{seed}" / "checkpoint_stage1.json"))
    done = _map(_stage1_job, list(stage1_jobs.values()), jobs)
    stage1_paths = dict(zip(stage1_jobs.keys(), done))

    # gradual distillation: teacher -> DGL student at 2m -> student at m
    chain_paths = {}
    if any(s.variant == "gradual" and not s.teacher_chain for s in strategies.values()):
        mid_jobs, chain_jobs = {}, {}
        for m in mults:
            mid = min(Fraction(1), 2 * m)
            for seed in seeds:
                cfg = base(mid, seed)
                mid_jobs[(m, seed)] = (cfg, str(out / "_shared" / f"stage1-m{_mtag(mid)}-s{seed}" / "checkpoint_stage1.json"))
        mid_done = dict(zip(mid_jobs.keys(), _map(_stage1_job, list(mid_jobs.values()), jobs)))
        for (m, seed), (cfg, _) in mid_jobs.items():
            dgl_cfg = replace(cfg, strategy=exp.strategy("dgl"))
            chain_jobs[(m, seed)] = (
                dgl_cfg, mid_done[(m, seed)], str(teacher_path),
                str(out / "_shared" / f"chain-m{_mtag(dgl_cfg.multiplier)}-s{seed}" / "checkpoint_final.json"),
            )
        chain_paths = dict(zip(chain_jobs.keys(), _map(_chain_job, list(chain_jobs.values()), jobs)))

    run_jobs = []
    for name in names:
        for m in mults:
            for seed in seeds:
                s = strategies[name]
                if s.variant == "gradual" and not s.teacher_chain:
                    s = replace(s, teacher_chain=(str(teacher_path), chain_paths[(m, seed)]))
                cfg = exp.train_config(strategy=s, multiplier=m, seed=seed)
                run_dir = out / "runs" / f"{cfg.hash}-s{seed}"
                run_jobs.append((name, cfg, stage1_paths.get((m, seed)), str(teacher_path), str(run_dir)))
    rows = _map(_run_job, run_jobs, jobs)
    header = header_line(exp.hash, ",".join(str(s) for s in seeds))
    result = SweepResult(header, rows)
    result.write_runs(out / "sweep_runs.csv")
    write_tables(result, out)
    return result
