"""Two-stage training: plain adversarial training, then fine-tuning under a distillation strategy.

Randomness is keyed by global step index (``rng.split("data", step)``), so a
run split across processes at any step boundary replays bit-identically.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import data, losses, metrics, nn
from . import numcore as nc
from .distill import Batch, Players, Strategy, TeacherBundle, check_teachers, objectives
from .provenance import config_hash, header_line

log = logging.getLogger(__name__)

G_SIDE = ("g", "g_adapters")
D_SIDE = ("d", "d_adapters", "teacher_d")

RUNLOG_COLUMNS = (
    "step", "stage", "g_loss", "d_loss", "dgl_term", "kd_term", "ggl_term", "teacher_d_loss",
    "toy_frechet", "hist_jsd", "wall_clock",
)
SCORE_COLUMNS = ("step", "stage", "h_real", "h_fake", "teacher_h_real", "teacher_h_fake")


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or an out-of-range logit.

    ``checkpoint`` holds the last good state for post-mortem inspection.
    """

    def __init__(self, message: str, checkpoint: nn.Checkpoint, step: int):
        super().__init__(f"step {step}: {message}")
        self.checkpoint = checkpoint
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    T: int = 20000
    S: int = 20000
    batch: int = 64
    lr: float = 0.002
    beta1: float = 0.0
    beta2: float = 0.99
    eps: float = 1e-8
    teacher_d_lr: Optional[float] = None
    strategy: Strategy = Strategy()
    dataset: data.DatasetSpec = data.DatasetSpec()
    g_spec: nn.ModelSpec = nn.ModelSpec(8, 2, (64, 64), 0.2, "generator")
    d_spec: nn.ModelSpec = nn.ModelSpec(8, 2, (64, 64), 0.2, "discriminator")
    multiplier: Fraction = Fraction(1)
    seed: int = 0
    loss: str = "non_saturating"
    alternating: bool = False
    from_scratch: bool = False
    eval_every: int = 500
    eval_samples: int = 4096
    score_samples: int = 512
    snapshot_every: int = 0
    grid: metrics.Grid = metrics.Grid()
    logit_limit: float = 1e4

    def __post_init__(self):
        object.__setattr__(self, "multiplier", Fraction(self.multiplier))
        if self.T < 0 or self.S < 0:
            raise ValueError("T and S must be >= 0")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.loss not in losses.KINDS:
            raise ValueError(f"unknown adversarial loss {self.loss!r}; expected one of {losses.KINDS}")
        if not 0 < self.multiplier <= 1:
            raise ValueError(f"multiplier must be in (0, 1], got {self.multiplier}")
        if self.g_spec.role != "generator" or self.d_spec.role != "discriminator":
            raise ValueError("g_spec/d_spec roles are swapped")
        if self.g_spec.latent_dim != self.d_spec.latent_dim or self.g_spec.data_dim != self.d_spec.data_dim:
            raise ValueError("generator and discriminator specs disagree on latent/data dims")

    @property
    def student_g_spec(self) -> nn.ModelSpec:
        return nn.apply_multiplier(self.g_spec, self.multiplier)

    @property
    def student_d_spec(self) -> nn.ModelSpec:
        return nn.apply_multiplier(self.d_spec, self.multiplier)

    def to_dict(self) -> dict:
        d = {
            k: getattr(self, k)
            for k in ("T", "S", "batch", "lr", "beta1", "beta2", "eps", "teacher_d_lr", "seed", "loss",
                      "alternating", "from_scratch", "eval_every", "eval_samples", "score_samples",
                      "snapshot_every", "logit_limit")
        }
        d["strategy"] = self.strategy.to_dict()
        d["dataset"] = self.dataset.to_dict()
        d["g_spec"] = self.g_spec.to_dict()
        d["d_spec"] = self.d_spec.to_dict()
        d["multiplier"] = str(self.multiplier)
        d["grid"] = self.grid.to_dict()
        return d

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    @property
    def header(self) -> str:
        return header_line(self.hash, self.seed)


@dataclass
class RunLog:
    rows: list = field(default_factory=list)

    def write_csv(self, path, header: str) -> None:
        _write_rows(path, header, RUNLOG_COLUMNS, self.rows)


@dataclass
class ScoreTrace:
    rows: list = field(default_factory=list)

    def write_csv(self, path, header: str) -> None:
        _write_rows(path, header, SCORE_COLUMNS, self.rows)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows(path, header: str, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


@dataclass
class StageResult:
    checkpoint: nn.Checkpoint
    runlog: RunLog
    scores: ScoreTrace


# ---------------------------------------------------------------- state helpers


def _adam(cfg: TrainConfig, lr: Optional[float] = None) -> nn.AdamState:
    return nn.AdamState(lr=cfg.lr if lr is None else lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)


def init_checkpoint(cfg: TrainConfig) -> nn.Checkpoint:
    rng = nc.Rng(cfg.seed).split("init")
    params = {
        "g": nn.init(cfg.student_g_spec, rng.split("g")),
        "d": nn.init(cfg.student_d_spec, rng.split("d")),
    }
    return nn.Checkpoint(
        cfg.g_spec, cfg.d_spec, cfg.multiplier, params, {"g": _adam(cfg), "d": _adam(cfg)}, 0, cfg.header
    )


def _adapter_group(student: nn.ModelSpec, teacher: nn.ModelSpec, layers: tuple, rng: nc.Rng) -> dict:
    group = {}
    for i, l in enumerate(layers):
        s_w, t_w = student.hidden_widths[l], teacher.hidden_widths[l]
        group[f"w{i}"] = rng.split("w", i).normal((s_w, t_w), np.sqrt(2.0 / s_w))
        group[f"b{i}"] = np.zeros(t_w)
    return group


def _add_strategy_groups(cfg: TrainConfig, ckpt: nn.Checkpoint, strategy: Strategy, teachers) -> nn.Checkpoint:
    """Create adapter / trainable-teacher parameter groups the strategy needs but the checkpoint lacks."""
    params, optim = dict(ckpt.params), dict(ckpt.optim)
    rng = nc.Rng(cfg.seed).split("extras")
    if strategy.variant == "g_inter" and "g_adapters" not in params:
        params["g_adapters"] = _adapter_group(cfg.student_g_spec, teachers.g_spec, strategy.layers, rng.split("g"))
        optim["g_adapters"] = _adam(cfg)
    if strategy.variant == "d_inter" and "d_adapters" not in params:
        params["d_adapters"] = _adapter_group(cfg.student_d_spec, teachers.d_spec, strategy.layers, rng.split("d"))
        optim["d_adapters"] = _adam(cfg)
    if strategy.update_teacher_d and "teacher_d" not in params:
        params["teacher_d"] = {k: np.array(v, copy=True) for k, v in teachers.d_params.items()}
        optim["teacher_d"] = _adam(cfg, cfg.teacher_d_lr)
    return replace(ckpt, params=params, optim=optim)


def _adapters(group: Optional[dict]) -> list:
    if not group:
        return []
    return [(group[f"w{i}"], group[f"b{i}"]) for i in range(len(group) // 2)]


def _players(cfg: TrainConfig, leaves: dict, teachers: Optional[TeacherBundle]) -> Players:
    t = teachers or TeacherBundle()
    return Players(
        g_spec=cfg.student_g_spec,
        g=leaves["g"],
        d_spec=cfg.student_d_spec,
        d=leaves["d"],
        teacher_g_spec=t.g_spec,
        teacher_g=t.g_params,
        teacher_d_spec=t.d_spec,
        teacher_d=leaves.get("teacher_d", t.d_params),
        g_adapters=_adapters(leaves.get("g_adapters")),
        d_adapters=_adapters(leaves.get("d_adapters")),
    )


def _leaves(params: dict) -> dict:
    return {g: {k: nc.Tensor(v, requires_grad=True) for k, v in p.items()} for g, p in params.items()}


def _side_grads(loss: nc.Tensor, leaves: dict, side: tuple) -> dict:
    flat = {(g, k): t for g in side if g in leaves for k, t in leaves[g].items()}
    grads = nc.grad(loss, flat)
    out: dict = {}
    for (g, k), v in grads.items():
        out.setdefault(g, {})[k] = v
    return out


def _apply(ckpt: nn.Checkpoint, grads: dict) -> tuple[dict, dict]:
    params, optim = dict(ckpt.params), dict(ckpt.optim)
    for g, gg in grads.items():
        params[g], optim[g] = nn.adam_step(ckpt.params[g], gg, ckpt.optim[g])
    return params, optim


def _guard(cfg: TrainConfig, obj, ckpt: nn.Checkpoint, step: int) -> None:
    for name, t in (("g_loss", obj.g), ("d_loss", obj.d)):
        if not np.isfinite(t.data).all():
            raise DivergenceError(f"non-finite {name}", ckpt, step)
    worst = max(np.abs(obj.h_real.data).max(), np.abs(obj.h_fake.data).max())
    if worst > cfg.logit_limit:
        raise DivergenceError(f"|logit| {worst:.3g} exceeds {cfg.logit_limit:g}", ckpt, step)


def train_step(
    cfg: TrainConfig, ckpt: nn.Checkpoint, strategy: Strategy, teachers: Optional[TeacherBundle], step: int
) -> tuple[nn.Checkpoint, dict]:
    """One iteration at global step ``step`` (1-based). Returns the new state and logged loss values."""
    rng = nc.Rng(cfg.seed)
    batch = Batch(
        data.sample(cfg.dataset, cfg.batch, rng.split("data", step)),
        data.sample_latent(cfg.batch, cfg.g_spec.latent_dim, rng.split("latent", step)),
    )
    try:
        leaves = _leaves(ckpt.params)
        obj = objectives(strategy, batch, _players(cfg, leaves, teachers), cfg.loss)
        _guard(cfg, obj, ckpt, step)
        d_grads = _side_grads(obj.d, leaves, D_SIDE)
        if cfg.alternating:
            params, optim = _apply(ckpt, d_grads)
            mid = replace(ckpt, params=params, optim=optim)
            leaves = _leaves(mid.params)
            batch_g = Batch(batch.x, data.sample_latent(cfg.batch, cfg.g_spec.latent_dim, rng.split("latent_g", step)))
            obj_g = objectives(strategy, batch_g, _players(cfg, leaves, teachers), cfg.loss)
            _guard(cfg, obj_g, ckpt, step)
            params, optim = _apply(mid, _side_grads(obj_g.g, leaves, G_SIDE))
        else:
            # both gradients at the same point, then both updates
            g_grads = _side_grads(obj.g, leaves, G_SIDE)
            params, optim = _apply(ckpt, {**g_grads, **d_grads})
    except nc.NonFiniteError as exc:
        raise DivergenceError(str(exc), ckpt, step) from exc
    row = {"g_loss": obj.g.item(), "d_loss": obj.d.item()}
    for key, col in (("dgl", "dgl_term"), ("kd", "kd_term"), ("ggl", "ggl_term"), ("teacher_d", "teacher_d_loss")):
        if key in obj.terms:
            row[col] = obj.terms[key]
    return replace(ckpt, params=params, optim=optim, step=step), row


# ---------------------------------------------------------------- evaluation


def _eval_sets(cfg: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    rng = nc.Rng(cfg.seed)
    real = data.sample(cfg.dataset, cfg.eval_samples, rng.split("eval_real"))
    z = data.sample_latent(cfg.eval_samples, cfg.g_spec.latent_dim, rng.split("eval_latent"))
    return real, z


def evaluate(cfg: TrainConfig, g_params: dict, eval_sets=None) -> dict:
    """Toy Fréchet distance and histogram JSD of generated vs real samples."""
    real, z = eval_sets if eval_sets is not None else _eval_sets(cfg)
    fake = nn.forward_g(cfg.student_g_spec, g_params, z).data
    return {
        "toy_frechet": metrics.frechet(metrics.fit_gaussian(real), metrics.fit_gaussian(fake)),
        "hist_jsd": metrics.hist_jsd(real, fake, cfg.grid),
    }


def record_scores(d_spec, d_params, teacher_d_spec, teacher_d_params, x, fake) -> dict:
    """Batch means of student and teacher logits on real and generated samples."""
    h_real, _ = nn.forward_d(d_spec, d_params, x)
    h_fake, _ = nn.forward_d(d_spec, d_params, fake)
    row = {"h_real": float(h_real.data.mean()), "h_fake": float(h_fake.data.mean()),
           "teacher_h_real": None, "teacher_h_fake": None}
    if teacher_d_params is not None:
        th_real, _ = nn.forward_d(teacher_d_spec, teacher_d_params, x)
        th_fake, _ = nn.forward_d(teacher_d_spec, teacher_d_params, fake)
        row["teacher_h_real"] = float(th_real.data.mean())
        row["teacher_h_fake"] = float(th_fake.data.mean())
    return row


# ---------------------------------------------------------------- loops


def _loop(
    cfg: TrainConfig,
    ckpt: nn.Checkpoint,
    strategy: Strategy,
    teachers: Optional[TeacherBundle],
    n_steps: int,
    stage: str,
    result: StageResult,
    out_dir: Optional[Path],
) -> nn.Checkpoint:
    start = ckpt.step
    last = start + n_steps
    eval_sets = _eval_sets(cfg) if n_steps else None
    t0 = time.perf_counter()
    for step in range(start + 1, last + 1):
        try:
            ckpt, row = train_step(cfg, ckpt, strategy, teachers, step)
        except DivergenceError as exc:
            if out_dir is not None:
                exc.checkpoint.save(out_dir / "checkpoint_diverged.json")
            raise
        if step % cfg.eval_every == 0 or step == last:
            real, z = eval_sets
            row.update(evaluate(cfg, ckpt.g_params, eval_sets))
            row.update(step=step, stage=stage, wall_clock=time.perf_counter() - t0)
            result.runlog.rows.append(row)
            k = cfg.score_samples
            fake = nn.forward_g(cfg.student_g_spec, ckpt.g_params, z[:k]).data
            t = teachers or TeacherBundle()
            td = ckpt.params.get("teacher_d", t.d_params)
            score = record_scores(cfg.student_d_spec, ckpt.d_params, t.d_spec, td, real[:k], fake)
            score.update(step=step, stage=stage)
            result.scores.rows.append(score)
            log.debug("step %d %s", step, row)
        if out_dir is not None and cfg.snapshot_every and step % cfg.snapshot_every == 0:
            ckpt.save(out_dir / f"checkpoint_{step:07d}.json")
    return ckpt


def resolve_teachers(strategy: Strategy, teachers: Optional[TeacherBundle]) -> Optional[TeacherBundle]:
    """For gradual distillation the teacher discriminator comes from the last checkpoint in the chain."""
    if strategy.variant == "gradual" and strategy.teacher_chain:
        last = TeacherBundle.from_checkpoint(nn.Checkpoint.load(strategy.teacher_chain[-1]))
        base = teachers or TeacherBundle()
        return TeacherBundle(base.g_spec or last.g_spec, base.g_params or last.g_params, last.d_spec, last.d_params)
    return teachers


def _baseline_like(cfg: TrainConfig) -> TrainConfig:
    return replace(cfg, strategy=Strategy("baseline"))


def stage1(cfg: TrainConfig, out_dir=None, start: Optional[nn.Checkpoint] = None) -> StageResult:
    """T steps of plain adversarial training from initialization (or from ``start``)."""
    out_dir = Path(out_dir) if out_dir is not None else None
    ckpt = start if start is not None else init_checkpoint(cfg)
    result = StageResult(ckpt, RunLog(), ScoreTrace())
    ckpt = _loop(cfg, ckpt, Strategy("baseline"), None, cfg.T, "stage1", result, out_dir)
    result.checkpoint = replace(ckpt, header=cfg.header)
    return result


def _check_compatible(cfg: TrainConfig, ckpt: nn.Checkpoint) -> None:
    if ckpt.g_spec != cfg.g_spec or ckpt.d_spec != cfg.d_spec or ckpt.multiplier != cfg.multiplier:
        raise ValueError(
            "checkpoint does not match config: "
            f"multiplier {ckpt.multiplier} vs {cfg.multiplier}, specs equal: "
            f"g={ckpt.g_spec == cfg.g_spec} d={ckpt.d_spec == cfg.d_spec}"
        )


def stage2(cfg: TrainConfig, start: nn.Checkpoint, teachers: Optional[TeacherBundle] = None, out_dir=None) -> StageResult:
    """S steps under ``cfg.strategy`` starting from a stage-1 checkpoint."""
    out_dir = Path(out_dir) if out_dir is not None else None
    _check_compatible(cfg, start)
    teachers = resolve_teachers(cfg.strategy, teachers)
    check_teachers(cfg.strategy, teachers)
    result = StageResult(start, RunLog(), ScoreTrace())
    if cfg.S == 0:
        return result
    ckpt = _add_strategy_groups(cfg, start, cfg.strategy, teachers)
    ckpt = _loop(cfg, ckpt, cfg.strategy, teachers, cfg.S, "stage2", result, out_dir)
    result.checkpoint = replace(ckpt, header=cfg.header)
    return result


def train_two_stage(cfg: TrainConfig, teachers: Optional[TeacherBundle] = None, out_dir=None) -> StageResult:
    """Stage 1 then stage 2; with ``from_scratch`` the strategy objective runs for all T+S steps."""
    out_dir = Path(out_dir) if out_dir is not None else None
    if cfg.from_scratch:
        teachers = resolve_teachers(cfg.strategy, teachers)
        check_teachers(cfg.strategy, teachers)
        ckpt = _add_strategy_groups(cfg, init_checkpoint(cfg), cfg.strategy, teachers)
        result = StageResult(ckpt, RunLog(), ScoreTrace())
        ckpt = _loop(cfg, ckpt, cfg.strategy, teachers, cfg.T + cfg.S, "from_scratch", result, out_dir)
        result.checkpoint = replace(ckpt, header=cfg.header)
        return result
    first = stage1(cfg, out_dir)
    if out_dir is not None:
        first.checkpoint.save(out_dir / "checkpoint_stage1.json")
        first.checkpoint = nn.Checkpoint.load(out_dir / "checkpoint_stage1.json")
    second = stage2(cfg, first.checkpoint, teachers, out_dir)
    return StageResult(
        second.checkpoint,
        RunLog(first.runlog.rows + second.runlog.rows),
        ScoreTrace(first.scores.rows + second.scores.rows),
    )


def write_outputs(result: StageResult, cfg: TrainConfig, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result.checkpoint.save(out_dir / "checkpoint_final.json")
    result.runlog.write_csv(out_dir / "runlog.csv", cfg.header)
    result.scores.write_csv(out_dir / "scores.csv", cfg.header)
