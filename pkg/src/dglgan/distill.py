"""Training objectives for every distillation variant.

A :class:`Strategy` is a plain descriptor; :func:`objectives` turns it plus
a batch and the current networks into the generator and discriminator
losses, sharing one forward pass between them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from . import losses, nn
from . import numcore as nc

VARIANTS = ("baseline", "dgl", "single_teacher_d", "ggl", "gdgl", "g_inter", "d_inter", "d_out", "gradual")

# named presets used by sweeps; each maps to a (variant, overrides) pair
PRESETS = {
    "baseline": ("baseline", {}),
    "dgl": ("dgl", {}),
    "dgl_updated": ("dgl", {"update_teacher_d": True}),
    "single_d": ("single_teacher_d", {}),
    "single_d_updated": ("single_teacher_d", {"update_teacher_d": True}),
    "ggl": ("ggl", {}),
    "gdgl": ("gdgl", {}),
    "g_inter": ("g_inter", {}),
    "d_inter": ("d_inter", {}),
    "d_out": ("d_out", {}),
    "gradual": ("gradual", {}),
}


class MissingTeacherError(ValueError):
    pass


@dataclass(frozen=True)
class Strategy:
    variant: str = "baseline"
    lam: float = 0.1
    update_teacher_d: bool = False
    gamma1: float = 0.2
    gamma2: float = 0.2
    gamma3: float = 0.2
    layers: tuple = (-1,)
    dist: str = "l1"
    teacher_chain: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(int(l) for l in self.layers))
        object.__setattr__(self, "teacher_chain", tuple(str(p) for p in self.teacher_chain))
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown strategy variant {self.variant!r}; expected one of {VARIANTS}")
        for name in ("lam", "gamma1", "gamma2", "gamma3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.dist not in ("l1", "l2"):
            raise ValueError(f"dist must be l1 or l2, got {self.dist!r}")
        if self.update_teacher_d and self.variant not in ("dgl", "single_teacher_d"):
            raise ValueError("update_teacher_d applies only to dgl and single_teacher_d")

    @classmethod
    def preset(cls, name: str, **overrides) -> "Strategy":
        if name not in PRESETS:
            raise ValueError(f"unknown strategy preset {name!r}; expected one of {sorted(PRESETS)}")
        variant, base = PRESETS[name]
        return cls(variant=variant, **{**base, **overrides})

    @property
    def needs_teacher_d(self) -> bool:
        return self.variant in ("dgl", "single_teacher_d", "gdgl", "d_inter", "d_out", "gradual")

    @property
    def needs_teacher_g(self) -> bool:
        return self.variant in ("ggl", "gdgl", "g_inter")

    @property
    def trains_teacher_d(self) -> bool:
        return self.update_teacher_d

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["layers"] = list(self.layers)
        d["teacher_chain"] = list(self.teacher_chain)
        return d


@dataclass
class TeacherBundle:
    """Frozen full-width networks (either may be absent)."""

    g_spec: Optional[nn.ModelSpec] = None
    g_params: Optional[dict] = None
    d_spec: Optional[nn.ModelSpec] = None
    d_params: Optional[dict] = None

    @classmethod
    def from_checkpoint(cls, ckpt: nn.Checkpoint) -> "TeacherBundle":
        return cls(ckpt.student_g_spec, ckpt.g_params, ckpt.student_d_spec, ckpt.d_params)

    @property
    def has_g(self) -> bool:
        return self.g_params is not None

    @property
    def has_d(self) -> bool:
        return self.d_params is not None


def check_teachers(strategy: Strategy, teachers: Optional[TeacherBundle]) -> None:
    if strategy.variant == "gradual" and not strategy.teacher_chain:
        raise MissingTeacherError("gradual distillation needs a non-empty teacher_chain of checkpoints")
    if strategy.needs_teacher_d and (teachers is None or not teachers.has_d):
        raise MissingTeacherError(f"strategy {strategy.variant!r} needs a teacher discriminator")
    if strategy.needs_teacher_g and (teachers is None or not teachers.has_g):
        raise MissingTeacherError(f"strategy {strategy.variant!r} needs a teacher generator")


@dataclass
class Batch:
    x: np.ndarray
    z: np.ndarray


@dataclass
class Players:
    """Networks as tensors for one step. Trainable groups hold gradient-tracking leaves."""

    g_spec: nn.ModelSpec
    g: dict
    d_spec: nn.ModelSpec
    d: dict
    teacher_g_spec: Optional[nn.ModelSpec] = None
    teacher_g: Optional[dict] = None
    teacher_d_spec: Optional[nn.ModelSpec] = None
    teacher_d: Optional[dict] = None
    g_adapters: list = field(default_factory=list)
    d_adapters: list = field(default_factory=list)


@dataclass
class Objectives:
    g: nc.Tensor
    d: nc.Tensor
    terms: dict
    h_real: nc.Tensor
    h_fake: nc.Tensor
    fake: nc.Tensor


def _select(feats: list, layers: tuple) -> list:
    return [feats[l] for l in layers]


def objectives(strategy: Strategy, batch: Batch, pl: Players, kind: str = "non_saturating") -> Objectives:
    """Generator and discriminator losses for one batch under ``strategy``.

    ``terms`` carries the scalar value of each extra term for logging.
    """
    v = strategy.variant
    lam = strategy.lam
    want_g_feats = v == "g_inter"
    fake, g_feats = nn.forward_g(pl.g_spec, pl.g, batch.z, features=True)
    want_d_feats = v == "d_inter"
    h_real, p_real, d_feats_real = nn.forward_d(pl.d_spec, pl.d, batch.x, features=True)
    h_fake, p_fake, d_feats_fake = nn.forward_d(pl.d_spec, pl.d, fake, features=True)

    g_obj = losses.g_loss(kind, h_fake)
    d_obj = losses.d_loss(kind, h_real, h_fake)
    terms: dict = {}

    uses_teacher_d_on_fake = v in ("dgl", "gdgl", "gradual", "single_teacher_d")
    if uses_teacher_d_on_fake:
        hb_fake, _ = nn.forward_d(pl.teacher_d_spec, pl.teacher_d, fake)
        if v == "single_teacher_d":
            g_obj = losses.g_loss(kind, hb_fake)
            terms["dgl"] = g_obj.item()
        else:
            dgl = losses.dgl_term(kind, hb_fake, lam)
            g_obj = nc.add(g_obj, dgl)
            terms["dgl"] = dgl.item()
        if strategy.update_teacher_d:
            hb_real, _ = nn.forward_d(pl.teacher_d_spec, pl.teacher_d, batch.x)
            weight = 1.0 if v == "single_teacher_d" else lam
            teacher_d_loss = nc.scale(losses.d_loss(kind, hb_real, hb_fake), weight)
            d_obj = nc.add(d_obj, teacher_d_loss)
            terms["teacher_d"] = teacher_d_loss.item()

    if v in ("ggl", "gdgl"):
        teacher_fake = nn.forward_g(pl.teacher_g_spec, pl.teacher_g, batch.z)
        h_teacher_fake, _ = nn.forward_d(pl.d_spec, pl.d, teacher_fake)
        ggl = nc.scale(losses.d_fake_term(kind, h_teacher_fake), lam)
        d_obj = nc.add(d_obj, ggl)
        terms["ggl"] = ggl.item()

    if want_g_feats:
        _, t_feats = nn.forward_g(pl.teacher_g_spec, pl.teacher_g, batch.z, features=True)
        kd = losses.kd_inter(
            _select(g_feats, strategy.layers), _select(t_feats, strategy.layers), pl.g_adapters, strategy.dist
        )
        g_obj = nc.add(g_obj, nc.scale(kd, strategy.gamma1))
        terms["kd"] = kd.item()

    if want_d_feats:
        _, _, tr = nn.forward_d(pl.teacher_d_spec, pl.teacher_d, batch.x, features=True)
        _, _, tf = nn.forward_d(pl.teacher_d_spec, pl.teacher_d, fake, features=True)
        kd = nc.add(
            losses.kd_inter(_select(d_feats_real, strategy.layers), _select(tr, strategy.layers), pl.d_adapters, strategy.dist),
            losses.kd_inter(_select(d_feats_fake, strategy.layers), _select(tf, strategy.layers), pl.d_adapters, strategy.dist),
        )
        kd = nc.scale(kd, 0.5)
        d_obj = nc.add(d_obj, nc.scale(kd, strategy.gamma2))
        terms["kd"] = kd.item()

    if v == "d_out":
        _, tp_real = nn.forward_d(pl.teacher_d_spec, pl.teacher_d, batch.x)
        _, tp_fake = nn.forward_d(pl.teacher_d_spec, pl.teacher_d, fake)
        kd = losses.kd_out(nc.concat([p_real, p_fake]), nc.concat([tp_real, tp_fake]))
        d_obj = nc.add(d_obj, nc.scale(kd, strategy.gamma3))
        terms["kd"] = kd.item()

    return Objectives(g_obj, d_obj, terms, h_real, h_fake, fake)


def g_objective(strategy: Strategy, batch: Batch, players: Players, kind: str = "non_saturating") -> nc.Tensor:
    return objectives(strategy, batch, players, kind).g


def d_objective(strategy: Strategy, batch: Batch, players: Players, kind: str = "non_saturating") -> nc.Tensor:
    return objectives(strategy, batch, players, kind).d
