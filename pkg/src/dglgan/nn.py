"""MLP generator/discriminator with a width multiplier, and Adam.

Parameters are plain ``dict[str, np.ndarray]`` keyed ``w0, b0, w1, b1, ...``
with weights shaped ``(in, out)`` so a layer is ``x @ w + b``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import numcore as nc

Params = dict  # name -> np.ndarray


@dataclass(frozen=True)
class ModelSpec:
    latent_dim: int
    data_dim: int
    hidden_widths: tuple
    alpha: float = 0.2
    role: str = "generator"

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if not self.hidden_widths or min(self.hidden_widths) < 1:
            raise ValueError(f"hidden_widths must be non-empty and >= 1, got {self.hidden_widths}")
        if self.role not in ("generator", "discriminator"):
            raise ValueError(f"role must be generator or discriminator, got {self.role!r}")
        if self.latent_dim < 1 or self.data_dim < 1:
            raise ValueError("latent_dim and data_dim must be >= 1")

    @property
    def in_dim(self) -> int:
        return self.latent_dim if self.role == "generator" else self.data_dim

    @property
    def out_dim(self) -> int:
        return self.data_dim if self.role == "generator" else 1

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        widths = [self.in_dim, *self.hidden_widths, self.out_dim]
        return list(zip(widths[:-1], widths[1:]))

    def to_dict(self) -> dict:
        return {
            "latent_dim": self.latent_dim,
            "data_dim": self.data_dim,
            "hidden_widths": list(self.hidden_widths),
            "alpha": self.alpha,
            "role": self.role,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(d["latent_dim"], d["data_dim"], tuple(d["hidden_widths"]), d["alpha"], d["role"])


def apply_multiplier(spec: ModelSpec, m) -> ModelSpec:
    """Scale every hidden width by ``m`` (floor, minimum 1); input/output dims are fixed."""
    m = Fraction(m)
    if m <= 0 or m > 1:
        raise ValueError(f"multiplier must be in (0, 1], got {m}")
    return replace(spec, hidden_widths=tuple(max(1, math.floor(w * m)) for w in spec.hidden_widths))


def param_count(spec: ModelSpec) -> int:
    return sum((i + 1) * o for i, o in spec.layer_dims)


def init(spec: ModelSpec, rng: nc.Rng) -> Params:
    """He-normal weights, zero biases."""
    params = {}
    for k, (fan_in, fan_out) in enumerate(spec.layer_dims):
        params[f"w{k}"] = rng.split("w", k).normal((fan_in, fan_out), math.sqrt(2.0 / fan_in))
        params[f"b{k}"] = np.zeros(fan_out)
    return params


def _leaves(params) -> dict:
    return {k: nc.as_tensor(v) for k, v in params.items()}


def _mlp(spec: ModelSpec, params, x) -> tuple[nc.Tensor, list[nc.Tensor]]:
    p = _leaves(params)
    h = nc.as_tensor(x)
    if h.data.ndim != 2 or h.shape[1] != spec.in_dim:
        raise ValueError(f"{spec.role} expects input width {spec.in_dim}, got shape {h.shape}")
    n_layers = len(spec.layer_dims)
    feats = []
    for k in range(n_layers):
        h = nc.add(nc.matmul(h, p[f"w{k}"]), p[f"b{k}"])
        if k < n_layers - 1:
            h = nc.leaky_relu(h, spec.alpha)
            feats.append(h)
    return h, feats


def forward_g(spec: ModelSpec, params, z, features: bool = False):
    """Map latents to samples; with ``features=True`` also return hidden activations."""
    out, feats = _mlp(spec, params, z)
    return (out, feats) if features else out


def forward_d(spec: ModelSpec, params, x, features: bool = False):
    """Return ``(logit, prob)``; prob is the sigmoid of the logit clamped into (0, 1)."""
    logit, feats = _mlp(spec, params, x)
    prob = nc.clamp_prob(nc.sigmoid(logit))
    return (logit, prob, feats) if features else (logit, prob)


# ---------------------------------------------------------------- Adam


@dataclass
class AdamState:
    lr: float = 0.002
    beta1: float = 0.0
    beta2: float = 0.99
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "t": self.t,
            "m": params_to_json(self.m),
            "v": params_to_json(self.v),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AdamState":
        return cls(d["lr"], d["beta1"], d["beta2"], d["eps"], d["t"], params_from_json(d["m"]), params_from_json(d["v"]))


def adam_step(params: Params, grads: dict, state: AdamState) -> tuple[Params, AdamState]:
    """One bias-corrected Adam update. Inputs are not mutated."""
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    new_params, new_m, new_v = dict(params), {}, {}
    for name in sorted(params):
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != params[name].shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {params[name].shape} for {name}")
        if not np.isfinite(g).all():
            raise nc.NonFiniteError(f"non-finite gradient for {name}")
        m = b1 * state.m.get(name, 0.0) + (1.0 - b1) * g
        v = b2 * state.v.get(name, 0.0) + (1.0 - b2) * g * g
        new_params[name] = params[name] - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new_m[name], new_v[name] = m, v
    return new_params, replace(state, t=t, m=new_m, v=new_v)


# ---------------------------------------------------------------- checkpoints


def params_to_json(params: Params) -> dict:
    return {k: {"shape": list(np.shape(v)), "data": np.asarray(v, dtype=np.float64).ravel().tolist()} for k, v in sorted(params.items())}


def params_from_json(d: dict) -> Params:
    return {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in d.items()}


@dataclass
class Checkpoint:
    """Student state: base specs, multiplier, parameter groups, optimizer groups, step.

    Groups: ``g`` and ``d`` are the networks; ``g_adapters``, ``d_adapters``
    and ``teacher_d`` appear only for strategies that train them.
    """

    g_spec: ModelSpec
    d_spec: ModelSpec
    multiplier: Fraction
    params: dict
    optim: dict
    step: int = 0
    header: str = ""

    @property
    def g_params(self) -> Params:
        return self.params["g"]

    @property
    def d_params(self) -> Params:
        return self.params["d"]

    @property
    def student_g_spec(self) -> ModelSpec:
        return apply_multiplier(self.g_spec, self.multiplier)

    @property
    def student_d_spec(self) -> ModelSpec:
        return apply_multiplier(self.d_spec, self.multiplier)

    def to_dict(self) -> dict:
        return {
            "header": self.header,
            "g_spec": self.g_spec.to_dict(),
            "d_spec": self.d_spec.to_dict(),
            "multiplier": str(self.multiplier),
            "step": self.step,
            "params": {g: params_to_json(p) for g, p in sorted(self.params.items())},
            "optim": {g: s.to_dict() for g, s in sorted(self.optim.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Checkpoint":
        return cls(
            ModelSpec.from_dict(d["g_spec"]),
            ModelSpec.from_dict(d["d_spec"]),
            Fraction(d["multiplier"]),
            {g: params_from_json(p) for g, p in d["params"].items()},
            {g: AdamState.from_dict(s) for g, s in d["optim"].items()},
            d["step"],
            d.get("header", ""),
        )

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict()) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_dict(json.loads(Path(path).read_text()))
