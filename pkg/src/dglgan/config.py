"""Strict TOML experiment configs.

Every section and key is declared in ``DEFAULTS``; anything else is rejected
with the offending dotted name so typos in weights like ``strategy.lamda``
fail loudly instead of silently falling back to defaults.
"""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import data, metrics, nn
from .distill import PRESETS, Strategy
from .provenance import config_hash
from .trainer import TrainConfig

DEFAULTS: dict = {
    "run": {
        "T": 20000,
        "S": 20000,
        "batch": 64,
        "seed": 0,
        "loss": "non_saturating",
        "alternating": False,
        "from_scratch": False,
        "eval_every": 500,
        "eval_samples": 4096,
        "score_samples": 512,
        "snapshot_every": 0,
        "logit_limit": 1e4,
        "out": "runs",
    },
    "optim": {"lr": 0.002, "beta1": 0.0, "beta2": 0.99, "eps": 1e-8, "teacher_d_lr": None},
    "model": {
        "latent_dim": 8,
        "data_dim": 2,
        "g_hidden": [64, 64],
        "d_hidden": [64, 64],
        "alpha": 0.2,
        "multiplier": "1",
    },
    "data": {"kind": "ring", "k": 8, "radius": 2.0, "sigma": 0.02, "rows": 5, "cols": 5, "spacing": 1.0, "turns": 1.5},
    "strategy": {
        "variant": "baseline",
        "lam": 0.1,
        "update_teacher_d": False,
        "gamma1": 0.2,
        "gamma2": 0.2,
        "gamma3": 0.2,
        "layers": [-1],
        "dist": "l1",
        "teacher_chain": [],
    },
    "teacher": {"checkpoint": "", "steps": 20000, "seed": 0},
    "start": {"checkpoint": ""},
    "metrics": {"x0": -3.0, "x1": 3.0, "y0": -3.0, "y1": 3.0, "bins": 60},
    "sweep": {"strategies": ["baseline", "dgl"], "multipliers": ["1/2", "1/4"], "seeds": [0, 1, 2, 3, 4]},
    "bench": {"batch": 256, "runs": 200},
    "gradprobe": {"n": 16, "sigma_rel": 0.1, "points": 64},
}

# keys whose default is None: value type when present
_OPTIONAL_TYPES = {("optim", "teacher_d_lr"): float}


class ConfigError(ValueError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


def _check_type(name: str, value, default, optional_type=None):
    expected = optional_type if default is None else type(default)
    if expected is bool:
        if not isinstance(value, bool):
            raise ConfigError(name, f"expected true/false, got {value!r}")
    elif expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        value = float(value)
    elif expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(name, f"expected an integer, got {value!r}")
    elif expected is str:
        if name == "model.multiplier" and isinstance(value, (int, float)) and not isinstance(value, bool):
            value = str(Fraction(value).limit_denominator(1 << 20))
        if not isinstance(value, str):
            raise ConfigError(name, f"expected a string, got {value!r}")
    elif expected is list:
        if not isinstance(value, list):
            raise ConfigError(name, f"expected a list, got {value!r}")
    return value


def merge(doc: dict) -> dict:
    """Overlay a parsed document on the defaults, rejecting unknown names and wrong types."""
    out = copy.deepcopy(DEFAULTS)
    for section, body in doc.items():
        if section not in DEFAULTS:
            raise ConfigError(section, "unknown section")
        if not isinstance(body, dict):
            raise ConfigError(section, "expected a table")
        for key, value in body.items():
            name = f"{section}.{key}"
            if key not in DEFAULTS[section]:
                raise ConfigError(name, "unknown key")
            out[section][key] = _check_type(name, value, DEFAULTS[section][key], _OPTIONAL_TYPES.get((section, key)))
    return out


def _parse_override(item: str) -> tuple[str, str, object]:
    if "=" not in item:
        raise ConfigError(item, "override must look like section.key=value")
    name, raw = item.split("=", 1)
    if name.count(".") != 1:
        raise ConfigError(name, "override key must be section.key")
    section, key = name.strip().split(".")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return section, key, value


@dataclass(frozen=True)
class ExperimentConfig:
    doc: dict

    # -------------------------------------------------------- construction

    @classmethod
    def from_doc(cls, doc: dict, overrides=()) -> "ExperimentConfig":
        raw = copy.deepcopy(doc)
        for item in overrides:
            section, key, value = _parse_override(item)
            raw.setdefault(section, {})[key] = value
        merged = merge(raw)
        cfg = cls(merged)
        cfg.train  # full validation
        return cfg

    @classmethod
    def load(cls, path, overrides=()) -> "ExperimentConfig":
        try:
            doc = tomllib.loads(Path(path).read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(str(path), f"invalid TOML: {exc}") from exc
        return cls.from_doc(doc, overrides)

    @classmethod
    def default(cls) -> "ExperimentConfig":
        return cls.from_doc({})

    def to_doc(self) -> dict:
        """Nested dict suitable for TOML; None-valued keys are omitted."""
        return {s: {k: v for k, v in body.items() if v is not None} for s, body in self.doc.items()}

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_doc())

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    def with_overrides(self, *items) -> "ExperimentConfig":
        return ExperimentConfig.from_doc(self.to_doc(), items)

    @property
    def hash(self) -> str:
        return config_hash(self.to_doc())

    # -------------------------------------------------------- typed views

    def strategy(self, name: str | None = None) -> Strategy:
        s = dict(self.doc["strategy"])
        configured = s.pop("variant")
        variant = configured if name is None else name
        try:
            if variant in PRESETS:
                _, base = PRESETS[variant]
                s.update(base)
                return Strategy.preset(variant, **{k: v for k, v in s.items() if k not in base})
            return Strategy(variant=variant, **s)
        except ValueError as exc:
            raise ConfigError("strategy", str(exc)) from exc

    def train_config(self, *, strategy: Strategy | None = None, multiplier=None, seed: int | None = None) -> TrainConfig:
        run, opt, model, d = self.doc["run"], self.doc["optim"], self.doc["model"], self.doc["data"]
        try:
            mult = Fraction(model["multiplier"] if multiplier is None else multiplier)
            ds = data.DatasetSpec(**d)
            g_spec = nn.ModelSpec(model["latent_dim"], model["data_dim"], tuple(model["g_hidden"]), model["alpha"], "generator")
            d_spec = nn.ModelSpec(model["latent_dim"], model["data_dim"], tuple(model["d_hidden"]), model["alpha"], "discriminator")
            return TrainConfig(
                T=run["T"],
                S=run["S"],
                batch=run["batch"],
                lr=opt["lr"],
                beta1=opt["beta1"],
                beta2=opt["beta2"],
                eps=opt["eps"],
                teacher_d_lr=opt["teacher_d_lr"],
                strategy=strategy if strategy is not None else self.strategy(),
                dataset=ds,
                g_spec=g_spec,
                d_spec=d_spec,
                multiplier=mult,
                seed=run["seed"] if seed is None else seed,
                loss=run["loss"],
                alternating=run["alternating"],
                from_scratch=run["from_scratch"],
                eval_every=run["eval_every"],
                eval_samples=run["eval_samples"],
                score_samples=run["score_samples"],
                snapshot_every=run["snapshot_every"],
                grid=self.grid,
                logit_limit=run["logit_limit"],
            )
        except ConfigError:
            raise
        except (ValueError, TypeError, ZeroDivisionError) as exc:
            raise ConfigError("config", str(exc)) from exc

    @property
    def train(self) -> TrainConfig:
        return self.train_config()

    @property
    def grid(self) -> metrics.Grid:
        m = self.doc["metrics"]
        if m["x1"] <= m["x0"] or m["y1"] <= m["y0"] or m["bins"] < 1:
            raise ConfigError("metrics", "grid bounds must be increasing and bins >= 1")
        return metrics.Grid(m["x0"], m["x1"], m["y0"], m["y1"], m["bins"])

    @property
    def seed(self) -> int:
        return self.doc["run"]["seed"]

    @property
    def out(self) -> str:
        return self.doc["run"]["out"]
