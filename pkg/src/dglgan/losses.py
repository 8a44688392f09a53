"""Adversarial loss pairs and distillation terms, all as minimized scalars.

``log sigmoid(h)`` is evaluated as ``-softplus(-h)`` so the adversarial
losses never pass a probability through ``log``; the clamped-probability
path is only used where probabilities themselves are compared (``kd_out``).
"""

from __future__ import annotations

import numpy as np

from . import numcore as nc

KINDS = ("non_saturating", "saturating", "hinge")


def _check_kind(kind: str) -> None:
    if kind not in KINDS:
        raise ValueError(f"unknown adversarial loss {kind!r}; expected one of {KINDS}")


def d_real_term(kind: str, h_real) -> nc.Tensor:
    _check_kind(kind)
    if kind == "hinge":
        return nc.mean(nc.relu(1.0 - nc.as_tensor(h_real)))
    return nc.mean(nc.softplus(nc.neg(h_real)))


def d_fake_term(kind: str, h_fake) -> nc.Tensor:
    _check_kind(kind)
    if kind == "hinge":
        return nc.mean(nc.relu(nc.as_tensor(h_fake) + 1.0))
    return nc.mean(nc.softplus(h_fake))


def d_loss(kind: str, h_real, h_fake) -> nc.Tensor:
    """Discriminator loss: the negated value D maximizes."""
    return nc.add(d_real_term(kind, h_real), d_fake_term(kind, h_fake))


def g_loss(kind: str, h_fake) -> nc.Tensor:
    _check_kind(kind)
    if kind == "non_saturating":
        return nc.mean(nc.softplus(nc.neg(h_fake)))
    if kind == "saturating":
        return nc.neg(nc.mean(nc.softplus(h_fake)))
    return nc.neg(nc.mean(h_fake))


def dgl_term(kind: str, teacher_h_fake, lam: float) -> nc.Tensor:
    """``lam`` times the generator loss against the teacher discriminator's logits."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    return nc.scale(g_loss(kind, teacher_h_fake), lam)


def identity_adapter(width: int) -> tuple:
    return (np.eye(width), np.zeros(width))


def kd_inter(student_feats, teacher_feats, adapters, dist: str = "l1") -> nc.Tensor:
    """Sum over layers of the mean l1 (or squared l2) gap between adapted student and teacher features.

    ``adapters[l]`` is a ``(weight, bias)`` pair mapping student width to teacher width.
    """
    if not (len(student_feats) == len(teacher_feats) == len(adapters)):
        raise ValueError("student features, teacher features and adapters must have equal length")
    if dist not in ("l1", "l2"):
        raise ValueError(f"dist must be l1 or l2, got {dist!r}")
    total = nc.Tensor(0.0)
    for s, t, (w, b) in zip(student_feats, teacher_feats, adapters):
        mapped = nc.add(nc.matmul(s, w), b)
        t = nc.as_tensor(t)
        if mapped.shape != t.shape:
            raise ValueError(f"adapted student feature {mapped.shape} does not match teacher {t.shape}")
        gap = nc.sub(mapped, t)
        total = nc.add(total, nc.mean(nc.absolute(gap) if dist == "l1" else nc.square(gap)))
    return total


def kd_out(student_probs, teacher_probs) -> nc.Tensor:
    """Mean binary cross-entropy of student probabilities against teacher targets."""
    s = nc.clamp_prob(student_probs)
    t = nc.clamp_prob(teacher_probs)
    ce = nc.add(nc.mul(t, nc.log(s)), nc.mul(nc.sub(1.0, t), nc.log(nc.sub(1.0, s))))
    return nc.neg(nc.mean(ce))
