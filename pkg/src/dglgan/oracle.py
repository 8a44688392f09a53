"""Closed-form GAN identities on a finite sample space.

Distributions are probability vectors over K atoms and a discriminator is a
vector of per-atom probabilities. Natural logs throughout; ``0 * log 0 = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .numcore import PROB_EPS

LN2 = math.log(2.0)
LN4 = math.log(4.0)
LN8 = math.log(8.0)

_LOGIT_BOUND = math.log((1.0 - PROB_EPS) / PROB_EPS)


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class DiscreteDist:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("a distribution needs K >= 1 atoms")
        if (p < 0).any() or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities must be non-negative and sum to 1 (sum={p.sum()!r})")
        object.__setattr__(self, "probs", p)

    @property
    def k(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class TabularD:
    values: np.ndarray

    def __post_init__(self):
        v = np.clip(np.asarray(self.values, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_logits(cls, logits) -> "TabularD":
        return cls(kernels.sigmoid(np.asarray(logits, dtype=np.float64)))


def _p(d) -> np.ndarray:
    return d.probs if isinstance(d, DiscreteDist) else np.asarray(d, dtype=np.float64)


def _v(d) -> np.ndarray:
    return d.values if isinstance(d, TabularD) else TabularD(d).values


def _xlogy(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    nz = x > 0
    out[nz] = x[nz] * np.log(y[nz])
    return out


def optimal_d(p_d, p_g) -> TabularD:
    """Best response of the plain objective: ``p_d / (p_d + p_g)``, 0.5 where both vanish."""
    pd, pg = _p(p_d), _p(p_g)
    if pd.shape != pg.shape:
        raise ValueError("distributions must have the same number of atoms")
    tot = pd + pg
    vals = np.full_like(pd, 0.5)
    nz = tot > 0
    vals[nz] = pd[nz] / tot[nz]
    return TabularD(vals)


def kl(p, q) -> float:
    p, q = _p(p), _p(q)
    if ((p > 0) & (q <= 0)).any():
        return math.inf
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] / q[nz])))


def jsd(p, q) -> float:
    p, q = _p(p), _p(q)
    m = 0.5 * (p + q)
    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def gan_value(p_d, p_g, d) -> float:
    """Plain objective ``E_pd log D + E_pg log(1 - D)``."""
    pd, pg, dv = _p(p_d), _p(p_g), _v(d)
    return float(np.sum(_xlogy(pd, dv)) + np.sum(_xlogy(pg, 1.0 - dv)))


def dgl_value(p_d, p_g, p_bar_g, d, d_bar, lam: float) -> float:
    """Plain objective plus ``lam * E_pg log(1 - D_bar)``.

    ``p_bar_g`` does not enter the value directly; it is accepted so callers
    can pass the full triple and build ``d_bar`` from it.
    """
    pg = _p(p_g)
    return gan_value(p_d, p_g, d) + lam * float(np.sum(_xlogy(pg, 1.0 - _v(d_bar))))


def ggl_value(p_d, p_g, p_bar_g, d, lam: float) -> float:
    """Plain objective plus ``lam * E_pbar log(1 - D)`` (teacher generator feeds D)."""
    return gan_value(p_d, p_g, d) + lam * float(np.sum(_xlogy(_p(p_bar_g), 1.0 - _v(d))))


def _d_coefficients(objective: str, p_d, p_g, p_bar_g, lam: float) -> tuple[np.ndarray, np.ndarray]:
    # Each objective is sum(a*log D + b*log(1-D)) + (terms free of D).
    pd, pg = _p(p_d), _p(p_g)
    if objective in ("baseline", "dgl"):
        # the teacher-discriminator term lam*E_pg log(1-D_bar) does not involve D
        return pd, pg
    if objective == "ggl":
        if p_bar_g is None:
            raise ValueError("ggl needs the teacher generator distribution")
        return pd, pg + lam * _p(p_bar_g)
    raise ValueError(f"unknown objective {objective!r}; expected baseline, dgl or ggl")


def best_response_d(
    objective: str,
    p_d,
    p_g,
    p_bar_g=None,
    lam: float = 0.0,
    *,
    step: float = 0.5,
    tol: float = 1e-9,
    max_iter: int = 100_000,
) -> TabularD:
    """Maximize the objective over a tabular D by projected gradient ascent on logits.

    Stops when the projected gradient's max-norm is below ``tol``; raises
    :class:`ConvergenceError` if ``max_iter`` is hit first.
    """
    a, b = _d_coefficients(objective, p_d, p_g, p_bar_g, lam)
    if a.size > 64:
        raise ValueError("tabular ascent is limited to K <= 64 atoms")
    u, iters, resid = kernels.tabular_ascent(
        a, b, np.zeros_like(a), step, tol, max_iter, -_LOGIT_BOUND, _LOGIT_BOUND
    )
    if resid >= tol:
        raise ConvergenceError("tabular best response did not converge", resid, iters)
    return TabularD.from_logits(u)


def ggl_optimal_d(p_d, p_g, p_bar_g, lam: float) -> TabularD:
    pd, pg, pb = _p(p_d), _p(p_g), _p(p_bar_g)
    tot = pd + pg + lam * pb
    vals = np.full_like(pd, 0.5)
    nz = tot > 0
    vals[nz] = pd[nz] / tot[nz]
    return TabularD(vals)


def ggl_generator_objective(p_d, p_g, p_bar_g, lam: float) -> float:
    """KL[p_d || M] + (1 + lam) KL[(p_g + lam p_bar) / (1 + lam) || M], M = (p_d + p_g + lam p_bar) / (2 + lam)."""
    pd, pg, pb = _p(p_d), _p(p_g), _p(p_bar_g)
    mix = (pd + pg + lam * pb) / (2.0 + lam)
    fake = (pg + lam * pb) / (1.0 + lam)
    return kl(pd, mix) + (1.0 + lam) * kl(fake, mix)


def ggl_plugin_value(p_d, p_g, p_bar_g, lam: float) -> float:
    """GGL objective evaluated at its closed-form best response, without clamping."""
    pd, pg, pb = _p(p_d), _p(p_g), _p(p_bar_g)
    tot = pd + pg + lam * pb
    fake = pg + lam * pb
    safe = np.where(tot > 0, tot, 1.0)
    return float(np.sum(_xlogy(pd, pd / safe)) + np.sum(_xlogy(fake, fake / safe)))


def ggl_discarded_constant(lam: float) -> float:
    """Plug-in value minus the KL decomposition: ``(1+lam) log(1+lam) - (2+lam) log(2+lam)``."""
    return (1.0 + lam) * math.log1p(lam) - (2.0 + lam) * math.log(2.0 + lam)
