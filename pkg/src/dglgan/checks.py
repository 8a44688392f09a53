"""The derivation suite behind ``dglgan oracle-check``."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import oracle
from .numcore import Rng


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tol: float


def random_dist(rng: Rng, k: int) -> np.ndarray:
    """Dirichlet(1) mixed half-and-half with uniform, so every atom keeps mass >= 1/(2k)."""
    w = -np.log(rng.uniform(k, 1e-300, 1.0))
    p = 0.5 * w / w.sum() + 0.5 / k
    return p / p.sum()


def random_triples(n: int, seed: int = 0, k_range=(2, 32)):
    rng = Rng(seed).split("triples")
    for i in range(n):
        r = rng.split(i)
        k = int(r.integers(k_range[1] - k_range[0] + 1, ()) + k_range[0])
        yield random_dist(r.split("d"), k), random_dist(r.split("g"), k), random_dist(r.split("bar"), k)


def run_suite(n: int = 100, seed: int = 0) -> list[CheckResult]:
    triples = list(random_triples(n, seed))
    worst = {k: 0.0 for k in ("jsd", "dgl", "argmax", "ggl_d", "ggl_const")}
    for pd, pg, pb in triples:
        dstar = oracle.optimal_d(pd, pg)
        j = oracle.jsd(pd, pg)
        worst["jsd"] = max(worst["jsd"], abs(oracle.gan_value(pd, pg, dstar) - (2 * j - oracle.LN4)))
        d_bar = oracle.optimal_d(pd, pd)
        for lam in (0.0, 0.1, 1.0):
            val = oracle.dgl_value(pd, pg, pd, dstar, d_bar, lam)
            worst["dgl"] = max(worst["dgl"], abs(val - (2 * j - oracle.LN4 - lam * oracle.LN2)))
        base = oracle.best_response_d("baseline", pd, pg).values
        dgl = oracle.best_response_d("dgl", pd, pg, pb, 0.1).values
        worst["argmax"] = max(worst["argmax"], float(np.abs(dgl - base).max()))
        lam = 0.1
        ggl = oracle.best_response_d("ggl", pd, pg, pb, lam).values
        worst["ggl_d"] = max(worst["ggl_d"], float(np.abs(ggl - oracle.ggl_optimal_d(pd, pg, pb, lam).values).max()))
        # the plug-in minus decomposition gap must not depend on p_g
        pg2 = np.roll(pg, 1)
        gap1 = oracle.ggl_plugin_value(pd, pg, pb, lam) - oracle.ggl_generator_objective(pd, pg, pb, lam)
        gap2 = oracle.ggl_plugin_value(pd, pg2, pb, lam) - oracle.ggl_generator_objective(pd, pg2, pb, lam)
        worst["ggl_const"] = max(worst["ggl_const"], abs(gap1 - gap2))
    tol = {"jsd": 1e-9, "dgl": 1e-9, "argmax": 1e-6, "ggl_d": 1e-6, "ggl_const": 1e-10}
    names = {
        "jsd": "value at optimal D = 2*JSD - ln 4",
        "dgl": "DGL value (teacher = data) = 2*JSD - ln 4 - lam*ln 2",
        "argmax": "DGL best response = plain best response",
        "ggl_d": "GGL best response = p_d/(p_d+p_g+lam*p_bar)",
        "ggl_const": "GGL KL decomposition gap constant in p_g",
    }
    out = [CheckResult(names[k], worst[k] <= tol[k], worst[k], tol[k]) for k in names]
    lam1 = oracle.dgl_value([0.5, 0.5], [0.5, 0.5], [0.5, 0.5], [0.5, 0.5], [0.5, 0.5], 1.0)
    out.append(CheckResult("lam=1 constant is -ln 8", abs(lam1 + oracle.LN8) <= 1e-15, abs(lam1 + math.log(8)), 1e-15))
    return out


def format_table(results: list[CheckResult], elapsed: float | None = None) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  status  worst      tol"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.worst:.2e}  {r.tol:.0e}")
    if elapsed is not None:
        lines.append(f"({elapsed:.2f} s)")
    return "\n".join(lines)


def timed_suite(n: int = 100, seed: int = 0) -> tuple[list[CheckResult], float]:
    t0 = time.perf_counter()
    res = run_suite(n, seed)
    return res, time.perf_counter() - t0
