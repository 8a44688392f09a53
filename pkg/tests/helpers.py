"""Shared test oracles: central finite differences and random network compositions."""

import numpy as np

from dglgan import numcore as nc

ACTS = ("leaky_relu", "sigmoid", "softplus", "relu", "square", "abs")
HEADS = ("mean", "softplus_neg", "log_sigmoid", "square_mean", "exp_mean")


def central_diff(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        gf[i] = (up - down) / (2 * h)
    return g


def close(analytic: np.ndarray, numeric: np.ndarray, rel: float = 1e-4, abs_: float = 1e-7) -> bool:
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    return bool(np.all(np.abs(analytic - numeric) <= np.maximum(rel * scale, abs_)))


def _act(kind, t, alpha):
    if kind == "leaky_relu":
        return nc.leaky_relu(t, alpha)
    return nc.elementwise(kind, t)


def _head(kind, t):
    if kind == "mean":
        return nc.mean(t)
    if kind == "softplus_neg":
        return nc.mean(nc.softplus(nc.neg(t)))
    if kind == "log_sigmoid":
        return nc.mean(nc.log(nc.clamp_prob(nc.sigmoid(t))))
    if kind == "square_mean":
        return nc.mean(nc.square(t))
    return nc.mean(nc.exp(nc.scale(t, 0.1)))


class RandomNet:
    """A random 2-3 layer composition of the library primitives on inputs in [-3, 3]."""

    def __init__(self, seed: int):
        rs = np.random.default_rng(seed)
        n_layers = int(rs.integers(2, 4))
        dims = [int(d) for d in rs.integers(1, 5, size=n_layers + 1)]
        self.batch = int(rs.integers(1, 5))
        self.x = rs.uniform(-3, 3, size=(self.batch, dims[0]))
        self.ws = [rs.uniform(-1.5, 1.5, size=(dims[i], dims[i + 1])) for i in range(n_layers)]
        self.bs = [rs.uniform(-1, 1, size=(1, dims[i + 1])) for i in range(n_layers)]
        self.acts = [ACTS[int(i)] for i in rs.integers(0, len(ACTS), size=n_layers)]
        self.alpha = float(rs.uniform(0.05, 0.5))
        self.head = HEADS[int(rs.integers(0, len(HEADS)))]

    def arrays(self) -> list:
        return [self.x, *self.ws, *self.bs]

    def loss(self, arrays=None, requires_grad=False):
        arrays = self.arrays() if arrays is None else arrays
        ts = [nc.Tensor(a, requires_grad=requires_grad) for a in arrays]
        n = len(self.ws)
        h = ts[0]
        for w, b, act in zip(ts[1 : 1 + n], ts[1 + n :], self.acts):
            h = _act(act, nc.add(nc.matmul(h, w), b), self.alpha)
        return _head(self.head, h), ts

    def check(self) -> tuple[bool, float]:
        loss, ts = self.loss(requires_grad=True)
        analytic = nc.grad(loss, ts)
        worst, ok = 0.0, True
        for arr, g in zip(self.arrays(), analytic):
            num = central_diff(lambda: self.loss()[0].item(), arr)
            ok &= close(g, num)
            worst = max(worst, float(np.max(np.abs(g - num))))
        return ok, worst
