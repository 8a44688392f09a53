"""Pure numpy versions of the hot kernels.

Used when the compiled extension is absent or ``DGLGAN_PURE_PYTHON=1``.
Every function matches the signature and semantics of ``_ckernels``.
"""

import numpy as np


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def leaky_relu(x, alpha):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x, alpha * x)


def leaky_relu_grad(x, g, alpha):
    return np.where(np.asarray(x) > 0, g, alpha * np.asarray(g, dtype=np.float64))


def tabular_ascent(a, b, u0, step, tol, max_iter, lo, hi):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    u = np.array(u0, dtype=np.float64, copy=True)
    it = 0
    while True:
        s = sigmoid(u)
        g = a * (1.0 - s) - b * s
        proj = np.where(((u <= lo) & (g < 0)) | ((u >= hi) & (g > 0)), 0.0, g)
        resid = float(np.max(np.abs(proj))) if u.size else 0.0
        if resid < tol or it >= max_iter:
            break
        u = np.clip(u + step * g, lo, hi)
        it += 1
    return u, it, resid


def hist2d(samples, x0, x1, y0, y1, nx, ny):
    s = np.asarray(samples, dtype=np.float64)
    inside = (s[:, 0] >= x0) & (s[:, 0] <= x1) & (s[:, 1] >= y0) & (s[:, 1] <= y1)
    s = s[inside]
    ix = np.minimum(np.searchsorted(np.linspace(x0, x1, nx + 1), s[:, 0], side="right") - 1, nx - 1)
    iy = np.minimum(np.searchsorted(np.linspace(y0, y1, ny + 1), s[:, 1], side="right") - 1, ny - 1)
    counts = np.zeros((nx, ny), dtype=np.float64)
    np.add.at(counts, (ix, iy), 1.0)
    return counts
