# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Signatures mirror :mod:`dglgan._pykernels` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, floor

cnp.import_array()


cdef inline double _sigmoid(double x) nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def sigmoid(cnp.ndarray x):
    cdef cnp.ndarray[double, ndim=1] src = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef cnp.ndarray[double, ndim=1] out = np.empty_like(src)
    cdef Py_ssize_t i, n = src.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _sigmoid(src[i])
    return out.reshape((<object>x).shape)


def softplus(cnp.ndarray x):
    # numpy's vectorised exp/log1p beat a scalar libm loop here (see benchmarks/)
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def leaky_relu(cnp.ndarray x, double alpha):
    cdef cnp.ndarray[double, ndim=1] src = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef cnp.ndarray[double, ndim=1] out = np.empty_like(src)
    cdef Py_ssize_t i, n = src.shape[0]
    cdef double v
    with nogil:
        for i in range(n):
            v = src[i]
            out[i] = v if v > 0 else alpha * v
    return out.reshape((<object>x).shape)


def leaky_relu_grad(cnp.ndarray x, cnp.ndarray g, double alpha):
    cdef cnp.ndarray[double, ndim=1] xs = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef cnp.ndarray[double, ndim=1] gs = np.ascontiguousarray(g, dtype=np.float64).ravel()
    cdef cnp.ndarray[double, ndim=1] out = np.empty_like(xs)
    cdef Py_ssize_t i, n = xs.shape[0]
    with nogil:
        for i in range(n):
            out[i] = gs[i] if xs[i] > 0 else alpha * gs[i]
    return out.reshape((<object>x).shape)


def tabular_ascent(cnp.ndarray a, cnp.ndarray b, cnp.ndarray u0, double step,
                   double tol, long max_iter, double lo, double hi):
    """Projected gradient ascent of sum(a*log sigmoid(u) + b*log(1-sigmoid(u))) over u in [lo, hi]."""
    cdef cnp.ndarray[double, ndim=1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] u = np.array(u0, dtype=np.float64, copy=True)
    cdef Py_ssize_t i, k = u.shape[0]
    cdef long it = 0
    cdef double s, gi, nxt, resid = 0.0
    with nogil:
        while True:
            # projected gradient residual at the current iterate
            resid = 0.0
            for i in range(k):
                s = _sigmoid(u[i])
                gi = av[i] * (1.0 - s) - bv[i] * s
                if (u[i] <= lo and gi < 0) or (u[i] >= hi and gi > 0):
                    gi = 0.0
                if fabs(gi) > resid:
                    resid = fabs(gi)
            if resid < tol or it >= max_iter:
                break
            for i in range(k):
                s = _sigmoid(u[i])
                gi = av[i] * (1.0 - s) - bv[i] * s
                nxt = u[i] + step * gi
                if nxt < lo:
                    nxt = lo
                elif nxt > hi:
                    nxt = hi
                u[i] = nxt
            it += 1
    return u, it, resid


def hist2d(cnp.ndarray samples, double x0, double x1, double y0, double y1, long nx, long ny):
    """Counts of 2-D samples in an nx-by-ny grid; points outside the box are dropped.

    Bin edges are ``linspace`` points; bins are half-open except the last, which includes its right edge.
    """
    cdef cnp.ndarray[double, ndim=2] s = np.ascontiguousarray(samples, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] counts = np.zeros((nx, ny), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ex = np.linspace(x0, x1, nx + 1)
    cdef cnp.ndarray[double, ndim=1] ey = np.linspace(y0, y1, ny + 1)
    cdef Py_ssize_t i, n = s.shape[0]
    cdef long ix, iy
    cdef double wx = (x1 - x0) / nx, wy = (y1 - y0) / ny, px, py
    with nogil:
        for i in range(n):
            px = s[i, 0]
            py = s[i, 1]
            if px < x0 or px > x1 or py < y0 or py > y1:
                continue
            ix = _bin(px, x0, wx, &ex[0], nx)
            iy = _bin(py, y0, wy, &ey[0], ny)
            counts[ix, iy] += 1.0
    return counts


cdef inline long _bin(double v, double lo, double w, double* edges, long n) nogil:
    # arithmetic guess, then correct against the exact edges
    cdef long k = <long>floor((v - lo) / w)
    if k < 0:
        k = 0
    if k > n - 1:
        k = n - 1
    while k > 0 and v < edges[k]:
        k -= 1
    while k < n - 1 and v >= edges[k + 1]:
        k += 1
    return k
