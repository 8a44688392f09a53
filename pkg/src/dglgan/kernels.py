"""Kernel backend selection.

The compiled Cython module is preferred; the numpy fallback is used when the
extension was not built or when ``DGLGAN_PURE_PYTHON=1`` is set before import.
Both backends are always importable for benchmarking via :func:`get_backend`.
"""

import os

from . import _pykernels as python_backend

try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and os.environ.get("DGLGAN_PURE_PYTHON", "") not in ("1", "true"):
    _active = compiled_backend
    BACKEND = "cython"
else:
    _active = python_backend
    BACKEND = "python"

sigmoid = _active.sigmoid
softplus = _active.softplus
leaky_relu = _active.leaky_relu
leaky_relu_grad = _active.leaky_relu_grad
tabular_ascent = _active.tabular_ascent
hist2d = _active.hist2d


def get_backend(name):
    if name == "python":
        return python_backend
    if name == "cython":
        if compiled_backend is None:
            raise RuntimeError("compiled kernels are not built; run `pip install -e .`")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}")
