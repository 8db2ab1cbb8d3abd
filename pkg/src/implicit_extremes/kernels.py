"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``IMPLICIT_EXTREMES_PURE=1`` is set at import time, the
numpy implementation is used.  Both expose the same two functions.
"""

import os

import numpy as np

from . import _kernels_py

KIND_CODES = _kernels_py.KIND_CODES

_compiled = None
if os.environ.get("IMPLICIT_EXTREMES_PURE") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py

# numpy's vectorized power beats a per-element libm pow loop, so by default the
# power-based families stay on numpy even when the extension is built
# (see benchmarks/bench_kernels.py)
_NUMPY_KINDS = frozenset((KIND_CODES["lp-norm"], KIND_CODES["geometric-mean"]))


def builtin_loss(kind, x, weights=None, p=2.0, factor=1.0, backend=None):
    """Evaluate a built-in loss family (by kind code) on the rows of ``x``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(
        np.zeros(x.shape[1]) if weights is None else weights, dtype=np.float64
    )
    impl = _kernels_py if backend is None and int(kind) in _NUMPY_KINDS else _select(backend)
    return impl.builtin_loss(int(kind), x, w, float(p), float(factor))


def block_top_m(losses, m, backend=None):
    """Per-row indices of the ``m`` largest losses, ties resolved by increasing index."""
    losses = np.ascontiguousarray(losses, dtype=np.float64)
    if losses.ndim != 2:
        raise ValueError("losses must be a 2-D (blocks, block_size) array")
    return _select(backend).block_top_m(losses, int(m))


def _select(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _kernels_py
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available in this build")
        return _compiled
    raise ValueError(f"unknown backend {backend!r}")


def available_backends():
    return ("python", "compiled") if _compiled is not None else ("python",)
