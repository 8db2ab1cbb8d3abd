"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

These define the reference semantics.  Column-wise accumulation is done in a
Python loop over coordinates (not ``ndarray.sum``) so that the summation order
matches the compiled loop exactly.
"""

import numpy as np

KIND_CODES = {
    "harmonic": 0,
    "euclidean": 1,
    "weighted-sum": 2,
    "lp-norm": 3,
    "min": 4,
    "geometric-mean": 5,
}


def builtin_loss(kind, x, weights, p, factor):
    n, d = x.shape
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if kind == 0:
            acc = np.zeros(n)
            for j in range(d):
                col = x[:, j]
                acc = acc + np.where(col > 0.0, 1.0 / np.where(col > 0.0, col, 1.0), np.inf)
            out = 1.0 / acc
        elif kind == 1:
            acc = np.zeros(n)
            for j in range(d):
                acc = acc + x[:, j] * x[:, j]
            out = np.sqrt(acc)
        elif kind == 2:
            acc = np.zeros(n)
            for j in range(d):
                acc = acc + weights[j] * np.maximum(x[:, j], 0.0)
            out = acc
        elif kind == 3:
            acc = np.zeros(n)
            for j in range(d):
                acc = acc + np.power(np.abs(x[:, j]), p)
            out = np.power(acc, 1.0 / p)
        elif kind == 4:
            out = np.full(n, np.inf)
            for j in range(d):
                out = np.minimum(out, np.maximum(x[:, j], 0.0))
        elif kind == 5:
            out = np.ones(n)
            for j in range(d):
                out = out * np.power(np.maximum(x[:, j], 0.0), 1.0 / d)
        else:
            raise ValueError(f"unknown loss kind code {kind}")
    return out * factor


def block_top_m(losses, m):
    """Indices of the m largest entries per row, ties broken by smaller index."""
    n = losses.shape[1]
    if m < 1 or m > n:
        raise ValueError(f"need 1 <= m <= {n}, got {m}")
    # stable sort of the negated values keeps equal losses in index order; NaN goes last
    order = np.argsort(-losses, axis=1, kind="stable")
    return np.ascontiguousarray(order[:, :m]).astype(np.int64, copy=False)
