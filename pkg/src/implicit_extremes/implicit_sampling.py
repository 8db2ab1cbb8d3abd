"""Finite-sample implicit extremes.

The implicit maximum of a block ``X_1..X_n`` is the point with the largest
loss, the smallest index winning ties; implicit order statistics rank the
block by loss with ties broken by increasing index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import DimensionError, LossFunction
from .parallel import AUX_KEY, map_streams
from .rng import as_generator, as_stream


class DegenerateBlockError(RuntimeError):
    """Every point of a block lies in the cone ``{f = 0}``."""

    def __init__(self, message, replicates=()):
        super().__init__(message)
        self.replicates = tuple(replicates)


@dataclass(frozen=True)
class ImplicitSelection:
    index: int
    loss_value: float
    point: np.ndarray


def _block(points, f: LossFunction):
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValueError("empty block")
    if x.shape[1] != f.dimension:
        raise DimensionError(f"points have dimension {x.shape[1]}, loss expects {f.dimension}")
    return np.ascontiguousarray(x), np.asarray(f(x), dtype=np.float64)


def order_indices_from_losses(losses, m: int):
    """Top-``m`` indices by loss, ties resolved by increasing index."""
    losses = np.ascontiguousarray(np.asarray(losses, dtype=np.float64).reshape(1, -1))
    if not 1 <= m <= losses.shape[1]:
        raise ValueError(f"need 1 <= m <= n = {losses.shape[1]}, got m = {m}")
    return kernels.block_top_m(losses, m)[0]


def implicit_argmax(points, f: LossFunction) -> ImplicitSelection:
    x, losses = _block(points, f)
    k = int(order_indices_from_losses(losses, 1)[0])
    if not losses[k] > f.cone_tolerance:
        raise DegenerateBlockError(f"all {len(losses)} points lie in the cone of {f.name}")
    return ImplicitSelection(k, float(losses[k]), x[k].copy())


def implicit_order_indices(points, f: LossFunction, m: int):
    _, losses = _block(points, f)
    return order_indices_from_losses(losses, m)


# -- normalization ---------------------------------------------------------------


@dataclass(frozen=True)
class NormalizingSequence:
    """``a_n = n^{1/alpha}`` ("theoretical") or the empirical ``1 - 1/n`` loss quantile.

    The empirical mode uses a pilot of ``pilot_factor * n`` loss draws taken
    from a reserved stream, independent of the replicate streams.
    """

    mode: str = "theoretical"
    alpha: float | None = None
    pilot_factor: int = 10

    def __post_init__(self):
        if self.mode not in ("theoretical", "empirical-quantile"):
            raise ValueError(f"unknown normalization mode {self.mode!r}")
        if self.mode == "theoretical" and not (self.alpha is not None and self.alpha > 0):
            raise ValueError("theoretical normalization needs a positive alpha")

    def value(self, n: int, model=None, f: LossFunction | None = None, rng=None) -> float:
        if self.mode == "theoretical":
            return float(n) ** (1.0 / self.alpha)
        if model is None or f is None or rng is None:
            raise ValueError("empirical-quantile normalization needs the model, loss and stream")
        gen = as_stream(rng).child(AUX_KEY).generator()
        losses = np.sort(np.asarray(f(model.sample(gen, self.pilot_factor * n))))
        a = float(np.quantile(losses, 1.0 - 1.0 / n)) if n > 1 else float(losses[-1])
        if not a > 0:
            raise DegenerateBlockError("pilot loss quantile is zero; the model puts too much mass on the cone")
        return a


def as_normalizing(a, alpha=None) -> NormalizingSequence | float:
    if isinstance(a, (NormalizingSequence, int, float)):
        return a
    if isinstance(a, str):
        return NormalizingSequence(a, alpha)
    raise TypeError(f"cannot interpret {a!r} as a normalizing sequence")


# -- replication -----------------------------------------------------------------


@dataclass
class BlockMaxima:
    """Normalized implicit order statistics of ``R`` independent blocks.

    ``points`` has shape ``(R, top_m, d)``, ``losses`` and ``indices`` shape
    ``(R, top_m)``.  Rows of degenerate replicates are NaN (index -1).
    """

    points: np.ndarray
    losses: np.ndarray
    indices: np.ndarray
    a_n: float
    n: int
    degenerate: tuple = ()
    notes: list = field(default_factory=list)

    @property
    def replicates(self) -> int:
        return self.points.shape[0]

    def valid(self):
        """Mask of non-degenerate replicates."""
        return self.indices[:, 0] >= 0


def block_implicit_maxima(
    model,
    f: LossFunction,
    n: int,
    R: int,
    a,
    rng,
    top_m: int = 1,
    workers: int = 1,
    on_degenerate: str = "raise",
) -> BlockMaxima:
    """Replicate ``R`` blocks of ``n`` points and return ``a_n^{-1} X_{k(i;n)}``, i <= top_m.

    Replicate ``r`` draws from stream ``rng.child(r)``.  Degenerate blocks are
    collected; with ``on_degenerate="raise"`` a :class:`DegenerateBlockError`
    lists all of them after the run, with ``"report"`` they stay in the result.
    """
    if n < 1 or R < 1:
        raise ValueError("block size and replicate count must be positive")
    if not 1 <= top_m <= n:
        raise ValueError(f"need 1 <= top_m <= n, got top_m = {top_m}, n = {n}")
    stream = as_stream(rng)
    if isinstance(a, NormalizingSequence):
        a_n = a.value(n, model, f, stream)
    else:
        a_n = float(a)
    if not a_n > 0:
        raise ValueError("normalizing constant must be positive")
    d = f.dimension

    def one(r, sub):
        x = np.ascontiguousarray(model.sample(sub.generator(), n), dtype=np.float64)
        losses = np.ascontiguousarray(f(x), dtype=np.float64)
        idx = kernels.block_top_m(losses.reshape(1, n), top_m)[0]
        if not losses[idx[0]] > f.cone_tolerance:
            return None
        return x[idx] / a_n, losses[idx] / a_n, idx

    results = map_streams(one, R, stream, workers)
    points = np.full((R, top_m, d), np.nan)
    losses = np.full((R, top_m), np.nan)
    indices = np.full((R, top_m), -1, dtype=np.int64)
    degenerate = []
    for r, res in enumerate(results):
        if res is None:
            degenerate.append(r)
            continue
        points[r], losses[r], indices[r] = res
    out = BlockMaxima(points, losses, indices, a_n, n, tuple(degenerate))
    if degenerate and on_degenerate == "raise":
        raise DegenerateBlockError(
            f"{len(degenerate)} of {R} blocks lie entirely in the cone of {f.name}", degenerate
        )
    return out


def draw_block_points(model, n: int, rng):
    """Convenience: one block of raw points from a model."""
    return np.asarray(model.sample(as_generator(rng), n), dtype=np.float64)
