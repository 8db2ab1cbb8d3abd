"""Statistical oracles: goodness-of-fit statistics, angular conditional laws,
the finite-n selection identity, quadrature normalization and Hill estimates.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate
from scipy.stats import chi2

from . import kernels
from .geometry import LossFunction, polar
from .parallel import AUX_KEY, chunk_sizes, map_streams
from .rng import as_stream

KS_CRITICAL_1PCT = 1.63
QUAD_EPSABS, QUAD_EPSREL = 1e-9, 1e-6


# -- reports ----------------------------------------------------------------------


@dataclass
class GofReport:
    test_name: str
    n: int
    statistic: float
    threshold: float
    passed: bool = None
    seed: int | None = None
    notes: str = ""

    def __post_init__(self):
        if self.passed is None:
            self.passed = bool(self.statistic <= self.threshold)

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        order = ("test_name", "n", "statistic", "threshold", "pass", "seed", "notes")
        return {k: d[k] for k in order}

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.test_name}: statistic={self.statistic:.6g} threshold={self.threshold:.6g} n={self.n}"


# -- Kolmogorov-Smirnov -----------------------------------------------------------


def ks_statistic(sample, cdf) -> float:
    """``max_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n)``."""
    x = np.sort(np.asarray(sample, dtype=np.float64).ravel())
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    F = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_two_sample(a, b) -> float:
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_threshold(n: int) -> float:
    """One-sample 1% critical value ``1.63 / sqrt(n)``."""
    return KS_CRITICAL_1PCT / math.sqrt(n)


def ks_two_sample_threshold(n: int, m: int | None = None) -> float:
    m = n if m is None else m
    return KS_CRITICAL_1PCT * math.sqrt((n + m) / (n * m))


def uniform_cdf(x):
    return np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)


def chi_square(observed, expected):
    """Pearson statistic and the 1% critical value with ``bins - 1`` degrees of freedom."""
    observed = np.asarray(observed, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    stat = float(np.sum((observed - expected) ** 2 / expected))
    return stat, float(chi2.ppf(0.99, observed.size - 1))


# -- angular laws -----------------------------------------------------------------


def simplex_coordinates(theta, gauge: LossFunction):
    """Angular parts mapped to the simplex.

    For the harmonic gauge ``u_j = 1 / theta_j`` (so ``sum u_j = 1`` on the
    sphere); otherwise the positive parts normalized to unit sum.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if gauge.kind == "harmonic":
        return 1.0 / (gauge.factor * theta)
    pos = np.maximum(theta, 0.0)
    return pos / pos.sum(axis=-1, keepdims=True)


@dataclass
class EmpiricalAngularLaw:
    """Bin masses of the angular part given exceedance of ``threshold``.

    For ``d = 2`` ``masses`` has one row (first simplex coordinate); for larger
    ``d`` one row per coordinate (marginal binning).
    """

    edges: np.ndarray
    masses: np.ndarray
    counts: np.ndarray
    threshold: float
    exceedances: int

    def total_variation(self, other_masses) -> float:
        return float(0.5 * np.max(np.sum(np.abs(self.masses - np.asarray(other_masses)), axis=-1)))


MIN_EXCEEDANCES = 100


def angular_histogram(u, bins=10, weights=None):
    """Histogram masses of simplex coordinates ``u`` (rows) on ``bins`` equal-width bins."""
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    edges = np.linspace(0.0, 1.0, bins + 1)
    cols = [0] if u.shape[1] == 2 else range(u.shape[1])
    counts = np.array([np.histogram(np.clip(u[:, j], 0.0, 1.0), edges, weights=weights)[0] for j in cols], dtype=np.float64)
    return edges, counts, counts / counts.sum(axis=1, keepdims=True)


def angular_conditional_estimate(samples, gauge: LossFunction, u: float, bins: int = 10) -> EmpiricalAngularLaw:
    x = np.asarray(samples, dtype=np.float64)
    tau, theta = polar(gauge, x)
    keep = tau > u
    count = int(keep.sum())
    if count < MIN_EXCEEDANCES:
        raise ValueError(f"only {count} points exceed the threshold {u}; need at least {MIN_EXCEEDANCES}")
    edges, counts, masses = angular_histogram(simplex_coordinates(theta[keep], gauge), bins)
    return EmpiricalAngularLaw(edges, masses, counts, float(u), count)


# -- finite-n selection identity -------------------------------------------------------


class AtomicLossError(ValueError):
    """The loss distribution has atoms; the finite-n identity needs a continuous one."""


@dataclass
class FiniteNCheck:
    lhs: float
    rhs: float
    lhs_se: float
    rhs_se: float
    passed: bool
    n: int
    N: int

    @property
    def z_score(self) -> float:
        return abs(self.lhs - self.rhs) / math.hypot(self.lhs_se, self.rhs_se)


def finite_n_density_check(model, f: LossFunction, n: int, A, N: int, rng, workers: int = 1, band: float = 4.0):
    """Compare ``P(X_k(n) in A)`` from ``N`` simulated blocks with ``n E[1_A(X) G(f(X))^{n-1}]``.

    ``G`` is replaced by the empirical CDF of a pilot of ``10 N`` loss draws
    taken on a reserved stream; the evaluation sample (``N`` draws) is
    independent of both.  ``A`` is a predicate on ``(m, d)`` point arrays.
    """
    if N < 1000:
        raise ValueError("need N >= 1000")
    stream = as_stream(rng)
    lhs_stream, rhs_stream, pilot_stream = stream.child(0), stream.child(1), stream.child(AUX_KEY)

    pilot = np.sort(np.asarray(f(model.sample(pilot_stream.generator(), 10 * N))))
    positive = pilot[pilot > f.cone_tolerance]
    dup = positive.size - np.unique(positive).size
    if dup > 1e-3 * max(positive.size, 1):
        raise AtomicLossError(
            f"{dup} duplicated loss values among {positive.size} pilot draws: the loss distribution has atoms"
        )

    blocks_per_chunk = max(1, (1 << 18) // n)
    sizes = chunk_sizes(N, blocks_per_chunk)

    def lhs_chunk(j, sub):
        gen = sub.generator()
        x = model.sample(gen, sizes[j] * n).reshape(sizes[j], n, -1)
        losses = np.ascontiguousarray(f(x), dtype=np.float64)
        k = kernels.block_top_m(losses, 1)[:, 0]
        return int(np.sum(np.asarray(A(x[np.arange(sizes[j]), k]), dtype=bool)))

    hits = sum(map_streams(lhs_chunk, len(sizes), lhs_stream, workers))
    lhs = hits / N
    lhs_se = math.sqrt(max(lhs * (1 - lhs), 1.0 / N) / N)

    x = model.sample(rhs_stream.generator(), N)
    G = np.searchsorted(pilot, np.asarray(f(x)), side="right") / pilot.size
    terms = n * np.asarray(A(x), dtype=np.float64) * np.power(G, n - 1)
    rhs = math.fsum(terms) / N
    rhs_se = float(np.std(terms, ddof=1)) / math.sqrt(N)
    se = math.hypot(lhs_se, rhs_se)
    return FiniteNCheck(lhs, rhs, lhs_se, rhs_se, bool(abs(lhs - rhs) < band * se), n, N)


# -- quadrature normalization ------------------------------------------------------------


@dataclass
class QuadratureResult:
    """Integral of the limit density over the open quadrant.

    ``truncated`` lists ``(T, I(T))`` for the boxes ``(0, T]^2``; ``value`` is
    the untruncated integral when the sequence converges.
    """

    value: float
    error: float
    truncated: list = field(default_factory=list)
    converged: bool = True


def normalization_quadrature(density, boxes=(1e2, 1e3, 1e4)) -> QuadratureResult:
    """Integrate a two-dimensional density over ``(0, inf)^2`` in log coordinates.

    ``density`` maps a point of the open quadrant to a non-negative value (see
    :func:`~implicit_extremes.limit_laws.formal_density`).  The integral over
    each box ``(0, T]^2`` is computed; if the increments do not shrink the
    integral is reported as divergent together with the last two refinements.
    """
    truncated = []
    for T in boxes:
        val, _ = _box_integral(density, T)
        truncated.append((float(T), val))
    values = [v for _, v in truncated]
    steps = np.diff(values)
    converged = bool(
        len(steps) == 0
        or abs(steps[-1]) <= 1e-6 * max(1.0, abs(values[-1]))
        or (len(steps) > 1 and abs(steps[-1]) < 0.5 * abs(steps[-2]))
    )
    if not converged:
        return QuadratureResult(values[-1], math.inf, truncated, False)
    value, err = _full_integral(density)
    return QuadratureResult(value, err, truncated, True)


def _log_integrand(density):
    # x_i = exp(-s_i), dx_i = x_i ds_i; the box (0, T] becomes s_i >= -log T
    def integrand(s2, s1):
        with np.errstate(over="ignore"):
            x = np.exp(-np.array([s1, s2]))
        if not (np.all(x > 0) and np.all(np.isfinite(x))):
            return 0.0  # the density vanishes at the boundary and at infinity
        return float(density(x)) * x[0] * x[1]

    return integrand


def _box_integral(density, T):
    lo = -math.log(T)
    return integrate.dblquad(_log_integrand(density), lo, np.inf, lo, np.inf, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL)


def _full_integral(density):
    return integrate.dblquad(_log_integrand(density), -np.inf, np.inf, -np.inf, np.inf, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL)


# -- tail index ---------------------------------------------------------------------


def default_hill_k(n: int) -> int:
    return max(1, min(n - 1, int(round(n**0.6))))


def hill_tail_index(sample, k: int | None = None) -> float:
    """``k / sum_{i<=k} log(x_(i) / x_(k+1))`` over the top ``k + 1`` order statistics."""
    x = np.asarray(sample, dtype=np.float64).ravel()
    if np.any(~(x > 0)):
        raise ValueError("the Hill estimator needs a positive sample")
    n = x.size
    k = default_hill_k(n) if k is None else int(k)
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n = {n}, got k = {k}")
    top = np.partition(x, n - k - 1)[n - k - 1 :]
    ref = top.min()
    s = math.fsum(np.log(top / ref))
    return math.inf if s == 0 else k / s
