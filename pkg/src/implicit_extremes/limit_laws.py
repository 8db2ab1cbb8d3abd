"""Implicit max-stable limit laws.

For a regularly varying model with index ``alpha`` and spectral measure
``sigma`` on the unit sphere ``S`` of a gauge, the normalized implicit maximum
under a loss ``f`` converges to ``Y`` with

    P(Y in dx) = exp(-C f(x)^{-alpha}) nu(dx),   C = int_S f^alpha dsigma.

``Y = Z Theta / g(Theta)`` with ``Z`` standard alpha-Fréchet, ``g = C^{-1/alpha} f``
and ``Theta ~ g^alpha dsigma``; in particular ``f(Y)`` is Fréchet with scale
``C^{1/alpha}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .distributions import (
    FrechetLaw,
    SpectralMeasure,
    DirichletLaw,
    pareto_dirichlet_spectral,
    poisson_epochs,
    sample_dirichlet,
    sample_frechet,
    sample_spectral,
)
from .geometry import ConeMembershipError, LossFunction, as_point, harmonic
from .parallel import chunk_sizes, map_streams
from .rng import as_generator, as_stream

MC_CHUNK = 1 << 16
DIVERGENCE_CAP = 1e6
STABILITY_TOL = 1e-3
QUAD_TRUNCATIONS = (1e-4, 1e-6, 1e-8)


class DivergentNormalizationError(ArithmeticError):
    """``int_S f^alpha dsigma`` is infinite: the loss does not define a valid limit law."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UnsupportedSamplerError(ValueError):
    pass


@dataclass(frozen=True)
class NormalizingConstant:
    value: float
    se: float
    method: str  # analytic | discrete-sum | quadrature | monte-carlo
    diagnostics: dict = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        return self.method in ("analytic", "discrete-sum")


# -- normalizing constant ------------------------------------------------------------


def _hill(sample, k=None):
    # local import keeps verification free to import this module
    from .verification import hill_tail_index

    return hill_tail_index(sample, k)


def normalizing_constant(
    f: LossFunction,
    alpha: float,
    spectral: SpectralMeasure,
    N: int = 100_000,
    rng=None,
    method: str = "auto",
    workers: int = 1,
) -> NormalizingConstant:
    """``C = int_S f(theta)^alpha sigma(dtheta)``.

    ``method="auto"`` picks, in order: the exact value when ``f`` is a positive
    multiple of the spectral gauge (``C = k^alpha sigma(S)``) or the spectral
    measure is discrete; one-dimensional quadrature for the two-dimensional
    Pareto-Dirichlet measure; Monte Carlo otherwise.  Divergent integrals
    raise :class:`DivergentNormalizationError`.
    """
    if f.dimension != spectral.dimension:
        raise ValueError("loss and spectral measure live in different dimensions")
    if method == "auto":
        if f.proportionality(spectral.gauge) is not None or spectral.kind == "discrete":
            method = "analytic"
        elif spectral.kind == "pareto-dirichlet" and spectral.dimension == 2:
            method = "quadrature"
        else:
            method = "monte-carlo"
    if method == "analytic":
        k = f.proportionality(spectral.gauge)
        if k is not None:
            return NormalizingConstant(k**alpha * spectral.total_mass, 0.0, "analytic")
        if spectral.kind != "discrete":
            raise ValueError("no closed form for this loss and spectral measure")
        atoms, weights = spectral.params["atoms"], spectral.params["weights"]
        value = float(np.sum(weights * np.power(f(atoms), alpha)))
        return NormalizingConstant(value, 0.0, "discrete-sum")
    if method == "quadrature":
        return _constant_by_quadrature(f, alpha, spectral)
    if method == "monte-carlo":
        if rng is None:
            raise TypeError("the Monte Carlo path needs an RngStream")
        return _constant_by_monte_carlo(f, alpha, spectral, N, as_stream(rng), workers)
    raise ValueError(f"unknown method {method!r}")


def _constant_by_quadrature(f, alpha, spectral):
    a1, a2 = spectral.dirichlet_alphas
    log_beta = gammaln(a1 + a2) - gammaln(a1) - gammaln(a2)

    def weight(u, v):
        # f^alpha at theta = (1/u, 1/v) times the Beta(a1, a2) density
        theta = np.array([1.0 / u, 1.0 / v])
        with np.errstate(over="ignore"):
            return f(theta) ** alpha * math.exp(log_beta + (a1 - 1) * math.log(u) + (a2 - 1) * math.log(v))

    def left(s):  # u = e^s near 0
        u = math.exp(s)
        return weight(u, 1.0 - u) * u if u > 0 else 0.0

    def right(s):  # v = 1 - u = e^s near 0
        v = math.exp(s)
        return weight(1.0 - v, v) * v if v > 0 else 0.0

    half = math.log(0.5)

    def integral(lo):
        a = integrate.quad(left, lo, half, limit=200)[0]
        b = integrate.quad(right, lo, half, limit=200)[0]
        return a + b

    truncated = [integral(math.log(eps)) for eps in QUAD_TRUNCATIONS]
    steps = np.diff(truncated)
    diagnostics = {
        "truncations": list(QUAD_TRUNCATIONS),
        "truncated_values": [spectral.total_mass * v for v in truncated],
    }
    if not np.all(np.isfinite(truncated)):
        raise DivergentNormalizationError("divergent normalization: non-finite quadrature", diagnostics)
    growing = steps[-1] > 1e-9 * max(1.0, abs(truncated[-1])) and steps[-1] >= 0.9 * steps[0]
    if growing:
        raise DivergentNormalizationError(
            "divergent normalization: truncated integrals keep growing as the truncation shrinks",
            diagnostics,
        )
    full_a = integrate.quad(left, -np.inf, half, limit=200)
    full_b = integrate.quad(right, -np.inf, half, limit=200)
    value = spectral.total_mass * (full_a[0] + full_b[0])
    err = spectral.total_mass * (full_a[1] + full_b[1])
    return NormalizingConstant(value, err, "quadrature", diagnostics)


def _constant_by_monte_carlo(f, alpha, spectral, N, stream, workers):
    if N < 10:
        raise ValueError("Monte Carlo normalization needs N >= 10")

    def chunk(j, sub):
        size = sizes[j]
        theta = sample_spectral(spectral, sub, size)
        with np.errstate(over="ignore"):
            return np.power(np.asarray(f(theta)), alpha)

    sizes = chunk_sizes(N, MC_CHUNK)
    w = np.concatenate(map_streams(chunk, len(sizes), stream, workers))
    mass = spectral.total_mass
    total = math.fsum(w)
    mean = total / N
    sd = float(np.std(w, ddof=1))
    se = sd / math.sqrt(N)
    head = math.fsum(w[: N // 10]) / (N // 10)
    rel_change = abs(mean - head) / abs(mean) if mean > 0 else 0.0
    # Var(head - mean) = 9 sd^2 / N for the nested running means
    noise = 4.0 * 3.0 * se / mean if mean > 0 else 0.0
    positive = w[w > 0]
    k = int(round(len(positive) ** 0.6)) if len(positive) > 10 else 0
    tail = _hill(positive, k) if k >= 10 else math.inf
    tail_band = tail * 3.0 / math.sqrt(k) if k else 0.0
    diagnostics = {
        "running_mean": mass * mean,
        "last_decade_relative_change": rel_change,
        "stability_threshold": max(STABILITY_TOL, noise),
        "weight_tail_index": tail,
        "hill_k": k,
    }
    reasons = []
    if not math.isfinite(mean) or mass * mean > DIVERGENCE_CAP:
        reasons.append("running mean exceeds 1e6")
    if rel_change > max(STABILITY_TOL, noise):
        reasons.append("running mean did not stabilize over the last decade of samples")
    if tail - tail_band <= 1.0:
        reasons.append(f"tail index of f^alpha(Theta) is {tail:.3g}, not confidently above 1 (infinite mean)")
    if reasons:
        raise DivergentNormalizationError("divergent normalization: " + "; ".join(reasons), diagnostics)
    return NormalizingConstant(mass * mean, mass * se, "monte-carlo", diagnostics)


# -- the law ---------------------------------------------------------------------


def _tilt_bound(f: LossFunction, spectral: SpectralMeasure):
    """``sup_S f`` when it is known in closed form, else None."""
    k = f.proportionality(spectral.gauge)
    if k is not None:
        return k
    if spectral.kind == "discrete":
        return float(np.max(f(spectral.params["atoms"])))
    if spectral.kind == "pareto-dirichlet" and f.kind == "min":
        # min_i 1/xi_i <= d, attained at the barycentre of the simplex
        return f.factor * spectral.dimension
    return None


@dataclass(frozen=True, eq=False)
class ImplicitMaxStableLaw:
    alpha: float
    loss: LossFunction
    spectral: SpectralMeasure
    C: float
    C_se: float = 0.0
    C_method: str = "analytic"
    sup_loss: float | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not (self.C > 0 and math.isfinite(self.C)):
            raise ValueError(f"normalizing constant must be positive and finite, got {self.C}")

    @classmethod
    def from_spectral(cls, loss, spectral, alpha, C=None, N=100_000, rng=None, sup_loss=None, workers=1):
        if C is None:
            nc = normalizing_constant(loss, alpha, spectral, N, rng, workers=workers)
            C, se, method = nc.value, nc.se, nc.method
        else:
            se, method = 0.0, "given"
        if sup_loss is None:
            sup_loss = _tilt_bound(loss, spectral)
        return cls(float(alpha), loss, spectral, float(C), float(se), method, sup_loss)

    @classmethod
    def pareto_dirichlet(cls, alphas, loss=None, **kwargs):
        """Limit of independent ``alpha_i``-Pareto coordinates; the loss defaults to harmonic."""
        spectral = pareto_dirichlet_spectral(alphas)
        loss = harmonic(spectral.dimension) if loss is None else loss
        return cls.from_spectral(loss, spectral, float(np.sum(alphas)), **kwargs)

    @property
    def dimension(self) -> int:
        return self.loss.dimension

    @property
    def exact_constant(self) -> bool:
        return self.C_method in ("analytic", "discrete-sum", "given", "quadrature")

    @property
    def loss_is_gauge(self) -> bool:
        return self.loss.proportionality(self.spectral.gauge) is not None

    @property
    def radial_law(self) -> FrechetLaw:
        return FrechetLaw(self.alpha, self.C ** (1.0 / self.alpha))

    def g(self, theta):
        return self.C ** (-1.0 / self.alpha) * np.asarray(self.loss(theta))

    def sample(self, gen, size):
        return sample_limit_law(self, gen, size)


# -- samplers --------------------------------------------------------------------


def sample_tilted_angles(law: ImplicitMaxStableLaw, rng, size: int):
    """``Theta ~ g^alpha dsigma``: by rejection from ``sigma_0`` with bound ``sup_S f``."""
    gen = as_generator(rng)
    if law.loss_is_gauge:
        return sample_spectral(law.spectral, gen, size)
    if law.sup_loss is None:
        raise UnsupportedSamplerError(
            f"no bound on {law.loss.name} over the spectral sphere; exact sampling is unavailable, "
            "use tilt_expectation for expectations"
        )
    out = np.empty((size, law.dimension))
    filled = 0
    while filled < size:
        batch = max(64, 2 * (size - filled))
        theta = sample_spectral(law.spectral, gen, batch)
        ratio = np.power(np.asarray(law.loss(theta)) / law.sup_loss, law.alpha)
        keep = theta[gen.random(batch) < ratio][: size - filled]
        out[filled : filled + len(keep)] = keep
        filled += len(keep)
    return out


def sample_limit_law(law: ImplicitMaxStableLaw, rng=None, size=None, z=None, theta=None):
    """Exact draw ``Y = Z Theta / g(Theta)``.

    ``z`` (standard Fréchet) and ``theta`` (already distributed as
    ``g^alpha dsigma``) may be injected.
    """
    single = size is None and (z is None or np.ndim(z) == 0)
    n = (1 if z is None else np.size(z)) if size is None else size
    gen = None
    if z is None or theta is None:
        gen = as_generator(rng)
    if z is None:
        z = sample_frechet(FrechetLaw(law.alpha), gen, n)
    if theta is None:
        theta = sample_tilted_angles(law, gen, n)
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    g = law.g(theta)
    if np.any(~(g > 0)):
        raise ConeMembershipError("angular draw with g(theta) = 0; it has no mass under the tilted law")
    y = z[:, None] * theta / g[:, None]
    return y[0] if single else y


def sample_pareto_dirichlet(alphas, rng=None, size=None, z=None, xi=None):
    """``W = Z / xi`` with ``Z`` standard (sum alpha_i)-Fréchet and ``xi ~ Dirichlet(alphas)``.

    Under the harmonic loss ``f(W) = Z`` exactly.
    """
    a = np.asarray(alphas, dtype=np.float64)
    single = size is None and (z is None or np.ndim(z) == 0)
    n = (1 if z is None else np.size(z)) if size is None else size
    gen = None if (z is not None and xi is not None) else as_generator(rng)
    if z is None:
        z = sample_frechet(FrechetLaw(float(a.sum())), gen, n)
    if xi is None:
        xi = sample_dirichlet(DirichletLaw(tuple(a)), gen, n)
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    w = z[:, None] / np.atleast_2d(np.asarray(xi, dtype=np.float64))
    return w[0] if single else w


def limit_density_at(law: ImplicitMaxStableLaw, x) -> float:
    """``exp(-C f(x)^{-alpha}) prod alpha_i x_i^{-alpha_i-1}`` for the Pareto-Dirichlet family."""
    alphas = law.spectral.dirichlet_alphas
    if alphas is None:
        raise ValueError("closed-form density only for the Pareto-Dirichlet family")
    return float(formal_density(law.loss, alphas, law.C)(as_point(x, law.dimension)))


def formal_density(f: LossFunction, alphas, C: float):
    """The Pareto-Dirichlet limit density as a function, for any ``C`` (also for invalid losses)."""
    a = np.asarray(alphas, dtype=np.float64)
    total = float(a.sum())
    log_const = float(np.sum(np.log(a)))

    exponents = [float(v) + 1.0 for v in a]

    def density(x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            # scalar path, called point by point from quadrature
            if not all(v > 0 for v in x):
                raise ConeMembershipError(f"density is defined on the open orthant, got {x}")
            fx = f(x)
            if fx <= 0:
                return 0.0
            log_ratio = -total * math.log(fx)
            if log_ratio > 700.0:
                return 0.0  # exp(-C f^-alpha) underflows long before nu blows up
            log_nu = log_const - math.fsum(e * math.log(v) for e, v in zip(exponents, x))
            return math.exp(min(-C * math.exp(log_ratio) + log_nu, 700.0))
        if np.any(x <= 0):
            raise ConeMembershipError(f"density is defined on the open orthant, got {x}")
        fx = np.asarray(f(x))
        with np.errstate(divide="ignore", over="ignore"):
            log_nu = log_const - np.sum((a + 1.0) * np.log(x), axis=-1)
            return np.exp(-C * np.power(fx, -total) + log_nu)

    return density


# -- order statistics ---------------------------------------------------------------


@dataclass(frozen=True)
class LimitOrderSample:
    points: np.ndarray  # (..., m, d)
    radii: np.ndarray  # (..., m), f-values, strictly decreasing
    angles: np.ndarray  # (..., m, d) on {f = 1}
    c: float


def sample_limit_order_stats(law: ImplicitMaxStableLaw, m: int, rng=None, size=None, gammas=None, theta=None):
    """``(c^{1/alpha} Gamma_i^{-1/alpha} Theta_i)_{i <= m}`` with ``c = nu{f > 1} = C``.

    The angular parts live on the unit sphere of the loss itself; spectral draws
    on another gauge's sphere are moved there by ``theta / f(theta)``, after
    tilting by ``f^alpha``.
    """
    single = size is None and (gammas is None or np.ndim(gammas) <= 1)
    n = (1 if gammas is None else np.size(gammas) // m) if size is None else size
    gen = None if (gammas is not None and theta is not None) else as_generator(rng)
    if gammas is None:
        gammas = poisson_epochs(m, gen, n)
    gammas = np.asarray(gammas, dtype=np.float64).reshape(n, m)
    if theta is None:
        raw = sample_tilted_angles(law, gen, n * m)
        theta = raw / np.asarray(law.loss(raw))[:, None]
    theta = np.asarray(theta, dtype=np.float64).reshape(n, m, law.dimension)
    c = law.C
    radii = c ** (1.0 / law.alpha) * np.power(gammas, -1.0 / law.alpha)
    points = radii[..., None] * theta
    if single:
        return LimitOrderSample(points[0], radii[0], theta[0], c)
    return LimitOrderSample(points, radii, theta, c)


# -- tilting estimator ---------------------------------------------------------------


@dataclass(frozen=True)
class TiltEstimate:
    estimate: float
    se: float
    n: int
    estimator: str  # importance | self-normalized
    weight_tail_index: float
    warning: str | None = None

    def interval(self, z: float = 2.5758):
        return self.estimate - z * self.se, self.estimate + z * self.se


def tilt_expectation(law: ImplicitMaxStableLaw, h, N: int, rng, workers: int = 1) -> TiltEstimate:
    """``E h(Y)`` by sampling the untilted spectral law.

    ``E h(Y) = c^{-alpha} E[h(kappa Z Theta / f(Theta)) f(Theta)^alpha]`` with
    ``Theta ~ sigma_0``, ``c^alpha = E f(Theta)^alpha = C / sigma(S)`` and
    ``kappa = C^{1/alpha}``.  With an exact ``C`` this is a plain importance
    sampling mean; otherwise ``c^alpha`` is estimated from the same draws
    (ratio estimator, delta-method standard error).  A weight tail index
    below 2 (infinite weight variance) is reported as a warning.
    """
    if N < 2:
        raise ValueError("need N >= 2")
    stream = as_stream(rng)
    kappa = law.C ** (1.0 / law.alpha)
    frechet = FrechetLaw(law.alpha)
    sizes = chunk_sizes(N, MC_CHUNK)

    def chunk(j, sub):
        gen = sub.generator()
        z = sample_frechet(frechet, gen, sizes[j])
        theta = sample_spectral(law.spectral, gen, sizes[j])
        ftheta = np.asarray(law.loss(theta))
        w = np.power(ftheta, law.alpha)
        with np.errstate(divide="ignore", invalid="ignore"):
            y = kappa * z[:, None] * theta / ftheta[:, None]
        hv = np.zeros(sizes[j])
        ok = w > 0
        hv[ok] = np.asarray(h(y[ok]), dtype=np.float64)
        return hv * w, w

    parts = map_streams(chunk, len(sizes), stream, workers)
    hw = np.concatenate([p[0] for p in parts])
    w = np.concatenate([p[1] for p in parts])
    positive = w[w > 0]
    k = int(round(len(positive) ** 0.6))
    tail = _hill(positive, k) if k >= 10 else math.inf
    warning = None
    if tail < 2.0:
        warning = f"importance weights have estimated tail index {tail:.3g} < 2; the standard error is unreliable"
    if law.exact_constant:
        c_alpha = law.C / law.spectral.total_mass
        est = math.fsum(hw) / N / c_alpha
        se = float(np.std(hw, ddof=1)) / math.sqrt(N) / c_alpha
        return TiltEstimate(est, se, N, "importance", tail, warning)
    mean_w = math.fsum(w) / N
    est = math.fsum(hw) / N / mean_w
    resid = hw - est * w
    se = float(np.std(resid, ddof=1)) / math.sqrt(N) / mean_w
    return TiltEstimate(est, se, N, "self-normalized", tail, warning)


def direct_expectation(law: ImplicitMaxStableLaw, h, N: int, rng, workers: int = 1):
    """Plain Monte Carlo ``(mean, se)`` of ``h(Y)`` from the exact sampler."""
    stream = as_stream(rng)
    sizes = chunk_sizes(N, MC_CHUNK)
    parts = map_streams(
        lambda j, sub: np.asarray(h(sample_limit_law(law, sub.generator(), sizes[j])), dtype=np.float64),
        len(sizes),
        stream,
        workers,
    )
    values = np.concatenate(parts)
    return math.fsum(values) / N, float(np.std(values, ddof=1)) / math.sqrt(N)


# -- bounded functionals -----------------------------------------------------------


def _indicator_exceed(law, threshold=None):
    t = law.C ** (1.0 / law.alpha) if threshold is None else float(threshold)
    return lambda y: (np.asarray(law.loss(y)) > t).astype(np.float64)


def _capped_loss(law, cap=10.0):
    cap = float(cap)
    return lambda y: np.minimum(np.asarray(law.loss(y)), cap)


def _capped_power(law, power=0.5, cap=10.0):
    power, cap = float(power), float(cap)
    return lambda y: np.minimum(np.power(np.asarray(law.loss(y)), power), cap)


def _indicator_box(law, lower=None, upper=None):
    lo = np.full(law.dimension, -np.inf) if lower is None else np.asarray(lower, dtype=np.float64)
    hi = np.full(law.dimension, np.inf) if upper is None else np.asarray(upper, dtype=np.float64)
    return lambda y: np.all((y > lo) & (y <= hi), axis=-1).astype(np.float64)


FUNCTIONALS = {
    "indicator-exceed": _indicator_exceed,
    "capped-loss": _capped_loss,
    "capped-power": _capped_power,
    "indicator-box": _indicator_box,
}


def make_functional(name: str, law: ImplicitMaxStableLaw, **params):
    """Bounded functional ``h`` from the named registry, bound to the law's loss."""
    try:
        factory = FUNCTIONALS[name]
    except KeyError:
        raise ValueError(f"unknown functional {name!r}; choose from {sorted(FUNCTIONALS)}") from None
    return factory(law, **params)


__all__ = [
    "DivergentNormalizationError",
    "ImplicitMaxStableLaw",
    "LimitOrderSample",
    "NormalizingConstant",
    "TiltEstimate",
    "UnsupportedSamplerError",
    "direct_expectation",
    "formal_density",
    "limit_density_at",
    "make_functional",
    "normalizing_constant",
    "sample_limit_law",
    "sample_limit_order_stats",
    "sample_pareto_dirichlet",
    "sample_tilted_angles",
    "tilt_expectation",
]
