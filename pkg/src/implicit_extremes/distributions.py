"""Primitive samplers: Fréchet, independent Pareto vectors, Dirichlet,
Poisson-process epochs and spectral measures on a gauge's unit sphere.

Every sampler takes an explicit ``rng`` (an :class:`~implicit_extremes.rng.RngStream`
or a live ``numpy.random.Generator``) and an optional ``size``.  The primitive
draws (uniforms, gammas, exponentials) can be injected instead, which makes the
transforms deterministic and directly testable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .geometry import LossFunction, harmonic
from .rng import as_generator, open_uniform, standard_exponential


@dataclass(frozen=True)
class FrechetLaw:
    """``P(Z <= x) = exp(-(x / scale)^{-alpha})`` for x > 0."""

    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.scale > 0):
            raise ValueError(f"Fréchet parameters must be positive, got {self}")

    def cdf(self, x):
        return frechet_cdf(self, x)


@dataclass(frozen=True)
class DirichletLaw:
    alphas: tuple

    def __post_init__(self):
        a = tuple(float(v) for v in self.alphas)
        if not a or any(not v > 0 for v in a):
            raise ValueError("Dirichlet parameters must be positive")
        object.__setattr__(self, "alphas", a)

    @property
    def mean(self):
        a = np.asarray(self.alphas)
        return a / a.sum()


def frechet_cdf(law: FrechetLaw, x):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.where(x > 0, np.exp(-np.power(np.where(x > 0, x, 1.0) / law.scale, -law.alpha)), 0.0)
    return float(out) if out.ndim == 0 else out


def sample_frechet(law: FrechetLaw, rng=None, size=None, u=None):
    """Inverse-CDF draw ``scale * (-log u)^{-1/alpha}``."""
    if u is None:
        u = open_uniform(as_generator(rng), size)
    u = np.asarray(u, dtype=np.float64)
    z = law.scale * np.power(-np.log(u), -1.0 / law.alpha)
    return float(z) if z.ndim == 0 else z


def sample_pareto_vector(alphas, rng=None, size=None, u=None):
    """Independent standard Pareto coordinates ``U_i^{-1/alpha_i}`` (each >= 1)."""
    a = np.asarray(alphas, dtype=np.float64)
    if a.ndim != 1 or a.size < 1 or np.any(~(a > 0)):
        raise ValueError("alphas must be a non-empty list of positive numbers")
    if u is None:
        shape = (a.size,) if size is None else (size, a.size)
        u = open_uniform(as_generator(rng), shape)
    return np.power(np.asarray(u, dtype=np.float64), -1.0 / a)


def sample_gamma(shape, rng=None, size=None):
    """Gamma(shape, 1) draws.

    numpy's generator implements the Marsaglia-Tsang squeeze/rejection method,
    with the ``G(a) = G(a + 1) U^{1/a}`` boost for shapes below one.
    """
    return as_generator(rng).standard_gamma(shape, size=size)


def sample_dirichlet(law: DirichletLaw, rng=None, size=None, gammas=None):
    """``(G_i / sum G)_i`` with independent Gamma(alpha_i, 1) draws."""
    a = np.asarray(law.alphas)
    if gammas is None:
        shape = a.shape if size is None else (size, a.size)
        gammas = sample_gamma(np.broadcast_to(a, shape), rng)
    g = np.asarray(gammas, dtype=np.float64)
    return g / g.sum(axis=-1, keepdims=True)


def poisson_epochs(m: int, rng=None, size=None, exponentials=None):
    """First ``m`` arrival times ``Gamma_1 < ... < Gamma_m`` of a unit-rate Poisson process."""
    if m < 1:
        raise ValueError("need at least one epoch")
    if exponentials is None:
        shape = (m,) if size is None else (size, m)
        exponentials = standard_exponential(as_generator(rng), shape)
    e = np.asarray(exponentials, dtype=np.float64)
    if e.shape[-1] != m:
        raise ValueError(f"expected {m} exponential increments, got shape {e.shape}")
    return np.cumsum(e, axis=-1)


# -- spectral measures ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """A finite measure on the unit sphere ``{gauge = 1}``.

    Stored constructively: ``total_mass`` plus a sampler of the normalized
    probability law, ``sampler(gen, size) -> (size, d)`` array.
    """

    total_mass: float
    gauge: LossFunction
    sampler: Callable = field(repr=False)
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    density: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (0 <= self.total_mass < np.inf):
            raise ValueError(f"spectral mass must be finite and non-negative, got {self.total_mass}")

    @property
    def dimension(self) -> int:
        return self.gauge.dimension

    @property
    def dirichlet_alphas(self):
        return self.params.get("alphas") if self.kind == "pareto-dirichlet" else None


def pareto_dirichlet_mass(alphas) -> float:
    """``prod(a_i Gamma(a_i)) / (a Gamma(a))`` with ``a = sum a_i``."""
    a = np.asarray(alphas, dtype=np.float64)
    total = a.sum()
    log_c = np.sum(np.log(a) + gammaln(a)) - np.log(total) - gammaln(total)
    return float(np.exp(log_c))


def pareto_dirichlet_spectral(alphas) -> SpectralMeasure:
    """Spectral measure of independent alpha_i-Pareto coordinates on the open orthant.

    Under the harmonic gauge the unit sphere is the coordinate-wise inverse of
    the open simplex, and the normalized measure is the law of ``1 / xi`` with
    ``xi ~ Dirichlet(alphas)``.  The density in simplex coordinates
    ``u_1..u_{d-1}`` is ``prod(a_i) / a * prod u_i^{a_i - 1}``.
    """
    law = DirichletLaw(tuple(alphas))
    a = np.asarray(law.alphas)

    def sampler(gen, size):
        return 1.0 / sample_dirichlet(law, gen, size)

    def density(u):
        u = np.asarray(u, dtype=np.float64)
        full = np.concatenate([u, 1.0 - u.sum(axis=-1, keepdims=True)], axis=-1)
        return np.prod(a) / a.sum() * np.prod(np.power(full, a - 1.0), axis=-1)

    return SpectralMeasure(
        pareto_dirichlet_mass(a),
        harmonic(a.size),
        sampler,
        kind="pareto-dirichlet",
        params={"alphas": law.alphas},
        density=density,
    )


def discrete_spectral(atoms, weights, gauge: LossFunction) -> SpectralMeasure:
    """Finitely many atoms, rescaled onto ``{gauge = 1}``, with non-negative masses."""
    pts = np.atleast_2d(np.asarray(atoms, dtype=np.float64))
    w = np.asarray(weights, dtype=np.float64)
    if pts.shape[0] != w.size or np.any(w < 0) or not w.sum() > 0:
        raise ValueError("need one non-negative weight per atom and positive total mass")
    g = np.asarray(gauge(pts))
    if np.any(~(g > gauge.cone_tolerance)):
        raise ValueError("spectral atoms must lie outside the cone of the gauge")
    pts = pts / g[:, None]
    probs = w / w.sum()

    def sampler(gen, size):
        return pts[gen.choice(len(probs), size=size, p=probs)]

    return SpectralMeasure(
        float(w.sum()),
        gauge,
        sampler,
        kind="discrete",
        params={"atoms": pts, "weights": w},
    )


def sample_spectral(sm: SpectralMeasure, rng=None, size=None, xi=None):
    """Draw from the normalized spectral law ``sigma_S / sigma_S(S)``.

    For the Pareto-Dirichlet measure a Dirichlet draw ``xi`` may be injected;
    the result is then ``1 / xi``.
    """
    if not sm.total_mass > 0:
        raise ValueError("cannot sample a spectral measure with zero total mass")
    if xi is not None:
        if sm.kind != "pareto-dirichlet":
            raise ValueError("injected Dirichlet draws only apply to the Pareto-Dirichlet measure")
        return 1.0 / np.asarray(xi, dtype=np.float64)
    gen = as_generator(rng)
    if size is None:
        return sm.sampler(gen, 1)[0]
    return sm.sampler(gen, size)
