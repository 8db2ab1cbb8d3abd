"""Built-in point models.

A model exposes ``dimension``, ``alpha`` (tail index), ``sample(gen, size)``
returning a ``(size, d)`` array, and ``limit_spectral(loss, rng)`` giving the
spectral measure that governs its implicit extremes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .distributions import (
    discrete_spectral,
    pareto_dirichlet_spectral,
    sample_pareto_vector,
)
from .geometry import LossFunction
from .limit_laws import ImplicitMaxStableLaw, sample_limit_law
from .rng import as_generator, open_uniform


@dataclass(frozen=True)
class ParetoModel:
    """Independent standard Pareto coordinates ``U_i^{-1/alpha_i}``."""

    alphas: tuple
    kind = "pareto"

    @property
    def dimension(self) -> int:
        return len(self.alphas)

    @property
    def alpha(self) -> float:
        return float(np.sum(self.alphas))

    def sample(self, gen, size):
        return sample_pareto_vector(self.alphas, gen, size)

    def limit_spectral(self, loss: LossFunction, rng=None, size: int = 100_000):
        return pareto_dirichlet_spectral(self.alphas)


@dataclass(frozen=True)
class GaussianCopulaModel:
    """``(1 / Phi_bar(Z_1), 1 / Phi_bar(Z_2))`` for a correlated standard normal pair.

    Unit Pareto margins; on the open quadrant the vector is regularly varying
    with index ``2 / (1 + rho)`` and the exponent measure of the
    Pareto-Dirichlet family with ``alpha_1 = alpha_2 = 1 / (1 + rho)``.  The
    normalizing sequence carries a slowly varying factor, so the empirical
    quantile normalization is the appropriate one.
    """

    rho: float
    kind = "gaussian-copula"
    dimension = 2

    def __post_init__(self):
        if not -1 < self.rho < 1:
            raise ValueError("correlation must lie in (-1, 1)")

    @property
    def alpha(self) -> float:
        return 2.0 / (1.0 + self.rho)

    def sample(self, gen, size):
        z = gen.standard_normal((size, 2))
        z[:, 1] = self.rho * z[:, 0] + np.sqrt(1.0 - self.rho**2) * z[:, 1]
        return 1.0 / ndtr(-z)

    def limit_spectral(self, loss: LossFunction, rng=None, size: int = 100_000):
        a = 1.0 / (1.0 + self.rho)
        return pareto_dirichlet_spectral((a, a))


@dataclass(frozen=True, eq=False)
class LimitLawModel:
    """Exact draws from an implicit max-stable law (a fixed point of implicit maxima)."""

    law: ImplicitMaxStableLaw
    kind = "limit-law"

    @property
    def dimension(self) -> int:
        return self.law.dimension

    @property
    def alpha(self) -> float:
        return self.law.alpha

    def sample(self, gen, size):
        return sample_limit_law(self.law, gen, size)

    def limit_spectral(self, loss: LossFunction, rng=None, size: int = 100_000):
        return self.law.spectral


@dataclass(frozen=True)
class BreimanModel:
    """``X = Z V`` with ``Z`` standard alpha-Pareto independent of a light-tailed ``V``.

    ``v_kind`` is ``"point"`` (``V = v`` deterministic) or ``"uniform-box"``
    (``V`` uniform on the box ``[low, high]``).  With ``a_n = n^{1/alpha}`` the
    spectral measure on ``{tau = 1}`` is ``E[1(theta(V) in .) tau(V)^alpha]``.
    """

    alpha: float
    v_kind: str
    v_params: tuple
    kind = "breiman"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.v_kind not in ("point", "uniform-box"):
            raise ValueError(f"unknown V specification {self.v_kind!r}")

    @property
    def dimension(self) -> int:
        return len(self.v_params[0])

    def sample_v(self, gen, size):
        if self.v_kind == "point":
            return np.broadcast_to(np.asarray(self.v_params[0], dtype=np.float64), (size, self.dimension)).copy()
        low, high = (np.asarray(p, dtype=np.float64) for p in self.v_params)
        return low + (high - low) * open_uniform(gen, (size, self.dimension))

    def sample(self, gen, size):
        z = np.power(open_uniform(gen, size), -1.0 / self.alpha)
        return z[:, None] * self.sample_v(gen, size)

    def limit_spectral(self, loss: LossFunction, rng=None, size: int = 100_000):
        """Spectral measure on ``{loss = 1}``: exact for a point mass, else ``size`` weighted atoms."""
        if self.v_kind == "point":
            v = np.atleast_2d(np.asarray(self.v_params[0], dtype=np.float64))
        else:
            if rng is None:
                raise TypeError("a uniform-box V needs a stream to build its spectral atoms")
            v = self.sample_v(as_generator(rng), size)
        tau = np.asarray(loss(v))
        keep = tau > loss.cone_tolerance
        if not np.any(keep):
            raise ValueError("V lies in the cone of the loss; the model has no implicit extremes")
        weights = np.power(tau[keep], self.alpha) / len(v)
        return discrete_spectral(v[keep], weights, loss)


def build_model(spec: dict, dimension: int, loss: LossFunction | None = None, rng=None, mc_size: int = 100_000):
    """Model from a config object ``{"kind": ..., parameters}``."""
    kind = spec.get("kind")
    if kind == "pareto":
        model = ParetoModel(tuple(float(a) for a in spec["alphas"]))
    elif kind == "gaussian-copula":
        model = GaussianCopulaModel(float(spec["rho"]))
    elif kind == "breiman":
        v = spec["V"]
        if v.get("kind") == "point":
            model = BreimanModel(float(spec["alpha"]), "point", (tuple(v["value"]),))
        else:
            model = BreimanModel(float(spec["alpha"]), v.get("kind"), (tuple(v["low"]), tuple(v["high"])))
    elif kind == "limit-law":
        if loss is None:
            raise ValueError("a limit-law model needs the loss")
        if "alphas" in spec:
            law = ImplicitMaxStableLaw.pareto_dirichlet(
                tuple(float(a) for a in spec["alphas"]), loss, N=mc_size, rng=rng
            )
        else:
            sp = spec["spectral"]
            spectral = discrete_spectral(sp["atoms"], sp["weights"], loss)
            law = ImplicitMaxStableLaw.from_spectral(loss, spectral, float(spec["alpha"]))
        model = LimitLawModel(law)
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    if model.dimension != dimension:
        raise ValueError(f"model has dimension {model.dimension}, config says {dimension}")
    return model
