import math

import numpy as np
import pytest
from scipy.stats import expon

from implicit_extremes.distributions import (
    DirichletLaw,
    FrechetLaw,
    discrete_spectral,
    frechet_cdf,
    pareto_dirichlet_mass,
    pareto_dirichlet_spectral,
    poisson_epochs,
    sample_dirichlet,
    sample_frechet,
    sample_gamma,
    sample_pareto_vector,
    sample_spectral,
)
from implicit_extremes.geometry import euclidean, harmonic
from implicit_extremes.rng import RngStream, open_uniform
from implicit_extremes.verification import ks_statistic, uniform_cdf

N = 100_000
KS_1PCT = 1.63 / math.sqrt(N)  # 0.0052 < 0.006


# -- rng ---------------------------------------------------------------------------


def test_streams_are_reproducible_and_distinct():
    a = RngStream(5, 1).generator().random(8)
    b = RngStream(5, 1).generator().random(8)
    c = RngStream(5, 2).generator().random(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(RngStream(5, 1).child(0).generator().random(8), a)


def test_open_uniform_stays_inside():
    u = open_uniform(RngStream(1).generator(), 10**6)
    assert u.min() > 0 and u.max() < 1
    assert (0.5 / 2**52) > 0 and (2**52 - 0.5) / 2**52 < 1


# -- Fréchet -----------------------------------------------------------------------


def test_frechet_cdf_examples():
    assert frechet_cdf(FrechetLaw(1.0), 1.0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert frechet_cdf(FrechetLaw(2.0), 1e300) == 1.0
    assert frechet_cdf(FrechetLaw(2.0), 0.0) == 0.0
    assert frechet_cdf(FrechetLaw(2.0), -3.0) == 0.0
    x = np.linspace(-1, 10, 200)
    assert np.all(np.diff(frechet_cdf(FrechetLaw(1.5, 2.0), x)) >= 0)


def test_frechet_injected_uniform():
    assert sample_frechet(FrechetLaw(1.0), u=math.exp(-1)) == pytest.approx(1.0, rel=1e-15)
    assert sample_frechet(FrechetLaw(2.0), u=math.exp(-1)) == pytest.approx(1.0, rel=1e-15)


def test_frechet_ks(stream):
    law = FrechetLaw(2.0, math.sqrt(0.5))
    z = sample_frechet(law, stream, N)
    assert ks_statistic(z, law.cdf) < 0.006
    # inverse-CDF consistency
    assert ks_statistic(frechet_cdf(law, z), uniform_cdf) < KS_1PCT


def test_frechet_rejects_bad_parameters():
    with pytest.raises(ValueError):
        FrechetLaw(0.0)
    with pytest.raises(ValueError):
        FrechetLaw(1.0, -1.0)


# -- Pareto ------------------------------------------------------------------------


def test_pareto_injected():
    np.testing.assert_allclose(sample_pareto_vector((1, 2), u=(0.25, 0.04)), [4.0, 5.0], rtol=1e-15)


def test_pareto_support_and_tail(stream):
    x = sample_pareto_vector((1.0, 2.0), stream, N)
    assert x.shape == (N, 2)
    assert np.all(x >= 1.0)
    assert abs(np.mean(x[:, 0] > 10) - 0.1) < 0.01


def test_pareto_rejects_bad_alphas():
    with pytest.raises(ValueError):
        sample_pareto_vector((1.0, 0.0), RngStream(1), 3)


# -- Dirichlet ---------------------------------------------------------------------


def test_dirichlet_injected():
    np.testing.assert_allclose(sample_dirichlet(DirichletLaw((1, 1)), gammas=(1, 3)), [0.25, 0.75])


def test_dirichlet_uniform_marginal(stream):
    xi = sample_dirichlet(DirichletLaw((1, 1)), stream, N)
    assert ks_statistic(xi[:, 0], uniform_cdf) < 0.006


def test_dirichlet_means_and_simplex(stream):
    xi = sample_dirichlet(DirichletLaw((2, 1)), stream, N)
    np.testing.assert_allclose(xi.mean(axis=0), [2 / 3, 1 / 3], atol=0.01)
    assert np.all((xi > 0) & (xi < 1))
    assert np.max(np.abs(xi.sum(axis=1) - 1.0)) < 1e-12


def test_gamma_small_shape(stream):
    g = sample_gamma(np.full(N, 0.3), stream)
    assert np.all(g >= 0)
    assert abs(g.mean() - 0.3) < 0.01


def test_dirichlet_law_validation():
    with pytest.raises(ValueError):
        DirichletLaw((1.0, -1.0))
    np.testing.assert_allclose(DirichletLaw((2, 1)).mean, [2 / 3, 1 / 3])


# -- Poisson epochs ----------------------------------------------------------------


def test_poisson_injected():
    np.testing.assert_allclose(poisson_epochs(3, exponentials=(0.5, 1.5, 1.0)), [0.5, 2.0, 3.0])


def test_poisson_statistics(stream):
    g = poisson_epochs(3, stream, N)
    assert np.all(np.diff(g, axis=1) > 0)
    assert abs(g[:, 0].mean() - 1.0) < 0.02
    assert ks_statistic(g[:, 0] / g[:, 1], uniform_cdf) < 0.006
    assert ks_statistic(np.diff(g, axis=1)[:, 1], expon.cdf) < KS_1PCT


def test_poisson_errors():
    with pytest.raises(ValueError):
        poisson_epochs(0, RngStream(1))
    with pytest.raises(ValueError):
        poisson_epochs(3, exponentials=(1.0, 2.0))


# -- spectral measures ---------------------------------------------------------------


def test_pareto_dirichlet_injected_xi():
    sm = pareto_dirichlet_spectral((1, 1))
    theta = sample_spectral(sm, xi=(0.25, 0.75))
    np.testing.assert_allclose(theta, [4.0, 4.0 / 3.0])
    assert harmonic(2)(theta) == pytest.approx(1.0, rel=1e-15)


def test_pareto_dirichlet_mass():
    assert pareto_dirichlet_spectral((1, 1)).total_mass == pytest.approx(0.5, rel=1e-15)
    # prod(a_i Gamma(a_i)) / (a Gamma(a)) for (1, 2): (1 * 2) / (3 * 2)
    assert pareto_dirichlet_mass((1, 2)) == pytest.approx(1 / 3, rel=1e-14)
    # (0.5 Gamma(0.5))^2 / (1 * Gamma(1)) = pi / 4
    assert pareto_dirichlet_mass((0.5, 0.5)) == pytest.approx(math.pi / 4, rel=1e-14)


@pytest.mark.parametrize("alphas", [(1, 1), (0.5, 2.0), (1, 2, 3)])
def test_spectral_draws_on_sphere(alphas, stream):
    sm = pareto_dirichlet_spectral(alphas)
    theta = sample_spectral(sm, stream, 10_000)
    assert np.max(np.abs(sm.gauge(theta) - 1.0)) < 1e-9


def test_discrete_spectral():
    sm = discrete_spectral([[3.0, 4.0], [1.0, 0.0]], [2.0, 1.0], euclidean(2))
    assert sm.total_mass == 3.0
    theta = sample_spectral(sm, RngStream(3), 30_000)
    np.testing.assert_allclose(euclidean(2)(theta), 1.0, rtol=1e-15)
    share = np.mean(theta[:, 0] == 0.6)
    assert abs(share - 2 / 3) < 0.01


def test_spectral_errors():
    with pytest.raises(ValueError):
        discrete_spectral([[1.0, 1.0]], [0.0], euclidean(2))
    with pytest.raises(ValueError):
        discrete_spectral([[1.0, 0.0]], [1.0], harmonic(2))
    zero = discrete_spectral([[1.0, 1.0]], [1.0], euclidean(2))
    object.__setattr__(zero, "total_mass", 0.0)
    with pytest.raises(ValueError):
        sample_spectral(zero, RngStream(1), 3)


def test_determinism_bit_for_bit():
    a = sample_pareto_vector((1, 1), RngStream(77, 3), 1000)
    b = sample_pareto_vector((1, 1), RngStream(77, 3), 1000)
    assert a.tobytes() == b.tobytes()
