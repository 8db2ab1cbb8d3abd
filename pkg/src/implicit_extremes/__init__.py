"""Simulation and verification of implicit extremes.

The implicit maximum of a sample is the point with the largest value of a
homogeneous loss.  This package samples implicit maxima and order statistics,
their max-stable limit laws, and checks the limit theory against analytic
oracles.
"""

__version__ = "0.1.0"

from .distributions import (  # noqa: E402
    DirichletLaw,
    FrechetLaw,
    SpectralMeasure,
    discrete_spectral,
    frechet_cdf,
    pareto_dirichlet_spectral,
    poisson_epochs,
    sample_dirichlet,
    sample_frechet,
    sample_pareto_vector,
    sample_spectral,
)
from .expressions import LossExpression, ParseError, parse_loss_expr  # noqa: E402
from .geometry import (  # noqa: E402
    LossFunction,
    PolarPoint,
    assert_homogeneous,
    eval_loss,
    euclidean,
    harmonic,
    polar_compose,
    polar_decompose,
)
from .implicit_sampling import (  # noqa: E402
    DegenerateBlockError,
    ImplicitSelection,
    NormalizingSequence,
    block_implicit_maxima,
    implicit_argmax,
    implicit_order_indices,
)
from .limit_laws import (  # noqa: E402
    DivergentNormalizationError,
    ImplicitMaxStableLaw,
    limit_density_at,
    normalizing_constant,
    sample_limit_law,
    sample_limit_order_stats,
    sample_pareto_dirichlet,
    tilt_expectation,
)
from .rng import RngStream  # noqa: E402
from .verification import (  # noqa: E402
    GofReport,
    angular_conditional_estimate,
    finite_n_density_check,
    hill_tail_index,
    ks_statistic,
    normalization_quadrature,
)
