"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 degenerate block or divergent
normalization, 4 failed goodness-of-fit check.  Errors are also written to
standard error as a one-line JSON diagnostic.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np
from scipy.stats import beta as beta_dist

from . import __version__
from .config import ConfigError, load_config, resolve_config
from .distributions import FrechetLaw
from .expressions import ParseError
from .geometry import LossValidationError, polar
from .implicit_sampling import DegenerateBlockError, NormalizingSequence, block_implicit_maxima
from .limit_laws import (
    DivergentNormalizationError,
    ImplicitMaxStableLaw,
    UnsupportedSamplerError,
    direct_expectation,
    formal_density,
    make_functional,
    normalizing_constant,
    sample_limit_law,
    sample_limit_order_stats,
    tilt_expectation,
)
from .models import GaussianCopulaModel, LimitLawModel, build_model
from .parallel import chunk_sizes, map_streams
from .rng import RngStream
from .verification import (
    GofReport,
    ks_statistic,
    ks_threshold,
    ks_two_sample,
    ks_two_sample_threshold,
    normalization_quadrature,
    simplex_coordinates,
    uniform_cdf,
)

EXIT_OK, EXIT_CONFIG, EXIT_SENTINEL, EXIT_FAILED = 0, 2, 3, 4
SAMPLE_CHUNK = 4096
DEFAULT_SLACK = 0.007


class AcceptanceFailure(Exception):
    pass


# -- shared plumbing -----------------------------------------------------------------


class Experiment:
    """Resolved config plus the objects built from it."""

    def __init__(self, args):
        overrides = {
            "seed": args.seed,
            "workers": args.workers,
            "block_size": args.block_size,
            "replicates": args.replicates,
            "top_m": args.top_m,
            "mc_size": args.mc_size,
            "normalization": args.normalization,
        }
        self.cfg = resolve_config(load_config(args.config), overrides)
        self.loss = self.cfg.build_loss()
        self.main = RngStream(self.cfg.seed, 0)
        self.aux = RngStream(self.cfg.seed, 1)
        try:
            self.model = build_model(
                self.cfg.model, self.cfg.dimension, self.loss, self.aux.child(0), self.cfg.mc_size
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"incomplete model specification: {exc}") from exc
        self._law = None

    @property
    def workers(self):
        return self.cfg.workers

    def law(self) -> ImplicitMaxStableLaw:
        if self._law is None:
            if isinstance(self.model, LimitLawModel):
                self._law = self.model.law
            else:
                spectral = self.model.limit_spectral(self.loss, self.aux.child(1), self.cfg.mc_size)
                self._law = ImplicitMaxStableLaw.from_spectral(
                    self.loss, spectral, self.model.alpha, N=self.cfg.mc_size, rng=self.aux.child(2), workers=self.workers
                )
        return self._law

    def header(self):
        return {"config_hash": self.cfg.config_hash(), "version": __version__}


def _fmt(v) -> str:
    return "%.17g" % v


def write_samples_csv(out, points, losses):
    """``points`` (R, m, d), ``losses`` (R, m); rank is 1-based, replicate 0-based."""
    R, m, d = points.shape
    out.write(",".join(["replicate", "rank"] + [f"coord_{j + 1}" for j in range(d)] + ["loss_value"]) + "\n")
    for r in range(R):
        for i in range(m):
            row = [str(r), str(i + 1)] + [_fmt(v) for v in points[r, i]] + [_fmt(losses[r, i])]
            out.write(",".join(row) + "\n")


def write_json(out, obj):
    json.dump(obj, out, indent=2, sort_keys=False, allow_nan=True)
    out.write("\n")


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


# -- subcommands ---------------------------------------------------------------------


def _normalizing(exp, args):
    return NormalizingSequence(exp.cfg.normalization, exp.model.alpha, args.pilot_factor)


def cmd_simulate_implicit_max(exp: Experiment, args, out):
    cfg = exp.cfg
    a = _normalizing(exp, args)
    bm = block_implicit_maxima(
        exp.model, exp.loss, cfg.block_size, cfg.replicates, a, exp.main, cfg.top_m, exp.workers
    )
    write_samples_csv(out, bm.points, bm.losses)


def cmd_simulate_limit_law(exp: Experiment, args, out):
    law = exp.law()
    sizes = chunk_sizes(exp.cfg.replicates, SAMPLE_CHUNK)
    parts = map_streams(lambda j, sub: sample_limit_law(law, sub.generator(), sizes[j]), len(sizes), exp.main, exp.workers)
    y = np.concatenate(parts)
    write_samples_csv(out, y[:, None, :], np.asarray(law.loss(y))[:, None])


def cmd_simulate_order_stats(exp: Experiment, args, out):
    law = exp.law()
    m = exp.cfg.top_m
    sizes = chunk_sizes(exp.cfg.replicates, SAMPLE_CHUNK)
    parts = map_streams(
        lambda j, sub: sample_limit_order_stats(law, m, sub.generator(), sizes[j]), len(sizes), exp.main, exp.workers
    )
    points = np.concatenate([p.points for p in parts])
    radii = np.concatenate([p.radii for p in parts])
    write_samples_csv(out, points, radii)


def _functional_params(args):
    params = {}
    if args.threshold is not None:
        params["threshold"] = args.threshold
    if args.cap is not None:
        params["cap"] = args.cap
    if args.power is not None:
        params["power"] = args.power
    if args.lower is not None:
        params["lower"] = [float(v) for v in args.lower.split(",")]
    if args.upper is not None:
        params["upper"] = [float(v) for v in args.upper.split(",")]
    return params


def cmd_estimate_tilt(exp: Experiment, args, out):
    law = exp.law()
    params = _functional_params(args)
    try:
        h = make_functional(args.functional, law, **params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {args.functional}: {exc}") from exc
    N = exp.cfg.mc_size
    est = tilt_expectation(law, h, N, exp.main, exp.workers)
    result = dict(exp.header())
    result.update(
        functional=args.functional,
        params=params,
        estimate=est.estimate,
        se=est.se,
        n=est.n,
        estimator=est.estimator,
        weight_tail_index=est.weight_tail_index,
        warning=est.warning,
        C=law.C,
    )
    reports = []
    if args.functional == "indicator-exceed" and "threshold" not in params:
        exact = 1.0 - math.exp(-1.0)
        z = abs(est.estimate - exact) / est.se if est.se > 0 else 0.0
        reports.append(GofReport("tilt-vs-analytic", N, z, 3.0, seed=exp.cfg.seed, notes="|estimate - (1 - 1/e)| / se"))
    if args.compare_direct:
        try:
            mean, se = direct_expectation(law, h, N, exp.aux.child(3), exp.workers)
        except UnsupportedSamplerError as exc:
            raise ConfigError(str(exc)) from exc
        result["direct"] = {"estimate": mean, "se": se}
        gap = abs(est.estimate - mean)
        reports.append(
            GofReport("tilt-vs-direct", N, gap, 2.5758 * (est.se + se), seed=exp.cfg.seed, notes="99% intervals overlap")
        )
    result["reports"] = [r.to_dict() for r in reports]
    write_json(out, result)
    if not all(r.passed for r in reports):
        raise AcceptanceFailure("tilting estimate disagrees with its oracle")


def _angular_report(exp, law, points, slack):
    """KS on the first simplex coordinate of the angular part."""
    R = len(points)
    seed = exp.cfg.seed
    gauge = law.spectral.gauge if law.spectral.kind == "pareto-dirichlet" else law.loss
    _, theta = polar(gauge, points)
    u = simplex_coordinates(theta, gauge)[:, 0]
    if law.spectral.kind == "pareto-dirichlet" and law.dimension == 2 and law.loss_is_gauge:
        a1, a2 = law.spectral.dirichlet_alphas
        stat = ks_statistic(u, lambda t: beta_dist.cdf(t, a1, a2))
        return GofReport(
            "angular-ks", R, stat, ks_threshold(R) + slack, seed=seed,
            notes=f"first simplex coordinate vs Beta({a1:g}, {a2:g})",
        )
    try:
        fresh = sample_limit_law(law, exp.aux.child(4).generator(), R)
    except UnsupportedSamplerError:
        return None
    _, theta_y = polar(gauge, fresh)
    stat = ks_two_sample(u, simplex_coordinates(theta_y, gauge)[:, 0])
    return GofReport(
        "angular-ks", R, stat, ks_two_sample_threshold(R) + slack, seed=seed,
        notes="first simplex coordinate vs exact limit draws (two-sample)",
    )


def cmd_test_convergence(exp: Experiment, args, out):
    cfg = exp.cfg
    law = exp.law()
    a = _normalizing(exp, args)
    bm = block_implicit_maxima(exp.model, exp.loss, cfg.block_size, cfg.replicates, a, exp.main, cfg.top_m, exp.workers)
    R = cfg.replicates
    slack = args.slack
    notes = f"n={cfg.block_size}, a_n={bm.a_n:.6g} ({cfg.normalization})"
    if cfg.normalization == "theoretical":
        scale = law.C ** (1.0 / law.alpha)
        if isinstance(exp.model, GaussianCopulaModel):
            notes += "; the copula's a_n has a slowly varying factor, prefer empirical-quantile"
    else:
        scale = 1.0
        notes += "; empirical quantile normalization, limit scale 1"
    frechet = FrechetLaw(law.alpha, scale)
    reports = [
        GofReport(
            "frechet-radial-ks", R, ks_statistic(bm.losses[:, 0], frechet.cdf), ks_threshold(R) + slack,
            seed=cfg.seed, notes=notes + f"; Frechet(alpha={law.alpha:g}, scale={scale:.6g})",
        )
    ]
    angular = _angular_report(exp, law, bm.points[:, 0, :], slack)
    if angular is not None:
        reports.append(angular)
    if cfg.top_m >= 2:
        ratio = (bm.losses[:, 1] / bm.losses[:, 0]) ** law.alpha
        reports.append(
            GofReport("order-ratio-ks", R, ks_statistic(ratio, uniform_cdf), ks_threshold(R) + slack,
                      seed=cfg.seed, notes="(f_(2) / f_(1))^alpha vs Uniform(0, 1)")
        )
    write_json(out, dict(exp.header(), reports=[r.to_dict() for r in reports]))
    if not all(r.passed for r in reports):
        raise AcceptanceFailure("; ".join(r.line() for r in reports if not r.passed))


def cmd_check_normalization(exp: Experiment, args, out):
    cfg = exp.cfg
    spectral = (
        exp.model.law.spectral
        if isinstance(exp.model, LimitLawModel)
        else exp.model.limit_spectral(exp.loss, exp.aux.child(1), cfg.mc_size)
    )
    alpha = exp.model.alpha
    pd2 = spectral.kind == "pareto-dirichlet" and spectral.dimension == 2
    try:
        nc = normalizing_constant(exp.loss, alpha, spectral, cfg.mc_size, exp.aux.child(2), workers=exp.workers)
    except DivergentNormalizationError as exc:
        if pd2:
            # truncated integrals of the formal density (any C > 0 shows the growth)
            quad = normalization_quadrature(formal_density(exp.loss, spectral.dirichlet_alphas, 1.0))
            exc.diagnostics["truncated_density_integrals"] = quad.truncated
        raise
    reports = [
        GofReport("normalizing-constant", cfg.mc_size, nc.value, 1e6, seed=cfg.seed,
                  notes=f"C via {nc.method}, standard error {nc.se:.3g}")
    ]
    if pd2:
        quad = normalization_quadrature(formal_density(exp.loss, spectral.dirichlet_alphas, nc.value))
        reports.append(
            GofReport("density-integral", 0, abs(quad.value - 1.0), 1e-3, seed=cfg.seed,
                      notes=f"integral {quad.value:.9f}; boxes {quad.truncated}")
        )
    write_json(out, dict(exp.header(), C=nc.value, C_se=nc.se, C_method=nc.method, reports=[r.to_dict() for r in reports]))
    if not all(r.passed for r in reports):
        raise AcceptanceFailure("normalization check failed")


COMMANDS = {
    "simulate-implicit-max": cmd_simulate_implicit_max,
    "simulate-limit-law": cmd_simulate_limit_law,
    "simulate-order-stats": cmd_simulate_order_stats,
    "estimate-tilt": cmd_estimate_tilt,
    "test-convergence": cmd_test_convergence,
    "check-normalization": cmd_check_normalization,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="implicit-extremes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", help="output file (default: standard output)")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--block-size", type=int)
        p.add_argument("--replicates", type=int)
        p.add_argument("--top-m", type=int)
        p.add_argument("--mc-size", type=int)
        p.add_argument("--normalization", choices=["theoretical", "empirical-quantile"])
        if name == "estimate-tilt":
            p.add_argument("--functional", default="indicator-exceed",
                           choices=["indicator-exceed", "capped-loss", "capped-power", "indicator-box"])
            p.add_argument("--threshold", type=float)
            p.add_argument("--cap", type=float)
            p.add_argument("--power", type=float)
            p.add_argument("--lower", help="comma-separated lower corner")
            p.add_argument("--upper", help="comma-separated upper corner")
            p.add_argument("--compare-direct", action="store_true")
        if name in ("simulate-implicit-max", "test-convergence"):
            p.add_argument("--pilot-factor", type=int, default=10,
                           help="pilot size, in blocks, for the empirical-quantile normalization")
        if name == "test-convergence":
            p.add_argument("--slack", type=float, default=DEFAULT_SLACK,
                           help="added to the 1%% KS critical value for finite-n bias")
    return parser


def _diagnose(kind, exc, code, details=None):
    payload = {"error": kind, "message": str(exc), "exit_code": code}
    if details:
        payload["details"] = details
    sys.stderr.write(json.dumps(payload, default=str) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = None
    try:
        exp = Experiment(args)
        out = _open_out(args.out)
        COMMANDS[args.command](exp, args, out)
        return EXIT_OK
    except (ConfigError, ParseError, LossValidationError, UnsupportedSamplerError) as exc:
        return _diagnose("config error", exc, EXIT_CONFIG)
    except DivergentNormalizationError as exc:
        return _diagnose("divergent normalization", exc, EXIT_SENTINEL, exc.diagnostics)
    except DegenerateBlockError as exc:
        return _diagnose("degenerate block", exc, EXIT_SENTINEL, {"replicates": list(exc.replicates)})
    except AcceptanceFailure as exc:
        return _diagnose("acceptance test failed", exc, EXIT_FAILED)
    except ValueError as exc:
        return _diagnose("config error", exc, EXIT_CONFIG)
    finally:
        if out is not None and out is not sys.stdout:
            out.close()


if __name__ == "__main__":
    sys.exit(main())
