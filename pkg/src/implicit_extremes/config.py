"""Experiment configuration: JSON file, environment fallback and flag overrides."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, replace

from .expressions import ParseError, parse_loss_expr
from .geometry import (
    LossFunction,
    LossValidationError,
    elliptical,
    euclidean,
    geometric_mean,
    harmonic,
    lp_norm,
    min_loss,
    weighted_sum,
)

SEED_ENV = "IMPLICIT_EXTREMES_SEED"
REQUIRED_KEYS = ("dimension", "loss", "model")
OPTIONAL_KEYS = ("block_size", "replicates", "top_m", "seed", "normalization", "mc_size", "workers")
NORMALIZATIONS = ("theoretical", "empirical-quantile")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    dimension: int
    loss: object  # name, expression string or {"name"/"expression": ...}
    model: dict
    block_size: int = 1000
    replicates: int = 1000
    top_m: int = 1
    seed: int | None = None
    normalization: str = "theoretical"
    mc_size: int = 100_000
    workers: int = 1

    def __post_init__(self):
        checks = [
            (isinstance(self.dimension, int) and self.dimension >= 1, "dimension must be an integer >= 1"),
            (isinstance(self.block_size, int) and self.block_size >= 1, "block_size must be an integer >= 1"),
            (isinstance(self.replicates, int) and self.replicates >= 1, "replicates must be an integer >= 1"),
            (isinstance(self.top_m, int) and 1 <= self.top_m, "top_m must be an integer >= 1"),
            (isinstance(self.mc_size, int) and self.mc_size >= 10, "mc_size must be an integer >= 10"),
            (isinstance(self.workers, int) and self.workers >= 1, "workers must be an integer >= 1"),
            (self.normalization in NORMALIZATIONS, f"normalization must be one of {NORMALIZATIONS}"),
            (isinstance(self.model, dict) and "kind" in self.model, 'model must be an object with a "kind"'),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        if self.top_m > self.block_size:
            raise ConfigError(f"top_m = {self.top_m} exceeds block_size = {self.block_size}")
        if self.seed is not None and not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(data) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        missing = [k for k in REQUIRED_KEYS if k not in data]
        if missing:
            raise ConfigError(f"missing config keys: {missing}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form, excluding the worker count."""
        d = self.to_dict()
        d.pop("workers")
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def build_loss(self) -> LossFunction:
        try:
            f = parse_loss(self.loss, self.dimension)
        except (ParseError, LossValidationError) as exc:
            raise ConfigError(f"invalid loss: {exc}") from exc
        if f.dimension != self.dimension:
            raise ConfigError(f"loss has dimension {f.dimension}, config says {self.dimension}")
        return f


_NAMED = {
    "harmonic": harmonic,
    "euclidean": euclidean,
    "min": min_loss,
    "geometric-mean": geometric_mean,
}


def parse_loss(spec, dimension: int) -> LossFunction:
    """Named family (string or object with parameters) or a loss expression."""
    if isinstance(spec, str):
        if spec in _NAMED:
            return _NAMED[spec](dimension)
        return parse_loss_expr(spec, dimension).as_loss(validate=False)
    if not isinstance(spec, dict):
        raise ConfigError("loss must be a string or an object")
    if "expression" in spec:
        f = parse_loss_expr(spec["expression"], dimension).as_loss(validate=False)
    else:
        name = spec.get("name")
        if name in _NAMED:
            f = _NAMED[name](dimension)
        elif name == "lp-norm":
            f = lp_norm(dimension, float(spec["p"]))
        elif name == "weighted-sum":
            f = weighted_sum(spec["weights"])
        elif name == "elliptical":
            f = elliptical(spec["matrix"])
        else:
            raise ConfigError(f"unknown loss family {name!r}")
    if "scale" in spec:
        f = f.scaled(float(spec["scale"]))
    return f


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def resolve_config(data: dict, overrides: dict | None = None, environ=None) -> ExperimentConfig:
    """Merge sources with precedence flags > environment > config file."""
    environ = os.environ if environ is None else environ
    merged = dict(data)
    env_seed = environ.get(SEED_ENV)
    if env_seed not in (None, ""):
        try:
            merged["seed"] = int(env_seed, 0)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env_seed!r}") from None
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    cfg = ExperimentConfig.from_dict(merged)
    if cfg.seed is None:
        raise ConfigError(f"no seed: give --seed, set {SEED_ENV} or add \"seed\" to the config")
    return cfg


def with_overrides(cfg: ExperimentConfig, **kwargs) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kwargs.items() if v is not None})
