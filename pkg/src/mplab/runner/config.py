"""Experiment configuration: one frozen dataclass, loaded from JSON or flags."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from mplab.analytic import TailBoundParams
from mplab.errors import ConfigError, DomainError

SUITES = ("triangle", "sums", "normality", "identity", "smallball", "moments")
FORMATS = ("json", "csv")
PATHS = ("fast", "slow")
SEED_MAX = 2**64 - 1

# Pilot-derived pass thresholds; overridable per config.
DEFAULT_THRESHOLDS = {
    "triangle": {"median_ks": 0.10, "doubling_paired_fraction": 0.75, "informational_below": 64},
    "sums": {"min_r2": 0.95, "min_tail_count": 30, "grid_points": 12},
    "normality": {
        "marginal_ks": 0.06,
        "marginal_ks_slow": 0.08,
        "max_offdiag_corr": 0.1,
        "mahalanobis_ks": 0.06,
        "cov_ratio": 4.0,
    },
    "identity": {
        "det_rel": 1e-7,
        "wedge": 1e-8,
        "ks_alpha": 0.001,
        "majorization": 1e-8,
        "orthogonality": 1e-10,
    },
    "smallball": {"slope_slack": 0.2, "min_events": 5, "min_points": 2},
    "moments": {"max_ratio": 2.0},
}

# Suites whose trial count is bounded below.
_MIN_TRIALS = {"normality": 500, "moments": 1000}


@dataclass(frozen=True)
class ExperimentConfig:
    suite: str
    n: int | None = None
    N: int | None = None
    k: int | None = None
    m: int | None = None
    p: float | None = None
    trials: int = 1
    master_seed: int = 0
    threads: int = 1
    bound_constants: TailBoundParams = field(default_factory=TailBoundParams)
    output_path: str | None = None
    output_format: str = "json"
    path: str = "fast"
    doubling: bool = False
    thresholds: dict = field(default_factory=dict)

    def __post_init__(self):
        validate(self)

    def threshold(self, name):
        if name in self.thresholds:
            return self.thresholds[name]
        return DEFAULT_THRESHOLDS[self.suite][name]

    def resolved_k(self) -> int:
        """k with the suite default filled in."""
        if self.k is not None:
            return self.k
        if self.suite == "moments":
            return math.ceil(self.n / 2)
        if self.suite == "identity":
            return min(3, self.n)
        return 1

    def resolved_m(self) -> int:
        return 1 if self.m is None else self.m

    def resolved_p(self) -> float:
        return float(self.resolved_k()) if self.p is None else float(self.p)

    def echo(self) -> dict:
        """Config fields that determine the results (threads and output excluded)."""
        out = {
            "suite": self.suite,
            "n": self.n,
            "N": self.N,
            "k": self.resolved_k(),
            "m": self.resolved_m() if self.suite == "sums" else self.m,
            "p": self.resolved_p() if self.suite == "moments" else self.p,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "bound_constants": dataclasses.asdict(self.bound_constants),
            "path": self.path,
            "doubling": self.doubling,
            "thresholds": {**DEFAULT_THRESHOLDS[self.suite], **self.thresholds},
        }
        return out


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


_REQUIRED = {
    "triangle": ("n", "N"),
    "sums": ("n", "N", "k"),
    "normality": ("n", "N", "k"),
    "identity": ("n", "N"),
    "smallball": ("n", "k"),
    "moments": ("n",),
}


def validate(cfg: ExperimentConfig) -> None:
    if cfg.suite not in SUITES:
        raise ConfigError(f"unknown suite {cfg.suite!r}; expected one of {', '.join(SUITES)}")
    for name in ("n", "N", "k", "m"):
        v = getattr(cfg, name)
        if v is not None and (not _is_int(v) or v < 1):
            raise ConfigError(f"{name} must be a positive integer, got {v!r}")
    for name in _REQUIRED[cfg.suite]:
        if getattr(cfg, name) is None:
            raise ConfigError(f"suite {cfg.suite!r} requires {name}")
    if not _is_int(cfg.trials) or cfg.trials < 1:
        raise ConfigError(f"trials must be a positive integer, got {cfg.trials!r}")
    need = _MIN_TRIALS.get(cfg.suite, 1)
    if cfg.trials < need:
        raise ConfigError(f"suite {cfg.suite!r} needs at least {need} trials, got {cfg.trials}")
    if not _is_int(cfg.master_seed) or not 0 <= cfg.master_seed <= SEED_MAX:
        raise ConfigError(f"master_seed must be a 64-bit unsigned integer, got {cfg.master_seed!r}")
    if not _is_int(cfg.threads) or cfg.threads < 1:
        raise ConfigError(f"threads must be a positive integer, got {cfg.threads!r}")
    if cfg.output_format not in FORMATS:
        raise ConfigError(f"output_format must be json or csv, got {cfg.output_format!r}")
    if cfg.path not in PATHS:
        raise ConfigError(f"path must be fast or slow, got {cfg.path!r}")
    if not isinstance(cfg.bound_constants, TailBoundParams):
        raise ConfigError("bound_constants must be TailBoundParams")
    if not isinstance(cfg.thresholds, dict):
        raise ConfigError("thresholds must be a mapping")
    unknown = set(cfg.thresholds) - set(DEFAULT_THRESHOLDS[cfg.suite])
    if unknown:
        raise ConfigError(f"unknown thresholds for {cfg.suite}: {sorted(unknown)}")
    n = cfg.n
    k = cfg.resolved_k()
    if k > n:
        raise ConfigError(f"need k <= n, got k={k}, n={n}")
    if cfg.suite == "sums" and cfg.resolved_m() > k:
        raise ConfigError(f"need m <= k, got m={cfg.m}, k={k}")
    if cfg.suite == "moments":
        p = cfg.resolved_p()
        if not 0 < p <= k * n:
            raise ConfigError(f"p must lie in (0, k*n], got {p}")


_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def from_mapping(data: dict, /, **overrides) -> ExperimentConfig:
    """Build a config from a JSON-style mapping; unknown keys are rejected."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    unknown = set(merged) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    bc = merged.get("bound_constants")
    if isinstance(bc, dict):
        try:
            merged["bound_constants"] = TailBoundParams(**bc)
        except (TypeError, DomainError) as exc:
            raise ConfigError(f"bad bound_constants: {exc}") from exc
    elif isinstance(bc, (list, tuple)):
        try:
            merged["bound_constants"] = TailBoundParams(*bc)
        except (TypeError, DomainError) as exc:
            raise ConfigError(f"bad bound_constants: {exc}") from exc
    if "suite" not in merged:
        raise ConfigError("config needs a suite")
    return ExperimentConfig(**merged)


def load_config(source, /, **overrides) -> ExperimentConfig:
    try:
        data = json.loads(Path(source).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {source}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {source} is not valid JSON: {exc}") from exc
    return from_mapping(data, **overrides)
