"""Experiment configuration documents: parsing, validation, digests.

A config is a single JSON object. Unknown keys are rejected so a typo in
an experiment definition fails loudly instead of silently running with a
default. The same document drives simulations (truth simulated from the
pool) and live campaigns (truth external, sigma supplied explicitly).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Optional

import numpy as np

from .benchmarks import PriorSpec, build_model
from .harness import TRUTH_MODES, ExperimentConfig
from .policies import DEFAULT_SCORE_TOL, PolicyKind, QuadratureSpec
from .resampler import ResampleConfig, default_small_pool_size

__all__ = ["ConfigError", "canonical_json", "config_digest", "load_config_file", "parse_config"]


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists one message per problem."""

    def __init__(self, errors):
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        super().__init__("; ".join(self.errors))


_TOP_LEVEL_KEYS = {
    "model",
    "prior",
    "candidates",
    "budget",
    "policy",
    "noise_level",
    "sigma",
    "quadrature",
    "resample",
    "truth_mode",
    "replications",
    "seed",
    "seeds",
    "score_tol",
}

_POLICY_VALUES = [p.value for p in PolicyKind]


def load_config_file(path) -> dict:
    """Read and parse a JSON config file; parse errors carry line/column."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}:1:1: top-level value must be a JSON object")
    return doc


def _require(doc: dict, key: str, errors: list[str]):
    if key not in doc:
        errors.append(f"missing required key '{key}'")
        return None
    return doc[key]


def _as_int(value, key: str, errors: list[str], minimum: Optional[int] = None) -> Optional[int]:
    if not isinstance(value, int) or isinstance(value, bool):
        errors.append(f"'{key}' must be an integer")
        return None
    if minimum is not None and value < minimum:
        errors.append(f"'{key}' must be >= {minimum}")
        return None
    return value


def _as_number(value, key: str, errors: list[str]) -> Optional[float]:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"'{key}' must be a number")
        return None
    return float(value)


def _parse_prior(section, errors: list[str]) -> Optional[PriorSpec]:
    if not isinstance(section, dict):
        errors.append("'prior' must be an object")
        return None
    unknown = set(section) - {"ranges", "pool_size", "seed"}
    if unknown:
        errors.append(f"unknown key(s) in 'prior': {', '.join(sorted(unknown))}")
        return None
    try:
        return PriorSpec(
            ranges=np.asarray(section.get("ranges"), dtype=np.float64),
            pool_size=int(section.get("pool_size", 0)),
            seed=int(section.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"'prior': {exc}")
        return None


def _parse_quadrature(section, errors: list[str]) -> Optional[QuadratureSpec]:
    if section is None:
        return QuadratureSpec()
    if not isinstance(section, dict):
        errors.append("'quadrature' must be an object")
        return None
    unknown = set(section) - {"scheme", "order", "grid_halfwidth"}
    if unknown:
        errors.append(f"unknown key(s) in 'quadrature': {', '.join(sorted(unknown))}")
        return None
    try:
        return QuadratureSpec(
            scheme=section.get("scheme", "gauss-hermite"),
            order=int(section.get("order", 32)),
            grid_halfwidth=float(section.get("grid_halfwidth", 8.0)),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"'quadrature': {exc}")
        return None


def _parse_resample(section, pool_size: Optional[int], errors: list[str]):
    """Absent section disables resampling; an (even empty) object enables it."""
    if section is None:
        return None
    if not isinstance(section, dict):
        errors.append("'resample' must be an object or omitted")
        return None
    unknown = set(section) - {
        "enabled",
        "period",
        "epsilon",
        "small_pool_size",
        "min_removal",
        "max_iterations",
    }
    if unknown:
        errors.append(f"unknown key(s) in 'resample': {', '.join(sorted(unknown))}")
        return None
    if section.get("enabled", True) is False:
        return None
    default_r = default_small_pool_size(pool_size) if pool_size else 50
    try:
        return ResampleConfig(
            period=int(section.get("period", 5)),
            epsilon=float(section.get("epsilon", 1e-3)),
            small_pool_size=int(section.get("small_pool_size", default_r)),
            min_removal=int(section.get("min_removal", 1)),
            max_iterations=int(section.get("max_iterations", 25)),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"'resample': {exc}")
        return None


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a config document and build the experiment description.

    Raises ConfigError carrying every detected problem, not just the first.
    """
    errors: list[str] = []
    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        errors.append(f"unknown key(s): {', '.join(sorted(unknown))}")

    model_section = _require(doc, "model", errors)
    model = alternatives = None
    if model_section is not None:
        if not isinstance(model_section, dict) or "name" not in model_section:
            errors.append("'model' must be an object with a 'name'")
        else:
            params = {k: v for k, v in model_section.items() if k != "name"}
            try:
                model, alternatives = build_model(model_section["name"], params)
            except ValueError as exc:
                errors.append(f"'model': {exc}")

    prior = None
    prior_section = _require(doc, "prior", errors)
    if prior_section is not None:
        prior = _parse_prior(prior_section, errors)

    candidates = _as_int(_require(doc, "candidates", errors), "candidates", errors, minimum=1)
    budget = _as_int(_require(doc, "budget", errors), "budget", errors, minimum=1)

    policy = None
    policy_raw = _require(doc, "policy", errors)
    if policy_raw is not None:
        try:
            policy = PolicyKind(policy_raw)
        except ValueError:
            errors.append(
                f"unknown policy '{policy_raw}'; valid values: {', '.join(_POLICY_VALUES)}"
            )

    noise_level = sigma = None
    if "noise_level" in doc:
        noise_level = _as_number(doc["noise_level"], "noise_level", errors)
    if "sigma" in doc:
        sigma = _as_number(doc["sigma"], "sigma", errors)
    if noise_level is None and sigma is None:
        errors.append("one of 'noise_level' or 'sigma' is required")

    quadrature = _parse_quadrature(doc.get("quadrature"), errors)
    resample = _parse_resample(
        doc.get("resample"), prior.pool_size if prior else None, errors
    )

    truth_mode = doc.get("truth_mode", "from-pool")
    if truth_mode not in TRUTH_MODES:
        errors.append(f"'truth_mode' must be one of {', '.join(TRUTH_MODES)}")
    elif truth_mode == "external" and sigma is None:
        errors.append("truth_mode 'external' requires an explicit 'sigma'")

    replications = doc.get("replications", 1)
    replications = _as_int(replications, "replications", errors, minimum=1)
    seed = _as_int(doc.get("seed", 0), "seed", errors, minimum=0)
    seeds = None
    if "seeds" in doc:
        raw = doc["seeds"]
        if not isinstance(raw, list) or not all(
            isinstance(s, int) and not isinstance(s, bool) for s in raw
        ):
            errors.append("'seeds' must be a list of integers")
        else:
            seeds = tuple(int(s) for s in raw)
    score_tol = doc.get("score_tol", DEFAULT_SCORE_TOL)
    score_tol = _as_number(score_tol, "score_tol", errors)

    if errors:
        raise ConfigError(errors)

    try:
        return ExperimentConfig(
            model=model,
            alternatives=alternatives,
            prior=prior,
            n_candidates=candidates,
            budget=budget,
            policy=policy,
            noise_level=noise_level,
            sigma=sigma,
            quadrature=quadrature,
            resample=resample,
            truth_mode=truth_mode,
            replications=replications,
            base_seed=seed,
            seeds=seeds,
            score_tol=score_tol,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def canonical_json(doc: dict) -> str:
    """Key-order-independent serialization used for digests and round-trips."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_digest(doc: dict) -> str:
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()
