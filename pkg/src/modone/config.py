"""Experiment configuration: a single JSON document per run, validated up front.

Common keys::

    experiment   optional; must match the subcommand when present
    M_list       list of positive integers
    N            positive integer (Monte Carlo replications per M)
    seed         integer in [0, 2**64)
    output_path  default output directory (``--out`` wins)

Experiment-specific keys are listed in :data:`SCHEMAS`; their values are
parsed into typed objects in :attr:`ExperimentConfig.params`.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .benford import ProductModel
from .errors import ContractError, ModoneError, SingularityError
from .model import JointLaw, ModelSpec, PhiSpec, phi_eval
from .resampling import ResamplingModel

SEED_ENV = "MODONE_SEED"

EXPERIMENTS = ("simulate", "uniformity", "joint-limit", "tv-clt", "density-sweep", "benford",
               "resample-variance", "integrability")

COMMON = {"experiment", "M_list", "N", "seed", "output_path"}

# experiment -> (required keys, optional keys with defaults)
SCHEMAS = {
    "simulate": ({"model", "M_list", "N", "seed"}, {}),
    "uniformity": ({"model", "M_list", "N", "seed"},
                   {"ks_threshold": None, "cells_per_axis": 8, "chi_level": 0.999}),
    "joint-limit": ({"model", "M_list", "N", "seed"},
                    {"ks_threshold": None, "cells_per_axis": 8, "chi_level": 0.999,
                     "weyl_k": 3, "weyl_u": [0.0, 1.0, 2.5], "variance_rtol": 0.05,
                     "standardized": True, "cov_z": 5.0, "tv_threshold": 0.03}),
    "tv-clt": ({"law", "M_list", "N", "seed"}, {"tv_threshold": 0.03, "slack": 0.10}),
    "density-sweep": ({"scene", "M_list"},
                      {"grid_points": 11, "width_sd": 3.0, "threshold": 1e-2, "slack": 0.10,
                       "seed": 0, "N": 1}),
    "benford": ({"product", "M_list", "N", "seed"},
                {"base": 10.0, "beta": 2.0, "variants": ["fixed", "adapted"],
                 "ks_threshold": None, "dataset": None}),
    "resample-variance": ({"resampling", "M_list", "N", "seed"},
                          {"z": 3.0, "phase_alpha": None}),
    "integrability": ({"phi", "center", "exponent", "M_tilde_max"},
                      {"seed": 0, "N": 1, "M_list": [1]}),
}


class ConfigError(ContractError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    M_list: list
    N: int
    seed: int
    output_path: str | None
    params: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _positive_int(name, v):
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ConfigError(f"{name} must be a positive integer, got {v!r}")
    return v


def _seed(v, origin="seed"):
    if isinstance(v, str):
        try:
            v = int(v, 0)
        except ValueError:
            raise ConfigError(f"{origin} must be an integer, got {v!r}") from None
    if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v < 2**64:
        raise ConfigError(f"{origin} must be an integer in [0, 2**64), got {v!r}")
    return v


def resolve_seed(cli_seed, config_seed) -> int:
    """``--seed`` beats ``MODONE_SEED``, which beats the config file."""
    if cli_seed is not None:
        return _seed(cli_seed, "--seed")
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        return _seed(env, SEED_ENV)
    return _seed(config_seed)


def _scene(d):
    if not isinstance(d, dict):
        raise ConfigError("scene must be an object")
    if "model" in d:
        return {"model": ModelSpec.from_dict(d["model"])}
    need = {"q", "eta", "Sigma1", "phi"}
    missing = need - set(d)
    if missing:
        raise ConfigError(f"scene: missing keys {sorted(missing)}")
    extra = set(d) - need - {"rate_bound"}
    if extra:
        raise ConfigError(f"scene: unknown keys {sorted(extra)}")
    q = _positive_int("scene.q", d["q"])
    eta = np.asarray(d["eta"], dtype=float)
    S1 = np.asarray(d["Sigma1"], dtype=float)
    if eta.shape != (q + 2,) or S1.shape != (q + 2, q + 2):
        raise ConfigError(f"scene: eta needs {q + 2} entries and Sigma1 shape ({q + 2}, {q + 2})")
    out = {"q": q, "eta": eta, "Sigma1": S1, "phi": PhiSpec.from_dict(d["phi"])}
    if "rate_bound" in d:
        out["rate_bound"] = float(d["rate_bound"])
    return out


def parse_config(raw: dict, experiment: str, *, cli_seed=None) -> ExperimentConfig:
    """Validate ``raw`` for ``experiment``; every error raises :class:`ContractError`."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    declared = raw.get("experiment")
    if declared is not None and declared != experiment:
        raise ConfigError(f"config declares experiment {declared!r} but {experiment!r} was requested")
    required, optional = SCHEMAS[experiment]
    missing = required - set(raw)
    if missing:
        raise ConfigError(f"missing keys {sorted(missing)}")
    unknown = set(raw) - required - set(optional) - COMMON
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    merged = {**optional, **raw}

    M_list = merged.get("M_list", [1])
    if not isinstance(M_list, list) or not M_list:
        raise ConfigError("M_list must be a non-empty list of positive integers")
    M_list = [_positive_int("M_list entry", m) for m in M_list]
    N = _positive_int("N", merged.get("N", 1))
    seed = resolve_seed(cli_seed, merged.get("seed", 0))

    params = {}
    try:
        for key in set(required) | set(optional):
            if key in ("M_list", "N", "seed"):
                continue
            v = merged[key]
            if key == "model":
                v = ModelSpec.from_dict(v)
            elif key == "law":
                v = JointLaw.from_dict(v)
            elif key == "phi":
                v = PhiSpec.from_dict(v)
            elif key == "product":
                if not isinstance(v, dict) or {"base", "beta"} & set(v):
                    raise ConfigError("product describes the factor law only; set base and beta at top level")
                v = ProductModel.from_dict({**v, "base": None})
            elif key == "resampling":
                v = ResamplingModel(**v)
            elif key == "scene":
                v = _scene(v)
            params[key] = v
    except ModoneError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None

    _check_experiment_params(experiment, params)
    return ExperimentConfig(experiment, M_list, N, seed, merged.get("output_path"), params, raw)


def _check_experiment_params(experiment, p):
    if "model" in p:
        try:
            value = phi_eval(p["model"].phi, p["model"].anchor)
        except SingularityError:
            value = 0.0
        if value == 0.0:
            raise ConfigError("phi must be finite and non-zero at the anchor beta^{q+1} m_Y")
    if experiment == "joint-limit" and p["standardized"]:
        try:
            np.linalg.cholesky(p["model"].law.cov)
        except np.linalg.LinAlgError:
            raise ConfigError("standardized checks need a positive definite covariance of (Y, Z); "
                              "set standardized to false for this law") from None
    if experiment == "integrability":
        _positive_int("M_tilde_max", p["M_tilde_max"])
        _positive_int("exponent", p["exponent"])
        if not isinstance(p["center"], (int, float)):
            raise ConfigError("center must be a number")
    if experiment == "benford":
        bad = set(p["variants"]) - {"fixed", "adapted"}
        if bad or not p["variants"]:
            raise ConfigError(f"benford variants must be drawn from fixed/adapted, got {p['variants']}")
        if "fixed" in p["variants"]:
            ProductModel(base=p["base"])  # validates base > 1
        if not p["beta"] > 0:
            raise ConfigError("beta must be positive")
    for key in ("cells_per_axis", "weyl_k", "grid_points"):
        if key in p:
            _positive_int(key, p[key])


def load_config(path, experiment: str, *, cli_seed=None) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(raw, experiment, cli_seed=cli_seed)
