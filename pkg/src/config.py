from __future__ import annotations

# JSON run configuration: model parameters plus simulation and Monte Carlo options, and seed resolution.

import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from src.model_core import (
    DEFAULT_MAX_ORDER,
    MODEL_KINDS,
    CumulantSpec,
    ModelParams,
    ModelSpec,
)
from src.simulator import DEFAULT_SUBGRID

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "BNS_SEED"
DEFAULT_BINS = 40
DEFAULT_WORKERS = 1

_SHARED_KEYS = ("lambda", "mu", "beta", "rho", "delta_t")
_MODEL_KEYS = {
    "generic": ("zeta", "eta") + _SHARED_KEYS,
    "gamma_ou": ("nu", "alpha") + _SHARED_KEYS,
    "ig_ou": ("delta_ig", "gamma_ig") + _SHARED_KEYS,
}


class ConfigError(ValueError):
    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(message)


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec
    n: Optional[int] = None
    seed: Optional[int] = None
    subgrid: int = DEFAULT_SUBGRID
    v0: Optional[float] = None
    replications: Optional[int] = None
    length: Optional[int] = None
    bins: int = DEFAULT_BINS
    workers: int = DEFAULT_WORKERS


def _number(raw: Mapping[str, Any], key: str) -> float:
    if key not in raw:
        raise ConfigError(f"Missing config key '{key}'.", key=key)
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"Config key '{key}' must be a finite number, got {value!r}.", key=key)
    return float(value)


def _optional_int(raw: Mapping[str, Any], key: str, default: Optional[int], minimum: int) -> Optional[int]:
    if raw.get(key) is None:
        return default
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"Config key '{key}' must be an integer, got {value!r}.", key=key)
    if value < minimum:
        raise ConfigError(f"Config key '{key}' must be at least {minimum}, got {value}.", key=key)
    return value


def model_from_dict(raw: Mapping[str, Any]) -> ModelSpec:
    kind = raw.get("model")
    if kind is None:
        raise ConfigError("Missing config key 'model'.", key="model")
    if kind not in MODEL_KINDS:
        raise ConfigError(f"Unknown model '{kind}'. Expected one of {', '.join(MODEL_KINDS)}.", key="model")

    values = {key: _number(raw, key) for key in _MODEL_KEYS[kind]}
    max_order = _optional_int(raw, "max_order", DEFAULT_MAX_ORDER, minimum=2)
    shared = {
        "lam": values["lambda"],
        "mu": values["mu"],
        "beta": values["beta"],
        "rho": values["rho"],
        "delta_t": values["delta_t"],
    }
    try:
        if kind == "gamma_ou":
            return ModelSpec.gamma_ou(nu=values["nu"], alpha=values["alpha"], max_order=max_order, **shared)
        if kind == "ig_ou":
            return ModelSpec.ig_ou(
                delta_ig=values["delta_ig"], gamma_ig=values["gamma_ig"], max_order=max_order, **shared
            )
        params = ModelParams(zeta=values["zeta"], eta=values["eta"], **shared)
        cumulants = None
        if raw.get("cumulants") is not None:
            listed = raw["cumulants"]
            if not isinstance(listed, list):
                raise ConfigError("Config key 'cumulants' must be a list of numbers.", key="cumulants")
            cumulants = CumulantSpec(tuple(listed))
        return ModelSpec.generic(params, cumulants)
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(f"Invalid model parameters: {err}") from err


def model_to_dict(model: ModelSpec) -> dict:
    out = {"model": model.kind}
    if model.kind == "gamma_ou":
        out.update(nu=model.law.nu, alpha=model.law.alpha)
    elif model.kind == "ig_ou":
        out.update(delta_ig=model.law.delta_ig, gamma_ig=model.law.gamma_ig)
    out.update(model.params.as_dict())
    if model.kind == "generic" and model.cumulants is not None:
        out["cumulants"] = list(model.cumulants.cumulants)
    return out


def parse_config(raw: Mapping[str, Any]) -> RunConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("Config must be a JSON object.")
    model = model_from_dict(raw)
    seed = _optional_int(raw, "seed", None, minimum=0)
    v0 = raw.get("v0")
    if v0 is not None:
        v0 = _number(raw, "v0")
        if v0 < 0:
            raise ConfigError(f"Config key 'v0' must be nonnegative, got {v0}.", key="v0")
    return RunConfig(
        model=model,
        n=_optional_int(raw, "n", None, minimum=1),
        seed=seed,
        subgrid=_optional_int(raw, "subgrid", DEFAULT_SUBGRID, minimum=1),
        v0=v0,
        replications=_optional_int(raw, "replications", None, minimum=1),
        length=_optional_int(raw, "length", None, minimum=2),
        bins=_optional_int(raw, "bins", DEFAULT_BINS, minimum=1),
        workers=_optional_int(raw, "workers", DEFAULT_WORKERS, minimum=1),
    )


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as err:
        raise ConfigError(f"Config file '{path}' not found.") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"Config file '{path}' is not valid JSON: {err}") from err
    return parse_config(raw)


def resolve_seed(
    flag: Optional[int], config_seed: Optional[int], environ: Optional[Mapping[str, str]] = None
) -> int:
    """--seed flag, then config 'seed', then the BNS_SEED environment variable."""
    if flag is not None:
        return _check_seed(flag, "--seed")
    if config_seed is not None:
        return _check_seed(config_seed, "seed")
    env = os.environ if environ is None else environ
    raw = env.get(SEED_ENV_VAR)
    if raw is None or not raw.strip():
        raise ConfigError(f"No seed given: pass --seed, set 'seed' in the config or {SEED_ENV_VAR}.", key="seed")
    try:
        value = int(raw.strip(), 0)
    except ValueError as err:
        raise ConfigError(f"{SEED_ENV_VAR}={raw!r} is not an integer.", key="seed") from err
    logger.info("Using seed %s from %s", value, SEED_ENV_VAR)
    return _check_seed(value, SEED_ENV_VAR)


def _check_seed(value: int, source: str) -> int:
    if not 0 <= int(value) < 2**64:
        raise ConfigError(f"Seed from {source} must be an unsigned 64-bit integer, got {value}.", key="seed")
    return int(value)
