from __future__ import annotations

import pytest

from src.config import (
    ConfigError,
    load_config,
    model_from_dict,
    model_to_dict,
    parse_config,
    resolve_seed,
)
from src.model_core import DEFAULT_MAX_ORDER
from src.simulator import DEFAULT_SUBGRID

DAILY_SETTINGS = {
    "model": "gamma_ou",
    "nu": 2.56,
    "alpha": 64.0,
    "lambda": 256.0,
    "mu": 1.2,
    "beta": -0.5,
    "rho": -0.1,
    "delta_t": 1 / 250,
}


def test_gamma_config_defaults(daily_config_file, daily_model):
    cfg = load_config(daily_config_file())
    assert cfg.model.kind == "gamma_ou"
    assert cfg.model.params == daily_model.params
    assert cfg.model.cumulants.max_order == DEFAULT_MAX_ORDER
    assert cfg.seed is None and cfg.n is None
    assert cfg.subgrid == DEFAULT_SUBGRID
    assert (cfg.bins, cfg.workers) == (40, 1)


def test_run_options_are_read(daily_config_file):
    cfg = load_config(daily_config_file(seed=9, n=500, replications=20, v0=0.05, workers=2, subgrid=8))
    assert (cfg.seed, cfg.n, cfg.replications, cfg.workers, cfg.subgrid) == (9, 500, 20, 2, 8)
    assert cfg.v0 == 0.05


def test_ig_config():
    raw = dict(DAILY_SETTINGS, model="ig_ou", delta_ig=2.56, gamma_ig=8.0)
    del raw["nu"], raw["alpha"]
    model = model_from_dict(raw)
    assert model.kind == "ig_ou"
    assert model.params.zeta == pytest.approx(0.32)
    assert model.params.eta == pytest.approx(2.56 / 8.0**3)


def test_generic_config_with_and_without_cumulants():
    base = {
        "model": "generic",
        "zeta": 0.04,
        "eta": 6.25e-4,
        "lambda": 256.0,
        "mu": 1.2,
        "beta": -0.5,
        "rho": -0.1,
        "delta_t": 0.004,
    }
    assert model_from_dict(base).cumulants is None
    model = model_from_dict(dict(base, cumulants=[0.04, 6.25e-4, 1e-5, 1e-6]))
    assert model.cumulants.max_order == 4
    with pytest.raises(ConfigError) as info:
        model_from_dict(dict(base, cumulants="lots"))
    assert info.value.key == "cumulants"


@pytest.mark.parametrize("key", ["alpha", "lambda", "delta_t"])
def test_missing_key_is_named(daily_config_file, key):
    with pytest.raises(ConfigError) as info:
        load_config(daily_config_file(**{key: None}))
    assert info.value.key == key
    assert f"'{key}'" in str(info.value)


def test_unknown_model():
    with pytest.raises(ConfigError, match="Unknown model 'heston'") as info:
        model_from_dict(dict(DAILY_SETTINGS, model="heston"))
    assert info.value.key == "model"


@pytest.mark.parametrize(
    "override, key",
    [({"nu": "big"}, "nu"), ({"beta": True}, "beta"), ({"n": 2.5}, "n"), ({"seed": -1}, "seed"), ({"v0": -0.1}, "v0")],
)
def test_bad_values_are_named(daily_config_file, override, key):
    with pytest.raises(ConfigError) as info:
        load_config(daily_config_file(**override))
    assert info.value.key == key


def test_invalid_parameters_become_config_errors():
    with pytest.raises(ConfigError, match="Invalid model parameters"):
        model_from_dict(dict(DAILY_SETTINGS, alpha=-1.0))


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{model: gamma", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(broken)
    with pytest.raises(ConfigError, match="JSON object"):
        parse_config([1, 2, 3])


def test_model_dict_roundtrip(daily_model, ig_model):
    for model in (daily_model, ig_model):
        back = model_from_dict(model_to_dict(model))
        assert back.kind == model.kind
        assert back.params.as_tuple() == pytest.approx(model.params.as_tuple(), rel=1e-14)


def test_seed_precedence():
    env = {"BNS_SEED": "77"}
    assert resolve_seed(5, 6, env) == 5
    assert resolve_seed(None, 6, env) == 6
    assert resolve_seed(None, None, env) == 77
    assert resolve_seed(None, None, {"BNS_SEED": "0x10"}) == 16


def test_missing_or_bad_seed():
    with pytest.raises(ConfigError, match="No seed") as info:
        resolve_seed(None, None, {})
    assert info.value.key == "seed"
    with pytest.raises(ConfigError, match="not an integer"):
        resolve_seed(None, None, {"BNS_SEED": "abc"})
    with pytest.raises(ConfigError, match="unsigned 64-bit"):
        resolve_seed(-3, None, {})
