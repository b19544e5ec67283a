from __future__ import annotations

import json

import numpy as np
import pytest

from src.model_core import CumulantSpec, ModelParams, ModelSpec
from src.moment_engine import MomentEngine

DELTA_T = 1 / 250

# daily observations, stationary variance mean 0.04, about 2.6 jumps per day
DAILY_SETTINGS = {
    "model": "gamma_ou",
    "nu": 2.56,
    "alpha": 64.0,
    "lambda": 256.0,
    "mu": 1.2,
    "beta": -0.5,
    "rho": -0.1,
    "delta_t": DELTA_T,
}

# (lambda, zeta, eta, mu, beta, rho) box used for random parameter draws
THETA_BOX = (
    (50.0, 500.0),
    (0.01, 0.1),
    (1e-4, 5e-3),
    (-2.0, 2.0),
    (-2.0, 2.0),
    (-1.0, 1.0),
)


def draw_thetas(count: int, seed: int, delta_t: float = DELTA_T):
    rng = np.random.default_rng(seed)
    lows = np.array([lo for lo, _ in THETA_BOX])
    highs = np.array([hi for _, hi in THETA_BOX])
    return [ModelParams.from_vector(rng.uniform(lows, highs), delta_t) for _ in range(count)]


def second_order_spec(params: ModelParams) -> CumulantSpec:
    return CumulantSpec((params.zeta, params.eta))


@pytest.fixture(scope="session")
def daily_model() -> ModelSpec:
    return ModelSpec.gamma_ou(nu=2.56, alpha=64.0, lam=256.0, mu=1.2, beta=-0.5, rho=-0.1, delta_t=DELTA_T)


@pytest.fixture(scope="session")
def daily_params(daily_model) -> ModelParams:
    return daily_model.params


@pytest.fixture(scope="session")
def daily_engine(daily_model) -> MomentEngine:
    return MomentEngine(daily_model.params, daily_model.cumulants)


@pytest.fixture(scope="session")
def ig_model() -> ModelSpec:
    return ModelSpec.ig_ou(delta_ig=2.56, gamma_ig=8.0, lam=256.0, mu=1.2, beta=-0.5, rho=-0.1, delta_t=DELTA_T)


@pytest.fixture
def daily_config_file(tmp_path):
    def write(**overrides):
        payload = dict(DAILY_SETTINGS)
        payload.update(overrides)
        payload = {k: v for k, v in payload.items() if v is not None}
        path = tmp_path / "config.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    return write


@pytest.fixture(scope="session")
def theta_sampler():
    return draw_thetas


@pytest.fixture(scope="session")
def moment_spec_for():
    return second_order_spec
