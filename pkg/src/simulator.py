from __future__ import annotations

# Sample paths of (Z, V, Y, X) for Gamma-OU (exact) and IG-OU (subgrid) models on an equidistant grid.

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy.signal import lfilter

from src.model_core import GammaOUParams, IGOUParams, ModelParams, ModelSpec

logger = logging.getLogger(__name__)

DEFAULT_SUBGRID = 16
_IG_CHUNK_CELLS = 65536


@dataclass(frozen=True, eq=False)
class ObservationSeries:
    """
    Paired observations X_i, V_i for i = 1..n on a grid of width delta_t.

    v0 is the variance at t_0; the estimator needs it because the lagged sums
    start at V_0. z and y (BDLP and integrated-variance increments) are only
    present for simulated data.
    """

    delta_t: float
    x: np.ndarray
    v: np.ndarray
    v0: Optional[float] = None
    z: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.delta_t > 0:
            raise ValueError(f"delta_t must be positive, got {self.delta_t!r}.")
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if x.shape != v.shape or x.ndim != 1:
            raise ValueError(f"x and v must be 1-d of equal length, got {x.shape} and {v.shape}.")
        if np.any(v < 0):
            raise ValueError("Variance observations must be nonnegative.")
        if self.v0 is not None and self.v0 < 0:
            raise ValueError(f"v0 must be nonnegative, got {self.v0!r}.")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)
        for name in ("z", "y"):
            values = getattr(self, name)
            if values is None:
                continue
            values = np.asarray(values, dtype=float)
            if values.shape != x.shape:
                raise ValueError(f"Column '{name}' has length {values.size}, expected {x.size}.")
            object.__setattr__(self, name, values)

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def is_estimable(self) -> bool:
        return self.n >= 2 and self.v0 is not None

    @property
    def v_prev(self) -> np.ndarray:
        """V_0..V_{n-1}."""
        if self.v0 is None:
            raise ValueError("The series has no initial variance v0.")
        return np.concatenate(([self.v0], self.v[:-1]))

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({"i": np.arange(1, self.n + 1), "x": self.x, "v": self.v})
        if self.z is not None:
            df["z"] = self.z
        if self.y is not None:
            df["y"] = self.y
        return df


@dataclass(frozen=True)
class SimConfig:
    model: ModelSpec
    n: int
    seed: int
    subgrid: int = DEFAULT_SUBGRID
    v0: Optional[float] = None
    replication: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"Path length n must be at least 1, got {self.n}.")
        if self.subgrid < 1:
            raise ValueError(f"subgrid must be at least 1, got {self.subgrid}.")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}.")
        if self.model.law is None:
            raise ValueError("Simulation needs a named stationary law (gamma_ou or ig_ou).")


@dataclass(frozen=True)
class SimulationStreams:
    v0: np.random.Generator
    jumps: np.random.Generator
    noise: np.random.Generator


def replication_streams(seed: int, replication: int = 0) -> SimulationStreams:
    """Independent generators for V_0, the BDLP and the Brownian part, keyed by (seed, replication)."""
    root = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replication),))
    v0_seq, jump_seq, noise_seq = root.spawn(3)
    return SimulationStreams(
        v0=np.random.default_rng(v0_seq),
        jumps=np.random.default_rng(jump_seq),
        noise=np.random.default_rng(noise_seq),
    )


def sample_inverse_gaussian(delta_ig, gamma_ig, rng: np.random.Generator, size=None) -> np.ndarray:
    """
    IG(delta, gamma) variates (mean delta/gamma, variance delta/gamma^3) by the
    chi-square transform with a binomial choice between the two roots.
    """
    mean = np.asarray(delta_ig, dtype=float) / gamma_ig
    shape = np.asarray(delta_ig, dtype=float) ** 2
    chi2 = rng.standard_normal(size) ** 2
    phi = mean * chi2 / (2.0 * shape)
    # smaller root of the quadratic, rationalized
    small_root = mean / (1.0 + phi + np.sqrt(phi * (phi + 2.0)))
    uniform = rng.random(size)
    return np.where(uniform <= mean / (mean + small_root), small_root, mean**2 / small_root)


def draw_stationary_v0(model, rng: np.random.Generator, size=None):
    """A draw from the stationary law of V_0: Gamma(nu, alpha) or IG(delta, gamma)."""
    law = model.law if isinstance(model, ModelSpec) else model
    if isinstance(law, GammaOUParams):
        return rng.gamma(shape=law.nu, scale=1.0 / law.alpha, size=size)
    if isinstance(law, IGOUParams):
        return sample_inverse_gaussian(law.delta_ig, law.gamma_ig, rng, size=size)
    raise ValueError("No sampler exists for a model given only by its cumulants.")


def _scatter(cells: np.ndarray, weights: np.ndarray, n: int) -> np.ndarray:
    return np.bincount(cells, weights=weights, minlength=n)


def _compound_poisson_increments(
    params: ModelParams, rate: float, n: int, rng: np.random.Generator, draw_sizes
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    (U_i, S_i, Z_i) of a compound Poisson BDLP with `rate` jumps per unit of calendar time.

    Given the count in a cell, jump times are iid uniform on the cell, so every
    jump is placed exactly.
    """
    lam, dt = params.lam, params.delta_t
    counts = rng.poisson(rate * dt, size=n)
    cells = np.repeat(np.arange(n), counts)
    age = dt * rng.random(cells.size)
    sizes = draw_sizes(cells.size)
    u = _scatter(cells, sizes * np.exp(-lam * age), n)
    s = _scatter(cells, sizes * -np.expm1(-lam * age) / lam, n)
    z = _scatter(cells, sizes, n)
    return u, s, z


def gamma_ou_increments(
    params: ModelParams, law: GammaOUParams, n: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Z is compound Poisson with intensity nu and Exp(alpha) jumps; Z_lambda runs lambda times faster
    return _compound_poisson_increments(
        params,
        rate=params.lam * law.nu,
        n=n,
        rng=rng,
        draw_sizes=lambda k: rng.exponential(1.0 / law.alpha, size=k),
    )


def ig_ou_increments(
    params: ModelParams, law: IGOUParams, n: int, subgrid: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    BDLP = IG(delta/2, gamma) subordinator + compound Poisson(delta*gamma/2, Gamma(1/2, gamma^2/2)).

    The subordinator part is drawn exactly per subcell and its mass is placed at
    the subcell midpoint, an O(delta_t / subgrid) approximation of the kernels.
    """
    if subgrid == 1:
        logger.warning("IG-OU simulation with subgrid=1 places all subordinator mass at the cell midpoint")
    lam, dt = params.lam, params.delta_t
    h = dt / subgrid
    mid_age = dt - (np.arange(subgrid) + 0.5) * h
    u_weight = np.exp(-lam * mid_age)
    s_weight = -np.expm1(-lam * mid_age) / lam
    sub_delta = lam * h * law.delta_ig / 2.0

    u = np.empty(n)
    s = np.empty(n)
    z = np.empty(n)
    for start in range(0, n, _IG_CHUNK_CELLS):
        stop = min(n, start + _IG_CHUNK_CELLS)
        mass = sample_inverse_gaussian(sub_delta, law.gamma_ig, rng, size=(stop - start, subgrid))
        u[start:stop] = mass @ u_weight
        s[start:stop] = mass @ s_weight
        z[start:stop] = mass.sum(axis=1)

    cp_u, cp_s, cp_z = _compound_poisson_increments(
        params,
        rate=params.lam * law.delta_ig * law.gamma_ig / 2.0,
        n=n,
        rng=rng,
        draw_sizes=lambda k: rng.gamma(shape=0.5, scale=2.0 / law.gamma_ig**2, size=k),
    )
    return u + cp_u, s + cp_s, z + cp_z


def cell_increments(
    model: ModelSpec, n: int, rng: np.random.Generator, subgrid: int = DEFAULT_SUBGRID
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(model.law, GammaOUParams):
        return gamma_ou_increments(model.params, model.law, n, rng)
    if isinstance(model.law, IGOUParams):
        return ig_ou_increments(model.params, model.law, n, subgrid, rng)
    raise ValueError("No sampler exists for a model given only by its cumulants.")


def _assemble(
    params: ModelParams,
    v0: float,
    u: np.ndarray,
    s: np.ndarray,
    z: np.ndarray,
    rng: np.random.Generator,
) -> ObservationSeries:
    gam, eps, dt = params.gamma, params.epsilon, params.delta_t
    # V_i = gamma V_{i-1} + U_i
    v, _ = lfilter([1.0], [1.0, -gam], u, zi=[gam * v0])
    v_prev = np.concatenate(([v0], v[:-1]))
    y = eps * v_prev + s
    w = rng.standard_normal(u.size)
    x = params.mu * dt + params.beta * y + np.sqrt(y) * w + params.rho * z
    return ObservationSeries(delta_t=dt, x=x, v=v, v0=float(v0), z=z, y=y)


def _simulate(cfg: SimConfig) -> ObservationSeries:
    streams = replication_streams(cfg.seed, cfg.replication)
    v0 = cfg.v0 if cfg.v0 is not None else float(draw_stationary_v0(cfg.model, streams.v0))
    u, s, z = cell_increments(cfg.model, cfg.n, streams.jumps, cfg.subgrid)
    return _assemble(cfg.model.params, v0, u, s, z, streams.noise)


def simulate_gamma_ou(cfg: SimConfig) -> ObservationSeries:
    if cfg.model.kind != "gamma_ou":
        raise ValueError(f"simulate_gamma_ou needs a gamma_ou model, got '{cfg.model.kind}'.")
    return _simulate(cfg)


def simulate_ig_ou(cfg: SimConfig) -> ObservationSeries:
    if cfg.model.kind != "ig_ou":
        raise ValueError(f"simulate_ig_ou needs an ig_ou model, got '{cfg.model.kind}'.")
    return _simulate(cfg)


def simulate(cfg: SimConfig) -> ObservationSeries:
    if cfg.model.kind == "gamma_ou":
        return simulate_gamma_ou(cfg)
    if cfg.model.kind == "ig_ou":
        return simulate_ig_ou(cfg)
    raise ValueError("No sampler exists for a model given only by its cumulants.")


@dataclass(frozen=True, eq=False)
class OneStepSample:
    v0: np.ndarray
    v1: np.ndarray
    x1: np.ndarray
    y1: np.ndarray
    z1: np.ndarray
    u1: np.ndarray
    s1: np.ndarray


def draw_one_step(
    model: ModelSpec,
    size: int,
    seed: int,
    v0=None,
    subgrid: int = DEFAULT_SUBGRID,
) -> OneStepSample:
    """
    Independent one-step transitions (V_0 -> V_1, X_1). V_0 is stationary unless
    given (scalar or array).
    """
    streams = replication_streams(seed)
    if v0 is None:
        start = np.asarray(draw_stationary_v0(model, streams.v0, size=size), dtype=float)
    else:
        start = np.broadcast_to(np.asarray(v0, dtype=float), (size,)).copy()
    u, s, z = cell_increments(model, size, streams.jumps, subgrid)
    p = model.params
    v1 = p.gamma * start + u
    y1 = p.epsilon * start + s
    w = streams.noise.standard_normal(size)
    x1 = p.mu * p.delta_t + p.beta * y1 + np.sqrt(y1) * w + p.rho * z
    return OneStepSample(v0=start, v1=v1, x1=x1, y1=y1, z1=z, u1=u, s1=s)
