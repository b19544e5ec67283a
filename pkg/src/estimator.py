from __future__ import annotations

# Empirical moment statistics and the explicit solution of the martingale estimating equations.

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from src.model_core import (
    GENERIC_LABELS,
    ModelParams,
    labels_for,
    named_vector,
)
from src.simulator import ObservationSeries

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_DEGENERATE = "degenerate"

REASON_AUTOCOVARIANCE = "autocovariance nonpositive"
REASON_VARIANCE = "variance nonpositive"
REASON_GAMMA = "gamma_n not below 1"
REASON_ETA = "eta_n nonpositive"


@dataclass(frozen=True)
class MomentSummary:
    """
    xi^1..xi^6 and upsilon^1, upsilon^2 of a sample of size n.

    `central` optionally carries (autocovariance, lagged variance, variance of V)
    accumulated from shifted data; without it they are formed from xi and upsilon.
    """

    xi: Tuple[float, float, float, float, float, float]
    upsilon: Tuple[float, float]
    n: int
    central: Optional[Tuple[float, float, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "xi", tuple(float(v) for v in self.xi))
        object.__setattr__(self, "upsilon", tuple(float(v) for v in self.upsilon))
        if len(self.xi) != 6 or len(self.upsilon) != 2:
            raise ValueError("A moment summary needs six xi and two upsilon values.")
        if self.central is not None:
            object.__setattr__(self, "central", tuple(float(v) for v in self.central))
            if len(self.central) != 3:
                raise ValueError("Central moments are (autocovariance, lagged variance, variance).")

    def central_moments(self) -> Tuple[float, float, float]:
        if self.central is not None:
            return self.central
        xi1, xi2, xi3 = self.xi[:3]
        ups1, ups2 = self.upsilon
        return xi2 - xi1 * ups1, ups2 - ups1**2, xi3 - xi1**2

    @classmethod
    def from_limits(cls, xi, n: int = 0) -> "MomentSummary":
        """Summary whose upsilon is replaced by its limit (xi^1, xi^3)."""
        xi = tuple(float(v) for v in xi)
        return cls(xi=xi, upsilon=(xi[0], xi[2]), n=n)


@dataclass(frozen=True)
class EstimateResult:
    status: str
    theta_hat: Optional[ModelParams]
    diagnostics: Dict[str, float]
    reasons: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    def theta_vector(self, zero_outside_gate: bool = False) -> np.ndarray:
        """Estimates as (lambda, zeta, eta, mu, beta, rho); degenerate samples give NaN, or zeros on request."""
        if self.theta_hat is not None:
            return np.array(self.theta_hat.as_tuple())
        return np.zeros(6) if zero_outside_gate else np.full(6, np.nan)

    def named_params(self, parametrization: str) -> Optional[Dict[str, float]]:
        if self.theta_hat is None:
            return None
        values = named_vector(self.theta_hat.as_tuple(), parametrization)
        return dict(zip(labels_for(parametrization), values))

    def to_dict(self, parametrization: str = "generic", zero_outside_gate: bool = False) -> dict:
        theta = self.theta_vector(zero_outside_gate)
        theta_hat = None
        if self.theta_hat is not None or zero_outside_gate:
            theta_hat = dict(zip(GENERIC_LABELS, (float(t) for t in theta)))
        return {
            "status": self.status,
            "reasons": list(self.reasons),
            "theta_hat": theta_hat,
            "named_params": self.named_params(parametrization),
            "parametrization": parametrization,
            "gate_diagnostics": dict(self.diagnostics),
        }


def sample_statistics(series: ObservationSeries) -> MomentSummary:
    if series.n < 2:
        raise ValueError(f"At least two observations are required, got n={series.n}.")
    if series.v0 is None:
        raise ValueError("The initial variance v0 is required for the lagged moment sums.")
    v, x = series.v, series.x
    v_prev = series.v_prev
    xi = (
        np.mean(v),
        np.mean(v * v_prev),
        np.mean(v * v),
        np.mean(x),
        np.mean(x * v_prev),
        np.mean(x * v),
    )
    upsilon = (np.mean(v_prev), np.mean(v_prev * v_prev))
    # shifting by v0 keeps the gate moments free of cancellation; a constant path gives exact zeros
    d = v - series.v0
    d_prev = v_prev - series.v0
    mean_d, mean_d_prev = np.mean(d), np.mean(d_prev)
    central = (
        np.mean(d * d_prev) - mean_d * mean_d_prev,
        np.mean(d_prev * d_prev) - mean_d_prev**2,
        np.mean(d * d) - mean_d**2,
    )
    return MomentSummary(xi=xi, upsilon=upsilon, n=series.n, central=central)


def solve_estimating_equations(summary: MomentSummary, delta_t: float) -> EstimateResult:
    """
    Closed-form root of G_n(theta) = 0.

    Gate: xi^2 - xi^1 upsilon^1 > 0 and upsilon^2 - (upsilon^1)^2 > 0, plus
    gamma_n < 1 and eta_n > 0 so that lambda_n and the remaining formulas stay real.
    """
    if not delta_t > 0:
        raise ValueError(f"delta_t must be positive, got {delta_t!r}.")
    xi1, _, _, xi4, xi5, xi6 = summary.xi
    ups1, ups2 = summary.upsilon

    autocov, lag_var, var_v = summary.central_moments()
    diagnostics = {"autocovariance": autocov, "lagged_variance": lag_var}
    reasons = []
    if not autocov > 0:
        reasons.append(REASON_AUTOCOVARIANCE)
    if not lag_var > 0:
        reasons.append(REASON_VARIANCE)
    if reasons:
        return _degenerate(reasons, diagnostics)

    gam = autocov / lag_var
    diagnostics["gamma_n"] = gam
    if not gam < 1:
        return _degenerate([REASON_GAMMA], diagnostics)

    zeta = (xi1 - gam * ups1) / (1 - gam)
    eta = (var_v - gam**2 * lag_var) / (1 - gam**2)
    diagnostics["eta_n"] = eta
    if not eta > 0:
        return _degenerate([REASON_ETA], diagnostics)

    lam = -math.log(gam) / delta_t
    eps = (1 - gam) / lam
    beta = (xi5 - ups1 * xi4) / (eps * lag_var)
    rho = (xi6 - xi4 * xi1 - beta * eps * (eta * (1 - gam) + gam * lag_var)) / (2 * (1 - gam) * eta)
    mu = (xi4 - beta * eps * (ups1 - zeta)) / delta_t - (beta + lam * rho) * zeta

    if not zeta > 0:
        # xi^1 and upsilon^1 are means of nonnegative data, so this needs pathological input
        return _degenerate(["zeta_n nonpositive"], diagnostics)

    theta = ModelParams(lam=lam, zeta=zeta, eta=eta, mu=mu, beta=beta, rho=rho, delta_t=delta_t)
    return EstimateResult(status=STATUS_OK, theta_hat=theta, diagnostics=diagnostics)


def _degenerate(reasons, diagnostics) -> EstimateResult:
    logger.debug("Estimate degenerate: %s", "; ".join(reasons))
    return EstimateResult(
        status=STATUS_DEGENERATE,
        theta_hat=None,
        diagnostics=diagnostics,
        reasons=tuple(reasons),
    )


def solution_map(xi, delta_t: float) -> np.ndarray:
    """h(xi): the estimator as a function of xi alone, with upsilon at its limit (xi^1, xi^3)."""
    result = solve_estimating_equations(MomentSummary.from_limits(xi), delta_t)
    if not result.ok:
        raise ValueError(f"Solution map undefined at xi={tuple(xi)}: {', '.join(result.reasons)}.")
    return result.theta_vector()


def estimate(series: ObservationSeries, model_kind: str = "generic") -> EstimateResult:
    """Estimate theta from a series; the named view is available via `named_params(model_kind)`."""
    labels_for(model_kind)
    return solve_estimating_equations(sample_statistics(series), series.delta_t)
