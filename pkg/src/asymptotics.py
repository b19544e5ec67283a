from __future__ import annotations

# Asymptotic covariance of the explicit estimator: Upsilon, P, Sigma, D and T = D Sigma D^T,
# plus the (s, r) presentation and the comparison against Monte Carlo estimates.

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import linalg, stats

from src.estimator import solution_map
from src.model_core import CumulantSpec, ModelParams, ModelSpec, labels_for, named_vector
from src.moment_engine import (
    XI_EXPONENTS,
    engine_for,
    f_polynomials_closed_form,
    stationary_moments,
)

logger = logging.getLogger(__name__)

REL_STEP = 1e-6
SHRUNK_REL_STEP = 1e-7
PSD_TOLERANCE = 1e-8
MIN_REPLICATIONS = 100

# total order of E[Xi^i Xi^j] reaches 4 in (X_1, V_1, V_0)
UPSILON_CUMULANT_ORDER = 4


class JacobianError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class AsymptoticReport:
    """Matrices of the delta-method chain and the derived standard deviations / correlations."""

    params: ModelParams
    parametrization: str
    labels: Tuple[str, ...]
    upsilon: np.ndarray
    p_matrix: np.ndarray
    sigma: np.ndarray
    jacobian: np.ndarray
    t_matrix: np.ndarray
    s: np.ndarray
    r: np.ndarray

    @property
    def psd(self) -> dict:
        return {
            "upsilon": is_psd(self.upsilon),
            "sigma": is_psd(self.sigma),
            "t_matrix": is_psd(self.t_matrix),
        }

    def s_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"parameter": list(self.labels), "s": self.s})

    def r_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.r, columns=list(self.labels))
        df.insert(0, "parameter", list(self.labels))
        return df

    def to_dict(self) -> dict:
        def matrix(m: np.ndarray) -> list:
            return [[float(v) for v in row] for row in m]

        return {
            "parametrization": self.parametrization,
            "labels": list(self.labels),
            "params": self.params.as_dict(),
            "s": dict(zip(self.labels, (float(v) for v in self.s))),
            "r": matrix(self.r),
            "upsilon": matrix(self.upsilon),
            "p_matrix": matrix(self.p_matrix),
            "sigma": matrix(self.sigma),
            "jacobian": matrix(self.jacobian),
            "t_matrix": matrix(self.t_matrix),
            "psd": self.psd,
        }


def is_psd(matrix: np.ndarray, tol: float = PSD_TOLERANCE) -> bool:
    """Symmetric with smallest eigenvalue >= -tol * trace."""
    if not np.allclose(matrix, matrix.T, rtol=1e-12, atol=0.0):
        return False
    eigenvalues = np.linalg.eigvalsh(matrix)
    return bool(eigenvalues.min() >= -tol * abs(np.trace(matrix)))


def limit_moments_closed_form(params: ModelParams) -> Tuple[Tuple[float, ...], Tuple[float, float]]:
    lam, zeta, eta, mu, beta, rho = params.as_tuple()
    gam, eps, dt = params.gamma, params.epsilon, params.delta_t
    mean_return = dt * (mu + (beta + lam * rho) * zeta)
    xi = (
        zeta,
        zeta**2 + gam * eta,
        zeta**2 + eta,
        mean_return,
        zeta * mean_return + beta * eps * eta,
        zeta * mean_return + (beta + 2 * rho * lam) * eps * eta,
    )
    return xi, (zeta, zeta**2 + eta)


def theoretical_xi(params: ModelParams, spec: CumulantSpec) -> Tuple[Tuple[float, ...], Tuple[float, float]]:
    """Almost-sure limits of xi_n and upsilon_n, from the moment engine."""
    engine = engine_for(params, spec)
    xi = tuple(engine.joint_moment(a, b, c) for a, b, c in XI_EXPONENTS)
    upsilon = (engine.stationary_moment(1), engine.stationary_moment(2))
    return xi, upsilon


def upsilon_matrix(params: ModelParams, spec: CumulantSpec) -> np.ndarray:
    """Upsilon_ij = E[Xi^i Xi^j] - E[f^i(V_0) f^j(V_0)]."""
    spec.require(UPSILON_CUMULANT_ORDER)
    engine = engine_for(params, spec)
    polys = engine.f_polynomials()
    moments = stationary_moments(spec, 2 * max(p.degree for p in polys))
    upsilon = np.empty((6, 6))
    for i, (ai, bi, ci) in enumerate(XI_EXPONENTS):
        for j in range(i, 6):
            aj, bj, cj = XI_EXPONENTS[j]
            raw = engine.joint_moment(ai + aj, bi + bj, ci + cj)
            centre = (polys[i] * polys[j]).expectation(moments)
            upsilon[i, j] = upsilon[j, i] = raw - centre
    return upsilon


def p_matrix(params: ModelParams) -> np.ndarray:
    """P_ij = delta_ij - phi^1_i delta_{1j} - phi^2_i delta_{3j} from the linear and quadratic coefficients of f."""
    polys = f_polynomials_closed_form(params)
    p = np.eye(6)
    p[:, 0] -= [poly.coefficient(1) for poly in polys]
    p[:, 2] -= [poly.coefficient(2) for poly in polys]
    return p


def sigma_matrix(params: ModelParams, spec: CumulantSpec) -> np.ndarray:
    return _sandwich_solve(p_matrix(params), upsilon_matrix(params, spec))


def _sandwich_solve(p: np.ndarray, upsilon: np.ndarray) -> np.ndarray:
    """P^{-1} Upsilon P^{-T} by two LU solves."""
    lu, piv = linalg.lu_factor(p)
    if np.min(np.abs(np.diag(lu))) <= 1e-14 * np.max(np.abs(np.diag(lu))):
        raise ValueError("P is numerically singular.")
    left = linalg.lu_solve((lu, piv), upsilon)
    sigma = linalg.lu_solve((lu, piv), left.T)
    return 0.5 * (sigma + sigma.T)


def _central_differences(xi: np.ndarray, delta_t: float, rel_step: float) -> np.ndarray:
    jac = np.empty((6, 6))
    for j in range(6):
        step = rel_step * (abs(xi[j]) + 1e-12)
        up, down = xi.copy(), xi.copy()
        up[j] += step
        down[j] -= step
        jac[:, j] = (solution_map(up, delta_t) - solution_map(down, delta_t)) / (2 * step)
    return jac


def jacobian_D(
    params: ModelParams, spec: Optional[CumulantSpec] = None, rel_step: float = REL_STEP
) -> np.ndarray:
    """
    D_ij = dh_i / dxi_j at the limit point, by central differences of the solution
    map with upsilon replaced by (xi^1, xi^3). Without cumulants the closed-form
    limits are used.
    """
    if spec is None:
        xi, _ = limit_moments_closed_form(params)
    else:
        xi, _ = theoretical_xi(params, spec)
    xi = np.asarray(xi, dtype=float)
    try:
        return _central_differences(xi, params.delta_t, rel_step)
    except ValueError as first:
        shrunk = min(rel_step, SHRUNK_REL_STEP)
        logger.warning("Solution map left its domain with step %s (%s); retrying with %s", rel_step, first, shrunk)
        try:
            return _central_differences(xi, params.delta_t, shrunk)
        except ValueError as err:
            raise JacobianError(f"Solution map is undefined near xi={tuple(xi)} even with step {shrunk}: {err}") from err


def det_jacobian_closed_form(params: ModelParams) -> float:
    """lambda / (2 Delta^2 (1-gamma)^2 gamma eta^3)."""
    gam = params.gamma
    return params.lam / (2 * params.delta_t**2 * (1 - gam) ** 2 * gam * params.eta**3)


def reparametrization_jacobian(params: ModelParams, parametrization: str) -> np.ndarray:
    """Jacobian of (lambda, zeta, eta, mu, beta, rho) -> the named ordering of `labels_for`."""
    labels_for(parametrization)
    if parametrization == "generic":
        return np.eye(6)
    zeta, eta = params.zeta, params.eta
    jac = np.zeros((6, 6))
    jac[2, 0] = jac[3, 3] = jac[4, 4] = jac[5, 5] = 1.0
    if parametrization == "gamma_ou":
        # nu = zeta^2 / eta, alpha = zeta / eta
        jac[0, 1:3] = (2 * zeta / eta, -(zeta**2) / eta**2)
        jac[1, 1:3] = (1 / eta, -zeta / eta**2)
    else:
        # delta = zeta^(3/2) eta^(-1/2), gamma = zeta^(1/2) eta^(-1/2)
        root_zeta, root_eta = math.sqrt(zeta), math.sqrt(eta)
        jac[0, 1:3] = (1.5 * root_zeta / root_eta, -0.5 * zeta * root_zeta / (eta * root_eta))
        jac[1, 1:3] = (0.5 / (root_zeta * root_eta), -0.5 * root_zeta / (eta * root_eta))
    return jac


def correlation_matrix(t_matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    s = np.sqrt(np.clip(np.diag(t_matrix), 0.0, None))
    r = t_matrix / np.outer(s, s)
    r = np.clip(0.5 * (r + r.T), -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return s, r


def asymptotic_covariance(
    params: ModelParams, spec: CumulantSpec, parametrization: str = "generic"
) -> AsymptoticReport:
    labels = labels_for(parametrization)
    upsilon = upsilon_matrix(params, spec)
    p = p_matrix(params)
    sigma = _sandwich_solve(p, upsilon)
    jacobian = reparametrization_jacobian(params, parametrization) @ jacobian_D(params, spec)
    t_matrix = jacobian @ sigma @ jacobian.T
    t_matrix = 0.5 * (t_matrix + t_matrix.T)
    s, r = correlation_matrix(t_matrix)
    report = AsymptoticReport(
        params=params,
        parametrization=parametrization,
        labels=labels,
        upsilon=upsilon,
        p_matrix=p,
        sigma=sigma,
        jacobian=jacobian,
        t_matrix=t_matrix,
        s=s,
        r=r,
    )
    flags = report.psd
    if not all(flags.values()):
        logger.warning("Covariance chain is not PSD within tolerance: %s", flags)
    return report


def report_for(model: ModelSpec, parametrization: Optional[str] = None) -> AsymptoticReport:
    return asymptotic_covariance(model.params, model.require_cumulants(), parametrization or model.kind)


def empirical_vs_asymptotic(
    estimates: pd.DataFrame, report: AsymptoticReport, n: int, truth: Optional[Tuple[float, ...]] = None
) -> pd.DataFrame:
    """
    Per parameter: MC mean and sd, sd * sqrt(n) against s, their ratio and the
    standardized third and fourth sample moments of the estimates.
    """
    missing = [label for label in report.labels if label not in estimates.columns]
    if missing:
        raise ValueError(f"Estimate table is missing columns: {', '.join(missing)}.")
    usable = estimates[list(report.labels)].dropna()
    if len(usable) < MIN_REPLICATIONS:
        raise ValueError(
            f"At least {MIN_REPLICATIONS} usable replications are required, got {len(usable)}."
        )
    if truth is None:
        truth = named_vector(report.params.as_tuple(), report.parametrization)

    rows = []
    for label, s_i, true_value in zip(report.labels, report.s, truth):
        values = usable[label].to_numpy(dtype=float)
        sd = float(np.std(values, ddof=1))
        rows.append(
            {
                "parameter": label,
                "truth": float(true_value),
                "mean": float(np.mean(values)),
                "mc_sd": sd,
                "mc_sd_sqrt_n": sd * math.sqrt(n),
                "s": float(s_i),
                "ratio": sd * math.sqrt(n) / float(s_i),
                "skew": float(stats.skew(values)),
                "excess_kurtosis": float(stats.kurtosis(values)),
            }
        )
    return pd.DataFrame(rows)
