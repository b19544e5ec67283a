from __future__ import annotations

# Cumulant-driven moment engine: stationary moments, joint moments of (S_1, U_1, Z_1),
# and conditional / unconditional joint moments of (X_1, V_1) as polynomials in V_0.

import math
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Dict, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from src.model_core import CumulantSpec, ModelParams

RECURSION_AXES = ("s", "u", "z")

# Index pattern (power of X_1, power of V_1, power of V_0) of each component of
# Xi_k = (V_k, V_k V_{k-1}, V_k^2, X_k, X_k V_{k-1}, X_k V_k).
XI_EXPONENTS: Tuple[Tuple[int, int, int], ...] = (
    (0, 1, 0),
    (0, 1, 1),
    (0, 2, 0),
    (1, 0, 0),
    (1, 0, 1),
    (1, 1, 0),
)


@dataclass(frozen=True)
class PolynomialInV:
    """Coefficients c_0..c_d of sum_k c_k v^k."""

    coeffs: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", values if values else (0.0,))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def coefficient(self, k: int) -> float:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else 0.0

    def __call__(self, v):
        return npoly.polyval(v, self.coeffs)

    def __add__(self, other: "PolynomialInV") -> "PolynomialInV":
        return PolynomialInV(tuple(npoly.polyadd(self.coeffs, other.coeffs)))

    def __mul__(self, other: "PolynomialInV") -> "PolynomialInV":
        return PolynomialInV(tuple(npoly.polymul(self.coeffs, other.coeffs)))

    def scaled(self, factor: float) -> "PolynomialInV":
        return PolynomialInV(tuple(factor * c for c in self.coeffs))

    def shift(self, power: int) -> "PolynomialInV":
        """Multiply by v**power."""
        return PolynomialInV((0.0,) * power + self.coeffs)

    def padded(self, degree: int) -> "PolynomialInV":
        if degree < self.degree:
            raise ValueError(f"Cannot pad a degree {self.degree} polynomial down to degree {degree}.")
        return PolynomialInV(self.coeffs + (0.0,) * (degree - self.degree))

    def expectation(self, moments: Sequence[float]) -> float:
        """Contract against raw moments E[V_0^k], k = 0..degree."""
        if len(moments) <= self.degree:
            raise ValueError(f"Need {self.degree + 1} moments, got {len(moments)}.")
        return math.fsum(c * moments[k] for k, c in enumerate(self.coeffs))


def _zero(degree: int) -> PolynomialInV:
    return PolynomialInV((0.0,) * (degree + 1))


@lru_cache(maxsize=64)
def _moment_table(spec: CumulantSpec) -> Tuple[float, ...]:
    moments = [1.0]
    for n in range(1, spec.max_order + 1):
        moments.append(
            math.fsum(
                comb(n - 1, i) * spec.cumulants[i] * moments[n - 1 - i]
                for i in range(n)
            )
        )
    return tuple(moments)


def stationary_moment(spec: CumulantSpec, n: int) -> float:
    """E[V_0^n] from the moment-cumulant recursion."""
    if n < 0:
        raise ValueError(f"Moment order must be nonnegative, got {n}.")
    spec.require(n)
    return _moment_table(spec)[n]


def stationary_moments(spec: CumulantSpec, n: int) -> Tuple[float, ...]:
    """E[V_0^k] for k = 0..n."""
    spec.require(n)
    return _moment_table(spec)[: n + 1]


def _log_series_tail(q: float, x: float, i: int) -> float:
    # sum_{k>i} q^k / k, where the full series sums to x = -log(1 - q)
    if q > 0.8:
        return x - math.fsum(q**k / k for k in range(1, i + 1))
    terms = []
    running = 0.0
    k = i + 1
    term = q**k / k
    while term > 1e-18 * (running + term):
        terms.append(term)
        running += term
        k += 1
        term = q**k / k
    return math.fsum(terms)


@lru_cache(maxsize=4096)
def epsilon_coeff(i: int, j: int, params: ModelParams) -> float:
    """
    eps_ij = int_0^Delta [(1 - e^{-lam(Delta-s)}) / lam]^i [e^{-lam(Delta-s)}]^j ds.

    Evaluated with w = 1 - e^{-lam(Delta-s)}, which turns the integral into
    lam^{-(i+1)} int_0^{1-gamma} w^i (1-w)^{j-1} dw, expanded binomially in (1-w);
    for j = 0 the integrand w^i / (1-w) leaves the tail of the log series.
    """
    if i < 0 or j < 0:
        raise ValueError(f"epsilon_coeff indices must be nonnegative, got ({i}, {j}).")
    lam = params.lam
    x = lam * params.delta_t
    q = -math.expm1(-x)
    if j == 0:
        integral = _log_series_tail(q, x, i)
    else:
        integral = math.fsum(
            comb(j - 1, l) * (-1) ** l * q ** (i + l + 1) / (i + l + 1) for l in range(j)
        )
    return integral / lam ** (i + 1)


def trivariate_cumulant(n: int, m: int, l: int, params: ModelParams, spec: CumulantSpec) -> float:
    """Joint cumulant of (S_1, U_1, Z_1) of order (n, m, l): lam * eps_nm * N * K_N."""
    if min(n, m, l) < 0:
        raise ValueError(f"Cumulant indices must be nonnegative, got ({n}, {m}, {l}).")
    total = n + m + l
    if total == 0:
        raise ValueError("The order-zero joint cumulant is undefined.")
    return params.lam * epsilon_coeff(n, m, params) * total * spec.cumulant(total)


def gaussian_moment(order: int) -> int:
    """E[W^order] for standard normal W."""
    if order % 2:
        return 0
    half = order // 2
    return math.factorial(order) // (2**half * math.factorial(half))


class MomentEngine:
    """
    Moments of the one-step transition (V_0, V_1, X_1) for fixed parameters and
    stationary cumulants. Values are memoized per engine; all methods are pure
    functions of (params, spec, indices).
    """

    def __init__(self, params: ModelParams, spec: CumulantSpec):
        self.params = params
        self.spec = spec
        self._trivariate: Dict[Tuple[int, int, int, str], float] = {}
        self._xi: Dict[Tuple[int, int, int], PolynomialInV] = {}
        self._psi: Dict[Tuple[int, int, int], PolynomialInV] = {}
        self._phi: Dict[Tuple[int, int], PolynomialInV] = {}

    # -- stationary and trivariate moments -------------------------------------------------

    def stationary_moment(self, n: int) -> float:
        return stationary_moment(self.spec, n)

    def epsilon_coeff(self, i: int, j: int) -> float:
        return epsilon_coeff(i, j, self.params)

    def trivariate_cumulant(self, n: int, m: int, l: int) -> float:
        return trivariate_cumulant(n, m, l, self.params, self.spec)

    def trivariate_moment(self, n: int, m: int, l: int, recursion: str = "s") -> float:
        """
        E[S_1^n U_1^m Z_1^l].

        recursion selects the index the moment-cumulant recursion descends in first
        ("s", "u" or "z"); once that index is exhausted the remaining ones are used
        in the order s, u, z. All choices give the same value.
        """
        if min(n, m, l) < 0:
            raise ValueError(f"Moment indices must be nonnegative, got ({n}, {m}, {l}).")
        if recursion not in RECURSION_AXES:
            raise ValueError(f"Unknown recursion '{recursion}'. Expected one of {', '.join(RECURSION_AXES)}.")
        self.spec.require(n + m + l)
        return self._trivariate_moment(n, m, l, recursion)

    def _trivariate_moment(self, n: int, m: int, l: int, axis: str) -> float:
        if n == m == l == 0:
            return 1.0
        key = (n, m, l, axis)
        cached = self._trivariate.get(key)
        if cached is not None:
            return cached

        orders = [n, m, l]
        a = RECURSION_AXES.index(axis)
        if orders[a] == 0:
            a = next(idx for idx, order in enumerate(orders) if order > 0)
        reduced = list(orders)
        reduced[a] -= 1

        terms = []
        for i in range(reduced[0] + 1):
            for j in range(reduced[1] + 1):
                for k in range(reduced[2] + 1):
                    index = [i, j, k]
                    index[a] += 1
                    weight = comb(reduced[0], i) * comb(reduced[1], j) * comb(reduced[2], k)
                    terms.append(
                        weight
                        * self.trivariate_cumulant(*index)
                        * self._trivariate_moment(reduced[0] - i, reduced[1] - j, reduced[2] - k, axis)
                    )
        value = math.fsum(terms)
        self._trivariate[key] = value
        return value

    # -- polynomial coefficient collections ------------------------------------------------

    def xi_coeffs(self, n: int, m: int, l: int) -> PolynomialInV:
        """E[Y_1^n V_1^m Z_1^l | V_0 = v] as a polynomial of degree n + m."""
        key = (n, m, l)
        if key in self._xi:
            return self._xi[key]
        self.spec.require(n + m + l)
        eps, gam = self.params.epsilon, self.params.gamma
        coeffs = []
        for k in range(n + m + 1):
            coeffs.append(
                math.fsum(
                    comb(n, k - j)
                    * comb(m, j)
                    * eps ** (k - j)
                    * gam**j
                    * self.trivariate_moment(n - k + j, m - j, l)
                    for j in range(max(0, k - n), min(m, k) + 1)
                )
            )
        poly = PolynomialInV(tuple(coeffs))
        self._xi[key] = poly
        return poly

    def psi_coeffs(self, n: int, m: int, l: int) -> PolynomialInV:
        """E[A_1^n Y_1^m V_1^l | V_0 = v] with A_1 = mu*Delta + beta*Y_1 + rho*Z_1."""
        key = (n, m, l)
        if key in self._psi:
            return self._psi[key]
        self.spec.require(n + m + l)
        p = self.params
        drift = p.mu * p.delta_t
        degree = n + m + l
        total = _zero(degree)
        for i in range(n + 1):
            for j in range(n - i + 1):
                weight = comb(n, i) * comb(n - i, j) * p.beta**i * p.rho**j * drift ** (n - i - j)
                if weight == 0.0:
                    continue
                total = total + self.xi_coeffs(m + i, l, j).scaled(weight)
        poly = total.padded(degree) if total.degree < degree else total
        self._psi[key] = poly
        return poly

    def phi_coeffs(self, n: int, m: int) -> PolynomialInV:
        """E[X_1^n V_1^m | V_0 = v] as a polynomial of degree n + m."""
        key = (n, m)
        if key in self._phi:
            return self._phi[key]
        self.spec.require(n + m)
        degree = n + m
        total = _zero(degree)
        for i in range(n // 2 + 1):
            weight = comb(n, 2 * i) * gaussian_moment(2 * i)
            total = total + self.psi_coeffs(n - 2 * i, i, m).scaled(weight)
        poly = total.padded(degree) if total.degree < degree else total
        self._phi[key] = poly
        return poly

    # -- moments of (X_1, V_1) ---------------------------------------------------------------

    def conditional_moment(self, n: int, m: int, v):
        if np.any(np.asarray(v) < 0):
            raise ValueError("Conditioning variance v must be nonnegative.")
        return self.phi_coeffs(n, m)(v)

    def unconditional_moment(self, n: int, m: int) -> float:
        return self.joint_moment(n, m, 0)

    def joint_moment(self, a: int, b: int, c: int) -> float:
        """E[X_1^a V_1^b V_0^c] = sum_k phi_abk E[V_0^(k+c)]."""
        poly = self.phi_coeffs(a, b).shift(c)
        return poly.expectation(stationary_moments(self.spec, poly.degree))

    def f_polynomials(self) -> Tuple[PolynomialInV, ...]:
        """Conditional means f^1..f^6 of Xi_1 given V_0 = v."""
        return tuple(self.phi_coeffs(a, b).shift(c) for a, b, c in XI_EXPONENTS)

    def f_vector(self, v) -> Tuple[float, ...]:
        if np.any(np.asarray(v) < 0):
            raise ValueError("Conditioning variance v must be nonnegative.")
        return tuple(poly(v) for poly in self.f_polynomials())


@lru_cache(maxsize=64)
def engine_for(params: ModelParams, spec: CumulantSpec) -> MomentEngine:
    return MomentEngine(params, spec)


def conditional_moment(n: int, m: int, v, params: ModelParams, spec: CumulantSpec):
    return engine_for(params, spec).conditional_moment(n, m, v)


def unconditional_moment(n: int, m: int, params: ModelParams, spec: CumulantSpec) -> float:
    return engine_for(params, spec).unconditional_moment(n, m)


def f_vector(v, params: ModelParams, spec: CumulantSpec) -> Tuple[float, ...]:
    return engine_for(params, spec).f_vector(v)


def f_polynomials_closed_form(params: ModelParams) -> Tuple[PolynomialInV, ...]:
    """
    f^1..f^6 written out with Delta carried explicitly. Only gamma, epsilon and theta
    enter, so no cumulants beyond zeta and eta are needed.
    """
    lam, zeta, eta, mu, beta, rho = params.as_tuple()
    gam, eps, dt = params.gamma, params.epsilon, params.delta_t
    drift = mu * dt + beta * zeta * (dt - eps) + rho * lam * dt * zeta

    f1 = PolynomialInV(((1 - gam) * zeta, gam))
    f3 = PolynomialInV(
        (
            (1 - gam) ** 2 * zeta**2 + (1 - gam**2) * eta,
            2 * gam * (1 - gam) * zeta,
            gam**2,
        )
    )
    f4 = PolynomialInV((drift, beta * eps))
    f6 = PolynomialInV(
        (
            (1 - gam) * (zeta * drift + eta * (beta * eps + 2 * rho)),
            gam * drift + beta * eps * (1 - gam) * zeta,
            beta * eps * gam,
        )
    )
    return (f1, f1.shift(1), f3, f4, f4.shift(1), f6)
