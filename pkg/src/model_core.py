from __future__ import annotations

# Parameter value objects, parametrization maps and stationary cumulant providers.

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

GENERIC_LABELS = ("lambda", "zeta", "eta", "mu", "beta", "rho")
GAMMA_OU_LABELS = ("nu", "alpha", "lambda", "mu", "beta", "rho")
IG_OU_LABELS = ("delta_ig", "gamma_ig", "lambda", "mu", "beta", "rho")

MODEL_KINDS = ("gamma_ou", "ig_ou", "generic")
DEFAULT_MAX_ORDER = 10


class InsufficientCumulantOrder(ValueError):
    def __init__(self, required: int, available: int):
        self.required = int(required)
        self.available = int(available)
        super().__init__(
            f"Cumulants up to order {self.required} are required, "
            f"but only {self.available} are available."
        )


def _require_positive(**values: float) -> None:
    for name, value in values.items():
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise ValueError(f"Parameter '{name}' must be a finite positive number, got {value!r}.")


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not (isinstance(value, (int, float)) and math.isfinite(value)):
            raise ValueError(f"Parameter '{name}' must be a finite number, got {value!r}.")


@dataclass(frozen=True)
class ModelParams:
    """
    Generic parameter vector theta = (lambda, zeta, eta, mu, beta, rho) plus grid width.

    Units are annualized with delta_t in years. gamma and epsilon are derived here
    and nowhere else.
    """

    lam: float
    zeta: float
    eta: float
    mu: float
    beta: float
    rho: float
    delta_t: float

    def __post_init__(self):
        _require_positive(lam=self.lam, zeta=self.zeta, eta=self.eta, delta_t=self.delta_t)
        _require_finite(mu=self.mu, beta=self.beta, rho=self.rho)
        if not 0 < self.gamma < 1:
            raise ValueError(
                f"gamma = exp(-lambda * delta_t) must lie strictly in (0, 1), got {self.gamma!r} "
                f"for lambda={self.lam!r}, delta_t={self.delta_t!r}."
            )

    @property
    def gamma(self) -> float:
        return math.exp(-self.lam * self.delta_t)

    @property
    def epsilon(self) -> float:
        # -expm1 keeps (1 - gamma) accurate for small lambda * delta_t
        return -math.expm1(-self.lam * self.delta_t) / self.lam

    def as_tuple(self) -> Tuple[float, ...]:
        return (self.lam, self.zeta, self.eta, self.mu, self.beta, self.rho)

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "zeta": self.zeta,
            "eta": self.eta,
            "mu": self.mu,
            "beta": self.beta,
            "rho": self.rho,
            "delta_t": self.delta_t,
        }

    @classmethod
    def from_vector(cls, theta, delta_t: float) -> "ModelParams":
        lam, zeta, eta, mu, beta, rho = (float(t) for t in theta)
        return cls(lam=lam, zeta=zeta, eta=eta, mu=mu, beta=beta, rho=rho, delta_t=float(delta_t))


def derived_constants(params: ModelParams) -> Tuple[float, float]:
    return params.gamma, params.epsilon


@dataclass(frozen=True)
class GammaOUParams:
    nu: float
    alpha: float

    def __post_init__(self):
        _require_positive(nu=self.nu, alpha=self.alpha)


@dataclass(frozen=True)
class IGOUParams:
    delta_ig: float
    gamma_ig: float

    def __post_init__(self):
        _require_positive(delta_ig=self.delta_ig, gamma_ig=self.gamma_ig)


StationaryLaw = Union[GammaOUParams, IGOUParams]


def gamma_ou_to_generic(p: GammaOUParams) -> Tuple[float, float]:
    return p.nu / p.alpha, p.nu / p.alpha**2


def generic_to_gamma_ou(zeta: float, eta: float) -> GammaOUParams:
    _require_positive(zeta=zeta, eta=eta)
    return GammaOUParams(nu=zeta**2 / eta, alpha=zeta / eta)


def ig_ou_to_generic(p: IGOUParams) -> Tuple[float, float]:
    return p.delta_ig / p.gamma_ig, p.delta_ig / p.gamma_ig**3


def generic_to_ig_ou(zeta: float, eta: float) -> IGOUParams:
    _require_positive(zeta=zeta, eta=eta)
    gamma_ig = math.sqrt(zeta / eta)
    return IGOUParams(delta_ig=zeta * gamma_ig, gamma_ig=gamma_ig)


@dataclass(frozen=True)
class CumulantSpec:
    """Stationary cumulants K_1..K_max of V_0; the only distributional input of the moment engine."""

    cumulants: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(k) for k in self.cumulants)
        object.__setattr__(self, "cumulants", values)
        if len(values) < 2:
            raise InsufficientCumulantOrder(required=2, available=len(values))
        if any(not math.isfinite(k) for k in values):
            raise ValueError("Cumulants must be finite.")
        if values[0] <= 0 or values[1] <= 0:
            raise ValueError("K1 (stationary mean) and K2 (stationary variance) must be positive.")

    @property
    def max_order(self) -> int:
        return len(self.cumulants)

    def cumulant(self, n: int) -> float:
        if n < 1:
            raise ValueError(f"Cumulant order must be at least 1, got {n}.")
        if n > self.max_order:
            raise InsufficientCumulantOrder(required=n, available=self.max_order)
        return self.cumulants[n - 1]

    def require(self, order: int) -> None:
        if order > self.max_order:
            raise InsufficientCumulantOrder(required=order, available=self.max_order)


def stationary_cumulants(model: StationaryLaw, max_order: int = DEFAULT_MAX_ORDER) -> CumulantSpec:
    """
    Gamma(nu, alpha):  K_n = nu (n-1)! / alpha^n
    IG(delta, gamma):  K_n = delta (2n-3)!! / gamma^(2n-1)
    """
    if max_order < 1:
        raise ValueError(f"max_order must be at least 1, got {max_order}.")
    if max_order < 2:
        raise InsufficientCumulantOrder(required=2, available=max_order)

    orders = range(1, max_order + 1)
    if isinstance(model, GammaOUParams):
        values = [model.nu * float(math.factorial(n - 1)) / model.alpha**n for n in orders]
    elif isinstance(model, IGOUParams):
        # empty product for n == 1
        values = [
            model.delta_ig * float(math.prod(range(2 * n - 3, 0, -2))) / model.gamma_ig ** (2 * n - 1)
            for n in orders
        ]
    else:
        raise ValueError(f"No closed-form cumulants for {type(model).__name__}.")
    return CumulantSpec(cumulants=tuple(values))


@dataclass(frozen=True)
class ModelSpec:
    """A complete model: kind, generic parameters, optional named law and its cumulants."""

    kind: str
    params: ModelParams
    law: Optional[StationaryLaw] = None
    cumulants: Optional[CumulantSpec] = field(default=None)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"Unknown model kind '{self.kind}'. Expected one of {', '.join(MODEL_KINDS)}.")
        if self.kind == "gamma_ou" and not isinstance(self.law, GammaOUParams):
            raise ValueError("A gamma_ou model needs GammaOUParams.")
        if self.kind == "ig_ou" and not isinstance(self.law, IGOUParams):
            raise ValueError("An ig_ou model needs IGOUParams.")
        if self.cumulants is not None:
            k1, k2 = self.cumulants.cumulants[:2]
            if not (math.isclose(k1, self.params.zeta, rel_tol=1e-12) and math.isclose(k2, self.params.eta, rel_tol=1e-12)):
                raise ValueError(
                    f"Cumulants K1={k1}, K2={k2} disagree with zeta={self.params.zeta}, eta={self.params.eta}."
                )

    @classmethod
    def gamma_ou(
        cls,
        nu: float,
        alpha: float,
        lam: float,
        mu: float,
        beta: float,
        rho: float,
        delta_t: float,
        max_order: int = DEFAULT_MAX_ORDER,
    ) -> "ModelSpec":
        law = GammaOUParams(nu=nu, alpha=alpha)
        zeta, eta = gamma_ou_to_generic(law)
        params = ModelParams(lam=lam, zeta=zeta, eta=eta, mu=mu, beta=beta, rho=rho, delta_t=delta_t)
        return cls(kind="gamma_ou", params=params, law=law, cumulants=stationary_cumulants(law, max_order))

    @classmethod
    def ig_ou(
        cls,
        delta_ig: float,
        gamma_ig: float,
        lam: float,
        mu: float,
        beta: float,
        rho: float,
        delta_t: float,
        max_order: int = DEFAULT_MAX_ORDER,
    ) -> "ModelSpec":
        law = IGOUParams(delta_ig=delta_ig, gamma_ig=gamma_ig)
        zeta, eta = ig_ou_to_generic(law)
        params = ModelParams(lam=lam, zeta=zeta, eta=eta, mu=mu, beta=beta, rho=rho, delta_t=delta_t)
        return cls(kind="ig_ou", params=params, law=law, cumulants=stationary_cumulants(law, max_order))

    @classmethod
    def generic(cls, params: ModelParams, cumulants: Optional[CumulantSpec] = None) -> "ModelSpec":
        return cls(kind="generic", params=params, law=None, cumulants=cumulants)

    def require_cumulants(self) -> CumulantSpec:
        if self.cumulants is None:
            raise InsufficientCumulantOrder(required=2, available=0)
        return self.cumulants

    @property
    def labels(self) -> Tuple[str, ...]:
        return labels_for(self.kind)


def labels_for(parametrization: str) -> Tuple[str, ...]:
    if parametrization == "gamma_ou":
        return GAMMA_OU_LABELS
    if parametrization == "ig_ou":
        return IG_OU_LABELS
    if parametrization == "generic":
        return GENERIC_LABELS
    raise ValueError(f"Unknown parametrization '{parametrization}'.")


def named_vector(theta, parametrization: str) -> Tuple[float, ...]:
    """Map a generic (lambda, zeta, eta, mu, beta, rho) vector to the named ordering of `labels_for`."""
    lam, zeta, eta, mu, beta, rho = (float(t) for t in theta)
    if parametrization == "generic":
        return (lam, zeta, eta, mu, beta, rho)
    if parametrization == "gamma_ou":
        law = generic_to_gamma_ou(zeta, eta)
        return (law.nu, law.alpha, lam, mu, beta, rho)
    if parametrization == "ig_ou":
        law = generic_to_ig_ou(zeta, eta)
        return (law.delta_ig, law.gamma_ig, lam, mu, beta, rho)
    raise ValueError(f"Unknown parametrization '{parametrization}'.")
