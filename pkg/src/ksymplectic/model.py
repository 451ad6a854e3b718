"""Stochastic Lotka–Volterra model in Stratonovich form.

The system

    dx = x (eta2 - gamma2 y) dt + sigma2 x o dW
    dy = y (gamma1 x - eta1) dt + sigma1 y o dW

is a stochastic Poisson system dz = B(z) (grad H0 dt + grad H1 o dW) with
B(z) = [[0, xy], [-xy, 0]], H0 = -gamma1 x + eta1 ln x - gamma2 y + eta2 ln y and
H1 = -sigma1 ln x + sigma2 ln y. The logarithmic change of variables
u = ln x, v = ln y takes it to canonical form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError

__all__ = [
    "ModelParams",
    "LV_PARAMS",
    "State",
    "LogState",
    "Hamiltonians",
    "check_coefficient_condition",
    "drift_stratonovich",
    "drift_ito",
    "diffusion",
    "hamiltonians",
    "structure_matrix",
    "structure_inverse",
    "structure_matrix_derivative",
    "to_log",
    "from_log",
    "jacobi_identity_defect",
]


@dataclass(frozen=True)
class ModelParams:
    """Interaction rates gamma_i, growth/death rates eta_i and noise intensities sigma_i."""

    gamma1: float
    gamma2: float
    eta1: float
    eta2: float
    sigma1: float
    sigma2: float

    def __post_init__(self):
        for name in ("gamma1", "gamma2", "eta1", "eta2", "sigma1", "sigma2"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
        # zero rates are admitted so the decoupled limit can be exercised
        for name in ("gamma1", "gamma2", "eta1", "eta2"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative, got {getattr(self, name)!r}")

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.gamma1, self.gamma2, self.eta1, self.eta2, self.sigma1, self.sigma2)


#: gamma1 = gamma2 = eta2 = sigma1 = 1, eta1 = 3/2, sigma2 = 0.
LV_PARAMS = ModelParams(gamma1=1.0, gamma2=1.0, eta1=1.5, eta2=1.0, sigma1=1.0, sigma2=0.0)


@dataclass(frozen=True)
class State:
    """Positive phase point (prey x, predator y)."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError(f"state must be finite, got ({self.x!r}, {self.y!r})")
        if self.x <= 0 or self.y <= 0:
            raise DomainError(f"state must be strictly positive, got ({self.x!r}, {self.y!r})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class LogState:
    """Log-populations (u, v) = (ln x, ln y)."""

    u: float
    v: float


class Hamiltonians(NamedTuple):
    H0: float
    H1: float
    grad_H0: np.ndarray
    grad_H1: np.ndarray


def check_coefficient_condition(params: ModelParams, tol: float = 0.0) -> bool:
    """Check gamma1 = gamma2 = eta1 - sigma1^2/2 = eta2 + sigma2^2/2 up to ``tol``.

    Under this condition the solution stays in the open positive quadrant and
    the Lyapunov function V = (x - 1 - ln x) + (y - 1 - ln y) has constant
    generator.
    """
    if tol < 0:
        raise DomainError(f"tol must be non-negative, got {tol!r}")
    p = params
    g = p.gamma1
    return (
        abs(g - p.gamma2) <= tol
        and abs(g - (p.eta1 - p.sigma1**2 / 2)) <= tol
        and abs(g - (p.eta2 + p.sigma2**2 / 2)) <= tol
    )


def drift_stratonovich(s: State, params: ModelParams) -> np.ndarray:
    x, y = s.x, s.y
    p = params
    return np.array([x * (-p.gamma2 * y + p.eta2), y * (p.gamma1 * x - p.eta1)])


def drift_ito(s: State, params: ModelParams) -> np.ndarray:
    """Drift of the equivalent Ito equation (Stratonovich drift plus half sigma^2 z)."""
    x, y = s.x, s.y
    p = params
    return np.array(
        [
            -p.gamma2 * x * y + (p.eta2 + p.sigma2**2 / 2) * x,
            p.gamma1 * x * y - (p.eta1 - p.sigma1**2 / 2) * y,
        ]
    )


def diffusion(s: State, params: ModelParams) -> np.ndarray:
    return np.array([params.sigma2 * s.x, params.sigma1 * s.y])


def hamiltonians(s: State, params: ModelParams) -> Hamiltonians:
    """Values and analytic gradients of the drift and noise Hamiltonians."""
    x, y = s.x, s.y
    p = params
    lx, ly = math.log(x), math.log(y)
    H0 = -p.gamma1 * x + p.eta1 * lx - p.gamma2 * y + p.eta2 * ly
    H1 = -p.sigma1 * lx + p.sigma2 * ly
    grad_H0 = np.array([-p.gamma1 + p.eta1 / x, -p.gamma2 + p.eta2 / y])
    grad_H1 = np.array([-p.sigma1 / x, p.sigma2 / y])
    return Hamiltonians(H0, H1, grad_H0, grad_H1)


def structure_matrix(s: State) -> np.ndarray:
    """K(z) = [[0, -1/(xy)], [1/(xy), 0]], the inverse of the Poisson matrix."""
    k = 1.0 / (s.x * s.y)
    return np.array([[0.0, -k], [k, 0.0]])


def structure_inverse(s: State) -> np.ndarray:
    """B(z) = [[0, xy], [-xy, 0]], the Poisson matrix of the drift/noise vector fields."""
    b = s.x * s.y
    return np.array([[0.0, b], [-b, 0.0]])


def structure_matrix_derivative(s: State) -> np.ndarray:
    """Analytic partials ``D[i, j, k] = d K_ij / d z_k``."""
    x, y = s.x, s.y
    dk_dx = -1.0 / (x * x * y)  # d/dx of 1/(xy)
    dk_dy = -1.0 / (x * y * y)
    D = np.zeros((2, 2, 2))
    D[1, 0, 0], D[1, 0, 1] = dk_dx, dk_dy
    D[0, 1, 0], D[0, 1, 1] = -dk_dx, -dk_dy
    return D


def to_log(s: State) -> LogState:
    return LogState(math.log(s.x), math.log(s.y))


def from_log(l: LogState) -> State:
    return State(math.exp(l.u), math.exp(l.v))


def jacobi_identity_defect(s: State) -> float:
    """Largest cyclic sum dK_ij/dz_k + dK_jk/dz_i + dK_ki/dz_j over all index triples."""
    D = structure_matrix_derivative(s)
    worst = 0.0
    for i in range(2):
        for j in range(2):
            for k in range(2):
                total = D[i, j, k] + D[j, k, i] + D[k, i, j]
                worst = max(worst, abs(total))
    return worst
