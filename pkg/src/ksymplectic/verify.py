"""Numerical checks of the geometric properties of the steppers.

K-symplecticity is checked on the shipped step code by central finite
differences: for a one-step map with Jacobian M the defect is
``max |M^T K(z1) M - K(z0)|`` with K(z) = [[0, -1/(xy)], [1/(xy), 0]].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError
from .integrate import Trajectory, make_step, scheme_config
from .model import ModelParams, State

__all__ = [
    "TwoForm",
    "Triangle",
    "DEFAULT_TRIANGLE",
    "step_jacobian",
    "k_symplectic_defect",
    "two_form",
    "log_area",
    "euclid_area",
    "generator_on_lyapunov",
    "empirical_moments",
    "verification_step",
    "probe_states",
    "defect_scan",
    "DefectRow",
]

OneStep = Callable[[float, float, float, float], np.ndarray]


@dataclass(frozen=True)
class TwoForm:
    """Value of dx ^ dy / (xy), the signed area element in log coordinates."""

    value: float


@dataclass(frozen=True)
class Triangle:
    w1: State
    w2: State
    w3: State

    def vertices(self) -> np.ndarray:
        return np.array([[w.x, w.y] for w in (self.w1, self.w2, self.w3)])


DEFAULT_TRIANGLE = Triangle(State(1.0, 7.0), State(7.0, 1.0), State(2.0, 8.0))


def _k(x: float, y: float) -> np.ndarray:
    k = 1.0 / (x * y)
    return np.array([[0.0, -k], [k, 0.0]])


def step_jacobian(step: OneStep, s: State, h: float, J: float, fd_eps: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``step`` at ``s``, with relative probe size ``fd_eps``."""
    if not fd_eps > 0:
        raise DomainError(f"fd_eps must be positive, got {fd_eps!r}")
    z = np.array([s.x, s.y])
    M = np.empty((2, 2))
    for k in range(2):
        dz = np.zeros(2)
        dz[k] = fd_eps * max(abs(z[k]), 1e-300)
        plus = step(*(z + dz), h, J)
        minus = step(*(z - dz), h, J)
        M[:, k] = (np.asarray(plus) - np.asarray(minus)) / (2 * dz[k])
    return M


def two_form(M: np.ndarray, z0, z1) -> TwoForm:
    """Pull-back factor det(M) x0 y0 / (x1 y1); equals 1 for a K-symplectic step."""
    return TwoForm(float(np.linalg.det(M) * z0[0] * z0[1] / (z1[0] * z1[1])))


def k_symplectic_defect(step: OneStep, s: State, h: float, J: float, fd_eps: float = 1e-6) -> float:
    M = step_jacobian(step, s, h, J, fd_eps)
    z1 = np.asarray(step(s.x, s.y, h, J), dtype=float)
    defect = float(np.abs(M.T @ _k(*z1) @ M - _k(s.x, s.y)).max())
    # in two dimensions M^T K M = det(M) K, which gives a second route
    via_det = abs(np.linalg.det(M) - z1[0] * z1[1] / (s.x * s.y)) / abs(z1[0] * z1[1])
    if not math.isclose(defect, via_det, rel_tol=1e-6, abs_tol=1e-9):
        raise ArithmeticError(f"defect routes disagree: {defect!r} vs {via_det!r}")
    return defect


def _shoelace(points: np.ndarray) -> float:
    (x1, y1), (x2, y2), (x3, y3) = points
    return 0.5 * abs((x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1))


def log_area(tri: Triangle) -> float:
    """Area of the triangle spanned by the log images of the vertices."""
    return _shoelace(np.log(tri.vertices()))


def euclid_area(tri: Triangle) -> float:
    return _shoelace(tri.vertices())


def triangle_areas(xs: np.ndarray, ys: np.ndarray, log: bool = False) -> np.ndarray:
    """Shoelace areas for vertex arrays of shape (3, m); one area per column."""
    if log:
        xs, ys = np.log(xs), np.log(ys)
    return 0.5 * np.abs((xs[1] - xs[0]) * (ys[2] - ys[0]) - (xs[2] - xs[0]) * (ys[1] - ys[0]))


def generator_on_lyapunov(s: State, p: ModelParams) -> float:
    """Ito generator applied to V(x, y) = (x - 1 - ln x) + (y - 1 - ln y).

    When the coefficient condition holds this is the constant
    (sigma1^2 + sigma2^2) / 2.
    """
    x, y = s.x, s.y
    bx = -p.gamma2 * x * y + (p.eta2 + p.sigma2**2 / 2) * x
    by = p.gamma1 * x * y - (p.eta1 - p.sigma1**2 / 2) * y
    Vx, Vy = 1 - 1 / x, 1 - 1 / y
    Vxx, Vyy = 1 / (x * x), 1 / (y * y)
    # V has no mixed second derivative, so the sigma1 sigma2 xy term drops
    return bx * Vx + by * Vy + 0.5 * p.sigma2**2 * x * x * Vxx + 0.5 * p.sigma1**2 * y * y * Vyy


class MomentSeries(NamedTuple):
    times: np.ndarray
    means: np.ndarray
    max: float


def empirical_moments(trajs: Sequence[Trajectory], p: float) -> MomentSeries:
    """Monte Carlo mean of X_n^p + Y_n^p at every grid time, and its maximum."""
    if p < 1:
        raise DomainError(f"moment order must be >= 1, got {p!r}")
    trajs = list(trajs)
    if not trajs:
        raise DomainError("need at least one trajectory")
    times = trajs[0].times
    for tr in trajs[1:]:
        if len(tr.times) != len(times) or not np.array_equal(tr.times, times):
            raise DomainError("trajectories do not share a time grid")
    X = np.stack([tr.x for tr in trajs])
    Y = np.stack([tr.y for tr in trajs])
    means = (X**p + Y**p).mean(axis=0)
    return MomentSeries(times, means, float(means.max()))


# ---------------------------------------------------------------------------
# probe-grid scans


def verification_step(name, params: ModelParams, a11=None, b11=None) -> OneStep:
    """One-step map with a stage tolerance tight enough for finite differencing."""
    return make_step(scheme_config(name, a11, b11, fp_tol=1e-14, fp_max_iter=1000), params)


def probe_states(n: int = 20, seed: int = 0, low: float = 0.1, high: float = 10.0) -> list[State]:
    """Log-uniform random states in [low, high]^2."""
    rng = np.random.default_rng(seed)
    pts = np.exp(rng.uniform(math.log(low), math.log(high), size=(n, 2)))
    return [State(float(a), float(b)) for a, b in pts]


class DefectRow(NamedTuple):
    scheme: str
    x: float
    y: float
    h: float
    J: float
    defect: float


def defect_scan(
    schemes: Iterable[str],
    states: Sequence[State],
    h_list: Iterable[float],
    params: ModelParams,
) -> list[DefectRow]:
    """Defect at every (scheme, state, h, J) with J in {0, sqrt(h), -sqrt(h)}."""
    rows = []
    h_list = list(h_list)
    for name in schemes:
        step = verification_step(name, params)
        for h in h_list:
            r = math.sqrt(h)
            for s in states:
                for J in (0.0, r, -r):
                    rows.append(DefectRow(str(name), s.x, s.y, h, J, k_symplectic_defect(step, s, h, J)))
    return rows
