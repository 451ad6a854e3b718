"""One-step maps and trajectory drivers.

The structure-preserving steppers work on the log-coordinates u = ln x,
v = ln y where the LV system is a canonical Hamiltonian SDE; stage equations
are solved there by Picard iteration and the update is exponentiated, so the
numerical solution is positive by construction. Euler–Maruyama and Milstein
act on (x, y) directly and may leave the positive quadrant.

All drivers are vectorised over independent paths: arrays of shape ``(n,)``
carry one entry per path. Each path's stage iteration stops on its own
convergence test, so a path's result does not depend on which other paths
share the batch.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .brownian import BrownianGrid
from .errors import ConvergenceError, DomainError
from .model import ModelParams, State
from .tableau import KprkTableau, KrkTableau, StageArrays, Tableau, is_explicit, scheme, stage_order

__all__ = [
    "StepperKind",
    "StepperConfig",
    "Trajectory",
    "scheme_config",
    "krk_step",
    "kprk_step",
    "em_step",
    "milstein_step",
    "make_step",
    "integrate",
    "integrate_paths",
    "SCHEME_NAMES",
]


class StepperKind(enum.Enum):
    KRK = "KRK"
    KPRK = "KPRK"
    EM = "EM"
    MILSTEIN = "Milstein"


@dataclass(frozen=True)
class StepperConfig:
    kind: StepperKind
    tableau: Optional[Tableau] = None
    fp_tol: float = 1e-12
    fp_max_iter: int = 200
    name: str = ""

    def __post_init__(self):
        needs_tableau = self.kind in (StepperKind.KRK, StepperKind.KPRK)
        if needs_tableau != (self.tableau is not None):
            raise DomainError(f"{self.kind.value} stepper {'requires' if needs_tableau else 'takes no'} tableau")
        if self.kind is StepperKind.KRK and not isinstance(self.tableau, KrkTableau):
            raise DomainError("KRK stepper needs a KrkTableau")
        if self.kind is StepperKind.KPRK and not isinstance(self.tableau, KprkTableau):
            raise DomainError("KPRK stepper needs a KprkTableau")
        if not self.fp_tol > 0:
            raise DomainError(f"fp_tol must be positive, got {self.fp_tol!r}")
        if self.fp_max_iter < 1:
            raise DomainError(f"fp_max_iter must be at least 1, got {self.fp_max_iter!r}")

    @property
    def structure_preserving(self) -> bool:
        return self.tableau is not None


SCHEME_NAMES = ("1", "2", "3", "4", "em", "milstein")


def scheme_config(name, a11=None, b11=None, **kwargs) -> StepperConfig:
    """Stepper configuration for a scheme name: ``1``-``4``, ``em`` or ``milstein``."""
    key = str(name).strip().lower()
    if key == "em":
        return StepperConfig(StepperKind.EM, name="em", **kwargs)
    if key == "milstein":
        return StepperConfig(StepperKind.MILSTEIN, name="milstein", **kwargs)
    if key in ("1", "2", "3", "4"):
        t = scheme(int(key), a11, b11) if key == "2" else scheme(int(key))
        kind = StepperKind.KRK if isinstance(t, KrkTableau) else StepperKind.KPRK
        return StepperConfig(kind, t, name=key, **kwargs)
    raise DomainError(f"unknown scheme {name!r}; expected one of {', '.join(SCHEME_NAMES)}")


# ---------------------------------------------------------------------------
# array kernels


def _combine(coeffs: np.ndarray, values: np.ndarray, i: int) -> np.ndarray:
    """sum_j coeffs[i, j] * values[:, j], skipping structural zeros."""
    acc = None
    for j in range(coeffs.shape[1]):
        c = coeffs[i, j]
        if c != 0.0:
            term = c * values[:, j]
            acc = term if acc is None else acc + term
    return np.zeros(values.shape[0]) if acc is None else acc


def _weighted(weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    acc = np.zeros(values.shape[0])
    for j, w in enumerate(weights):
        if w != 0.0:
            acc = acc + w * values[:, j]
    return acc


class _RkKernel:
    """Stage solver and update for a (partitioned) tableau in log coordinates."""

    def __init__(self, tableau: Tableau, params: ModelParams, tol: float, max_iter: int):
        self.arr: StageArrays = tableau.arrays
        self.s = tableau.s
        self.p = params
        self.tol = tol
        self.max_iter = max_iter
        self.order = stage_order(tableau)
        self.b_rows = self.arr.B.sum(axis=1)
        self.bt_rows = self.arr.B_tilde.sum(axis=1)
        self.beta_sum = float(self.arr.beta.sum())
        self.beta_tilde_sum = float(self.arr.beta_tilde.sum())

    # -dH0/dv and dH0/du in log coordinates, i.e. the du and dv drifts
    def _fu(self, v):
        return -self.p.gamma2 * np.exp(v) + self.p.eta2

    def _fv(self, u):
        return self.p.gamma1 * np.exp(u) - self.p.eta1

    def _stages_explicit(self, U, V, h, cu, cv):
        n = U.shape[0]
        u = np.empty((n, self.s))
        v = np.empty((n, self.s))
        fu = np.empty((n, self.s))
        fv = np.empty((n, self.s))
        A, At = self.arr.A, self.arr.A_tilde
        for var, i in self.order:
            if var == "x":
                u[:, i] = U + h * _combine(A, fu, i) + cu[:, i]
                fv[:, i] = self._fv(u[:, i])
            else:
                v[:, i] = V + h * _combine(At, fv, i) + cv[:, i]
                fu[:, i] = self._fu(v[:, i])
        return u, v, 0

    def _stages_implicit(self, U, V, h, cu, cv, warm):
        n = U.shape[0]
        s = self.s
        A, At = self.arr.A, self.arr.A_tilde
        if warm is None:
            u = np.repeat(U[:, None], s, axis=1)
            v = np.repeat(V[:, None], s, axis=1)
        else:
            u = U[:, None] + warm[0]
            v = V[:, None] + warm[1]
        active = np.arange(n)
        residual = math.inf
        for sweep in range(1, self.max_iter + 1):
            ua, va = u[active], v[active]
            Ua, Va = U[active], V[active]
            fu = self._fu(va)
            u_new = np.empty_like(ua)
            for i in range(s):
                u_new[:, i] = Ua + h * _combine(A, fu, i) + cu[active, i]
            fv = self._fv(u_new)
            v_new = np.empty_like(va)
            for i in range(s):
                v_new[:, i] = Va + h * _combine(At, fv, i) + cv[active, i]
            delta = np.maximum(np.abs(u_new - ua).max(axis=1), np.abs(v_new - va).max(axis=1))
            if not np.all(np.isfinite(delta)):
                raise ConvergenceError(math.inf, sweep)
            u[active] = u_new
            v[active] = v_new
            residual = float(delta.max())
            active = active[delta > self.tol]
            if active.size == 0:
                return u, v, sweep
        raise ConvergenceError(residual, self.max_iter)

    def step(self, X, Y, h, J, warm=None):
        """Advance arrays (X, Y) by one step; returns (X1, Y1, stage offsets for warm start)."""
        U, V = np.log(X), np.log(Y)
        cu = (self.p.sigma2 * J)[:, None] * self.b_rows[None, :]
        cv = (self.p.sigma1 * J)[:, None] * self.bt_rows[None, :]
        if self.order is not None:
            u, v, _ = self._stages_explicit(U, V, h, cu, cv)
        else:
            u, v, _ = self._stages_implicit(U, V, h, cu, cv, warm)
        dU = h * _weighted(self.arr.alpha, self._fu(v)) + self.p.sigma2 * J * self.beta_sum
        dV = h * _weighted(self.arr.alpha_tilde, self._fv(u)) + self.p.sigma1 * J * self.beta_tilde_sum
        X1 = X * np.exp(dU)
        Y1 = Y * np.exp(dV)
        return X1, Y1, (u - U[:, None], v - V[:, None])


def _em_arrays(X, Y, h, J, p: ModelParams):
    dx = -p.gamma2 * X * Y + (p.eta2 + p.sigma2**2 / 2) * X
    dy = p.gamma1 * X * Y - (p.eta1 - p.sigma1**2 / 2) * Y
    X1 = X + h * dx
    Y1 = Y + h * dy + p.sigma1 * Y * J
    if p.sigma2 != 0.0:
        X1 = X1 + p.sigma2 * X * J
    return X1, Y1


def _milstein_arrays(X, Y, h, J, p: ModelParams):
    dx = -p.gamma2 * X * Y + p.eta2 * X
    dy = p.gamma1 * X * Y - p.eta1 * Y
    X1 = X + h * dx
    Y1 = Y + h * dy + p.sigma1 * Y * J + 0.5 * p.sigma1**2 * Y * J**2
    if p.sigma2 != 0.0:
        X1 = X1 + p.sigma2 * X * J + 0.5 * p.sigma2**2 * X * J**2
    return X1, Y1


BatchStep = Callable[..., tuple]


def _batch_stepper(cfg: StepperConfig, params: ModelParams) -> BatchStep:
    if cfg.kind is StepperKind.EM:
        return lambda X, Y, h, J, warm=None: (*_em_arrays(X, Y, h, J, params), None)
    if cfg.kind is StepperKind.MILSTEIN:
        return lambda X, Y, h, J, warm=None: (*_milstein_arrays(X, Y, h, J, params), None)
    return _RkKernel(cfg.tableau, params, cfg.fp_tol, cfg.fp_max_iter).step


def _scalar_rk_step(s: State, cfg: StepperConfig, p: ModelParams, h: float, J: float) -> State:
    kernel = _RkKernel(cfg.tableau, p, cfg.fp_tol, cfg.fp_max_iter)
    X1, Y1, _ = kernel.step(np.array([s.x]), np.array([s.y]), h, np.array([float(J)]))
    return State(float(X1[0]), float(Y1[0]))


def krk_step(s: State, t: KrkTableau, p: ModelParams, h: float, J: float, cfg: StepperConfig | None = None) -> State:
    """One step of the exponential-form stochastic KRK method."""
    if h < 0:
        raise DomainError(f"step size must be non-negative, got {h!r}")
    base = cfg if cfg is not None else StepperConfig(StepperKind.KRK, t)
    cfg = replace(base, kind=StepperKind.KRK, tableau=t)
    return _scalar_rk_step(s, cfg, p, h, J)


def kprk_step(s: State, t: KprkTableau, p: ModelParams, h: float, J: float, cfg: StepperConfig | None = None) -> State:
    """One step of the exponential-form stochastic KPRK method.

    Tableaus whose stage dependencies admit an ordering are evaluated by
    forward substitution; the rest go through Picard iteration.
    """
    if h < 0:
        raise DomainError(f"step size must be non-negative, got {h!r}")
    base = cfg if cfg is not None else StepperConfig(StepperKind.KPRK, t)
    cfg = replace(base, kind=StepperKind.KPRK, tableau=t)
    return _scalar_rk_step(s, cfg, p, h, J)


def em_step(s: State, p: ModelParams, h: float, J: float) -> np.ndarray:
    """Euler–Maruyama on the Ito form. Returns a raw vector; positivity is not guaranteed."""
    X1, Y1 = _em_arrays(s.x, s.y, h, J, p)
    return np.array([X1, Y1], dtype=float)


def milstein_step(s: State, p: ModelParams, h: float, J: float) -> np.ndarray:
    """Milstein: Stratonovich drift plus the sigma^2 J^2 / 2 correction. Raw vector output."""
    X1, Y1 = _milstein_arrays(s.x, s.y, h, J, p)
    return np.array([X1, Y1], dtype=float)


def make_step(cfg: StepperConfig, params: ModelParams) -> Callable[[float, float, float, float], np.ndarray]:
    """Scalar one-step map ``(x, y, h, J) -> array([x1, y1])`` for verification code.

    The map accepts any real (x, y); positivity is only needed for the
    structure-preserving kinds, which take logarithms.
    """
    stepper = _batch_stepper(cfg, params)

    def step(x: float, y: float, h: float, J: float) -> np.ndarray:
        X1, Y1, _ = stepper(np.array([float(x)]), np.array([float(y)]), h, np.array([float(J)]))
        return np.array([X1[0], Y1[0]])

    return step


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States on a uniform time grid.

    ``first_violation`` is the index of the first non-positive (or non-finite)
    state, which can only occur for Euler–Maruyama and Milstein.
    """

    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    first_violation: Optional[int] = None

    @property
    def states(self) -> list[State]:
        return [State(float(a), float(b)) for a, b in zip(self.x, self.y)]

    @property
    def positive(self) -> bool:
        return self.first_violation is None

    def __len__(self) -> int:
        return len(self.times)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            write_trajectory_csv(self, fh)


def write_trajectory_csv(traj: Trajectory, fh, header_lines=()) -> None:
    for line in header_lines:
        fh.write(f"# {line}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t", "x", "y"])
    for t, x, y in zip(traj.times, traj.x, traj.y):
        writer.writerow([f"{t:.17g}", f"{x:.17g}", f"{y:.17g}"])


@dataclass(frozen=True, eq=False)
class PathBatch:
    """States of many paths recorded at selected step indices."""

    record: np.ndarray  # step indices, shape (m,)
    x: np.ndarray  # shape (n_paths, m)
    y: np.ndarray
    first_violation: np.ndarray  # shape (n_paths,), -1 when none


def integrate_paths(
    x0,
    y0,
    increments: np.ndarray,
    h: float,
    cfg: StepperConfig,
    params: ModelParams,
    record=None,
) -> PathBatch:
    """Integrate ``n`` paths driven by the rows of ``increments`` (shape ``(n, N)``).

    ``record`` lists the step indices (0..N) to keep; by default only the
    endpoint. Stage iterations are warm-started from the previous step.
    """
    inc = np.atleast_2d(np.asarray(increments, dtype=float))
    n, N = inc.shape
    X = np.broadcast_to(np.asarray(x0, dtype=float), (n,)).copy()
    Y = np.broadcast_to(np.asarray(y0, dtype=float), (n,)).copy()
    rec = np.array([N] if record is None else sorted(set(int(k) for k in record)), dtype=int)
    if rec.size and (rec[0] < 0 or rec[-1] > N):
        raise DomainError(f"record indices must lie in [0, {N}]")
    xs = np.empty((n, rec.size))
    ys = np.empty((n, rec.size))
    first = np.full(n, -1, dtype=int)
    stepper = _batch_stepper(cfg, params)
    check_sign = not cfg.structure_preserving

    slot = 0
    if rec.size and rec[0] == 0:
        xs[:, 0], ys[:, 0] = X, Y
        slot = 1
    warm = None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(N):
            try:
                X, Y, warm = stepper(X, Y, h, inc[:, k], warm)
            except ConvergenceError as exc:
                raise exc.at_step(k) from None
            if check_sign:
                bad = ~((X > 0) & (Y > 0)) & (first < 0)
                first[bad] = k + 1
            while slot < rec.size and rec[slot] == k + 1:
                xs[:, slot], ys[:, slot] = X, Y
                slot += 1
    return PathBatch(rec, xs, ys, first)


def integrate(initial: State, g: BrownianGrid, cfg: StepperConfig, p: ModelParams) -> Trajectory:
    """Apply the configured one-step map along every increment of ``g``."""
    N = g.n_steps
    batch = integrate_paths(initial.x, initial.y, np.asarray(g.increments)[None, :], g.h, cfg, p, record=range(N + 1))
    first = int(batch.first_violation[0])
    return Trajectory(g.times, batch.x[0], batch.y[0], None if first < 0 else first)
