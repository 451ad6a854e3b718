"""Monte Carlo studies: strong L1 convergence, long-time error table, phase area.

All schemes in a study see the same Brownian paths. Paths are drawn once on
the finest (reference) grid and block-summed onto each coarser grid, and the
reference solution is computed on the fine grid itself. Work is split into
fixed-size chunks of path ids, so the output does not depend on the number
of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .brownian import BrownianGrid, coarsen_increments, sample, sample_batch
from .errors import DomainError
from .integrate import StepperConfig, Trajectory, integrate, integrate_paths, scheme_config
from .model import LV_PARAMS, ModelParams, State
from .verify import MomentSeries, Triangle, empirical_moments, triangle_areas

__all__ = [
    "DEFAULT_INITIAL",
    "DESK",
    "FULL_SCALE",
    "StudySettings",
    "ConvergenceRow",
    "ConvergenceReport",
    "L1Result",
    "PhaseAreaReport",
    "reference_solution",
    "l1_error",
    "convergence_study",
    "error_table",
    "phase_area_study",
    "moment_study",
    "fit_slope",
    "format_float",
]

DEFAULT_INITIAL = State(1.0, 2.0)
CHUNK = 25


@dataclass(frozen=True)
class StudySettings:
    n_paths: int
    h_list: tuple[float, ...]
    h_ref: float
    T: float = 1.0


DESK = StudySettings(200, tuple(2.0**-i for i in range(4, 9)), 2.0**-11)
FULL_SCALE = StudySettings(1000, tuple(2.0**-i for i in range(4, 10)), 2.0**-12)


def format_float(value: float) -> str:
    return f"{value:.17g}"


def _steps(T: float, h: float, what: str = "T") -> int:
    if not (h > 0 and T > 0):
        raise DomainError(f"need positive step and horizon, got h={h!r}, {what}={T!r}")
    n = T / h
    N = round(n)
    if N < 1 or abs(n - N) > 1e-9 * max(1.0, n):
        raise DomainError(f"{what}={T!r} is not a whole number of steps of size {h!r}")
    return N


def _factor(h: float, h_ref: float) -> int:
    r = h / h_ref
    f = round(r)
    if f < 1 or abs(r - f) > 1e-9 * r:
        raise DomainError(f"step {h!r} is not an integer multiple of the reference step {h_ref!r}")
    return f


def _chunks(n_paths: int) -> list[range]:
    return [range(a, min(a + CHUNK, n_paths)) for a in range(0, n_paths, CHUNK)]


def _run_chunks(fn, n_paths: int, threads: int) -> list:
    chunks = _chunks(n_paths)
    if threads <= 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def _config(scheme) -> StepperConfig:
    return scheme if isinstance(scheme, StepperConfig) else scheme_config(scheme)


def _label(scheme) -> str:
    return scheme.name if isinstance(scheme, StepperConfig) else str(scheme).lower()


# ---------------------------------------------------------------------------
# convergence


class L1Result(NamedTuple):
    error: float
    stderr: float
    violations: int


class ConvergenceRow(NamedTuple):
    h: float
    l1_error: float
    stderr: float
    violations: int


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    scheme: str
    rows: list[ConvergenceRow]
    slope: float
    r_squared: float
    fit_residual: float
    degenerate: bool = False


def fit_slope(h: Sequence[float], err: Sequence[float]) -> tuple[float, float, float, bool]:
    """Least-squares slope of log2(err) against log2(h).

    Returns ``(slope, r_squared, rms_residual, degenerate)``; a fit is
    degenerate when some error is zero or non-finite, in which case the
    numeric fields are NaN.
    """
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if len(h) < 2 or not np.all(np.isfinite(err)) or np.any(err <= 0):
        return math.nan, math.nan, math.nan, True
    lx, ly = np.log2(h), np.log2(err)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else math.nan
    return float(slope), r2, float(np.sqrt((resid**2).mean())), False


def reference_solution(initial: State, g_fine: BrownianGrid, p: ModelParams, scheme="4") -> Trajectory:
    """Reference trajectory on the fine grid (scheme 4 unless overridden)."""
    return integrate(initial, g_fine, _config(scheme), p)


def _endpoint_errors(schemes, h_list, initial, params, n_paths, seed, T, h_ref, reference, threads):
    """Per-path endpoint L1 deviations, keyed by (scheme label, h)."""
    N_ref = _steps(T, h_ref, "T")
    factors = [_factor(h, h_ref) for h in h_list]
    for h, f in zip(h_list, factors):
        if N_ref % f:
            raise DomainError(f"T={T!r} is not a whole number of steps of size {h!r}")
    ref_cfg = _config(reference)
    configs = [(_label(s), _config(s)) for s in schemes]

    def work(ids: range):
        inc = sample_batch(T, N_ref, seed, ids)
        ref = integrate_paths(initial.x, initial.y, inc, h_ref, ref_cfg, params)
        rx, ry = ref.x[:, -1], ref.y[:, -1]
        out = {}
        for h, f in zip(h_list, factors):
            coarse = coarsen_increments(inc, f)
            for label, cfg in configs:
                res = integrate_paths(initial.x, initial.y, coarse, h, cfg, params)
                X, Y = res.x[:, -1], res.y[:, -1]
                err = np.abs(X - rx) + np.abs(Y - ry)
                bad = ~((X > 0) & (Y > 0))
                out[(label, h)] = (err, bad)
        return out

    parts = _run_chunks(work, n_paths, threads)
    merged = {}
    for key in parts[0]:
        merged[key] = (
            np.concatenate([p[key][0] for p in parts]),
            np.concatenate([p[key][1] for p in parts]),
        )
    return merged


def _summarise(err: np.ndarray, bad: np.ndarray) -> L1Result:
    n = err.size
    with np.errstate(invalid="ignore", over="ignore"):
        mean = float(err.mean())
        std = float(err.std(ddof=1)) if n > 1 else math.nan
    return L1Result(mean, std / math.sqrt(n), int(bad.sum()))


def l1_error(
    scheme,
    h: float,
    initial: State = DEFAULT_INITIAL,
    p: ModelParams = LV_PARAMS,
    n_paths: int = DESK.n_paths,
    seed: int = 42,
    T: float = 1.0,
    h_ref: float = DESK.h_ref,
    reference="4",
    threads: int = 1,
) -> L1Result:
    """Monte Carlo estimate of E[|x(T) - X_N| + |y(T) - Y_N|] against the coupled reference."""
    if n_paths < 2:
        raise DomainError(f"need at least two paths, got {n_paths!r}")
    merged = _endpoint_errors([scheme], [h], initial, p, n_paths, seed, T, h_ref, reference, threads)
    return _summarise(*merged[(_label(scheme), h)])


def convergence_study(
    schemes: Iterable,
    h_list: Iterable[float] = DESK.h_list,
    initial: State = DEFAULT_INITIAL,
    p: ModelParams = LV_PARAMS,
    n_paths: int = DESK.n_paths,
    seed: int = 42,
    T: float = 1.0,
    h_ref: float = DESK.h_ref,
    reference="4",
    threads: int = 1,
) -> dict[str, ConvergenceReport]:
    """L1 errors at every step size for every scheme on shared paths, with log-log slope fits."""
    if n_paths < 2:
        raise DomainError(f"need at least two paths, got {n_paths!r}")
    schemes = list(schemes)
    h_list = sorted(set(float(h) for h in h_list), reverse=True)
    merged = _endpoint_errors(schemes, h_list, initial, p, n_paths, seed, T, h_ref, reference, threads)
    reports = {}
    for s in schemes:
        label = _label(s)
        rows = []
        for h in h_list:
            r = _summarise(*merged[(label, h)])
            rows.append(ConvergenceRow(h, r.error, r.stderr, r.violations))
        slope, r2, resid, degenerate = fit_slope([r.h for r in rows], [r.l1_error for r in rows])
        reports[label] = ConvergenceReport(label, rows, slope, r2, resid, degenerate)
    return reports


# ---------------------------------------------------------------------------
# long-time error table


class TableRow(NamedTuple):
    scheme: str
    T: float
    l1_error: float
    stderr: float
    violations: int


def error_table(
    schemes: Iterable,
    T_list: Iterable[float] = (0.5, 1.0, 5.0, 10.0, 20.0),
    h: float = 2.0**-6,
    initial: State = DEFAULT_INITIAL,
    p: ModelParams = LV_PARAMS,
    n_paths: int = DESK.n_paths,
    seed: int = 42,
    h_ref: float = DESK.h_ref,
    reference="4",
    threads: int = 1,
) -> list[TableRow]:
    """L1 errors at several horizons from one set of paths run to the longest horizon."""
    schemes = list(schemes)
    T_list = sorted(set(float(T) for T in T_list))
    T_max = T_list[-1]
    f = _factor(h, h_ref)
    N_ref = _steps(T_max, h_ref, "T")
    rec_ref = [_steps(T, h_ref, "T") for T in T_list]
    rec = [_steps(T, h, "T") for T in T_list]
    ref_cfg = _config(reference)
    configs = [(_label(s), _config(s)) for s in schemes]

    def work(ids: range):
        inc = sample_batch(T_max, N_ref, seed, ids)
        ref = integrate_paths(initial.x, initial.y, inc, h_ref, ref_cfg, p, record=rec_ref)
        coarse = coarsen_increments(inc, f)
        out = {}
        for label, cfg in configs:
            res = integrate_paths(initial.x, initial.y, coarse, h, cfg, p, record=rec)
            with np.errstate(invalid="ignore", over="ignore"):
                err = np.abs(res.x - ref.x) + np.abs(res.y - ref.y)
            bad = ~((res.x > 0) & (res.y > 0))
            out[label] = (err, bad)
        return out

    parts = _run_chunks(work, n_paths, threads)
    rows = []
    for label, _ in configs:
        err = np.concatenate([part[label][0] for part in parts])
        bad = np.concatenate([part[label][1] for part in parts])
        for k, T in enumerate(T_list):
            r = _summarise(err[:, k], bad[:, k])
            rows.append(TableRow(label, T, r.error, r.stderr, r.violations))
    return rows


# ---------------------------------------------------------------------------
# phase area


@dataclass(frozen=True, eq=False)
class PhaseAreaReport:
    times: np.ndarray
    area_ref: np.ndarray
    log_area_ref: np.ndarray
    area: dict[str, np.ndarray] = field(default_factory=dict)
    abs_error: dict[str, np.ndarray] = field(default_factory=dict)
    log_area: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def schemes(self) -> list[str]:
        return list(self.area)

    def max_error(self, scheme: str) -> float:
        return float(self.abs_error[scheme].max())

    def log_area_drift(self, scheme: str) -> float:
        """Largest relative departure of the log-area from its initial value."""
        la = self.log_area[scheme]
        return float(np.abs(la - la[0]).max() / la[0])


def phase_area_study(
    tri: Triangle,
    h: float = 2.0**-5,
    T: float = 0.2,
    seed: int = 42,
    schemes: Iterable = ("1", "milstein"),
    p: ModelParams = LV_PARAMS,
    h_ref: float = 2.0**-12,
    path_id: int = 0,
    reference="4",
) -> PhaseAreaReport:
    """Propagate the triangle's vertices on one shared path and track its area.

    The horizon is truncated to the last whole step not beyond ``T``.
    """
    if not (h > 0 and T > 0):
        raise DomainError(f"need positive h and T, got h={h!r}, T={T!r}")
    n = math.floor(T / h + 1e-9)
    if n < 1:
        raise DomainError(f"horizon {T!r} shorter than one step {h!r}")
    f = _factor(h, h_ref)
    g = sample(n * h, n * f, seed, path_id)
    inc = np.repeat(np.asarray(g.increments)[None, :], 3, axis=0)
    x0 = np.array([tri.w1.x, tri.w2.x, tri.w3.x])
    y0 = np.array([tri.w1.y, tri.w2.y, tri.w3.y])
    ref = integrate_paths(x0, y0, inc, h_ref, _config(reference), p, record=range(0, n * f + 1, f))
    coarse = coarsen_increments(inc, f)
    area_ref = triangle_areas(ref.x, ref.y)
    report = PhaseAreaReport(h * np.arange(n + 1), area_ref, triangle_areas(ref.x, ref.y, log=True))
    for s in schemes:
        label = _label(s)
        res = integrate_paths(x0, y0, coarse, h, _config(s), p, record=range(n + 1))
        a = triangle_areas(res.x, res.y)
        report.area[label] = a
        report.abs_error[label] = np.abs(a - area_ref)
        with np.errstate(invalid="ignore"):
            report.log_area[label] = triangle_areas(res.x, res.y, log=True)
    return report


# ---------------------------------------------------------------------------
# moments


def moment_study(
    scheme="4",
    initial: State = DEFAULT_INITIAL,
    p: ModelParams = LV_PARAMS,
    n_paths: int = 500,
    seed: int = 42,
    T: float = 10.0,
    h: float = 2.0**-5,
    order: float = 2.0,
) -> tuple[MomentSeries, int]:
    """Moment time series of ``n_paths`` trajectories and the number of non-positive states seen."""
    N = _steps(T, h, "T")
    inc = sample_batch(T, N, seed, range(n_paths))
    res = integrate_paths(initial.x, initial.y, inc, h, _config(scheme), p, record=range(N + 1))
    times = h * np.arange(N + 1)
    trajs = [Trajectory(times, res.x[k], res.y[k]) for k in range(n_paths)]
    nonpositive = int((~((res.x > 0) & (res.y > 0))).sum())
    return empirical_moments(trajs, order), nonpositive
