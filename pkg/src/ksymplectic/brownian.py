"""Seeded Wiener increments on uniform grids, with exact block coarsening.

Every path is generated from its own Philox counter-based stream keyed by
``(seed, path_id)``, so paths can be produced in any order or in parallel
with identical results.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError

__all__ = ["BrownianGrid", "sample", "sample_batch", "coarsen", "coarsen_increments", "dump_csv"]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class BrownianGrid:
    T: float
    n_steps: int
    increments: np.ndarray
    seed: int = 0
    path_id: int = 0

    @property
    def h(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(self.n_steps + 1)

    def path(self) -> np.ndarray:
        """W at the grid nodes, starting from W(0) = 0."""
        return np.concatenate(([0.0], np.cumsum(self.increments)))


def _generator(seed: int, path_id: int) -> np.random.Generator:
    key = np.array([seed & _MASK64, path_id & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _check(T: float, n_steps: int) -> None:
    if not (math.isfinite(T) and T > 0):
        raise DomainError(f"horizon T must be positive, got {T!r}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise DomainError(f"n_steps must be a positive integer, got {n_steps!r}")


def sample(T: float, n_steps: int, seed: int, path_id: int) -> BrownianGrid:
    """Draw n_steps increments sqrt(h) * xi with xi ~ N(0, 1) for stream (seed, path_id)."""
    _check(T, n_steps)
    n_steps = int(n_steps)
    h = T / n_steps
    xi = _generator(seed, path_id).standard_normal(n_steps)
    inc = math.sqrt(h) * xi
    inc.setflags(write=False)
    return BrownianGrid(float(T), n_steps, inc, seed, path_id)


def sample_batch(T: float, n_steps: int, seed: int, path_ids) -> np.ndarray:
    """Increments for several paths stacked as rows; row k equals ``sample(..., path_ids[k])``."""
    _check(T, n_steps)
    ids = list(path_ids)
    out = np.empty((len(ids), int(n_steps)))
    scale = math.sqrt(T / int(n_steps))
    for row, pid in enumerate(ids):
        out[row] = scale * _generator(seed, pid).standard_normal(int(n_steps))
    return out


def coarsen_increments(increments: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` increments along the last axis."""
    n = increments.shape[-1]
    if int(factor) != factor or factor < 1 or n % factor:
        raise DomainError(f"factor {factor!r} does not divide {n} steps")
    factor = int(factor)
    if factor == 1:
        return increments.copy()
    return increments.reshape(*increments.shape[:-1], n // factor, factor).sum(axis=-1)


def coarsen(g: BrownianGrid, factor: int) -> BrownianGrid:
    inc = coarsen_increments(np.asarray(g.increments), factor)
    inc.setflags(write=False)
    return BrownianGrid(g.T, g.n_steps // int(factor), inc, g.seed, g.path_id)


def dump_csv(g: BrownianGrid, path) -> None:
    """Write the increments as ``step,increment`` rows."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "increment"])
        for k, dw in enumerate(g.increments):
            writer.writerow([k, f"{dw:.17g}"])
