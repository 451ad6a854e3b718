"""Stochastic (partitioned) Runge–Kutta tableaus for the log-coordinate LV system.

Coefficients are held as :class:`fractions.Fraction` so that the symplecticity
and order conditions of the built-in dyadic schemes evaluate to exactly zero.
Float views for the steppers are exposed through the ``arrays`` property.
"""

from __future__ import annotations

import graphlib
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from numbers import Rational
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DomainError, TableauParseError

__all__ = [
    "KrkTableau",
    "KprkTableau",
    "Tableau",
    "krk_symplectic_residual",
    "kprk_symplectic_residual",
    "symplectic_residual",
    "stage_order",
    "order_residual",
    "scheme",
    "krk_to_kprk",
    "is_explicit",
    "parse_tableau",
    "format_tableau",
]

Matrix = tuple[tuple[Fraction, ...], ...]
Vector = tuple[Fraction, ...]


def _frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (Rational, float, str)):
        return Fraction(value)
    if isinstance(value, np.floating):
        return Fraction(float(value))
    if isinstance(value, np.integer):
        return Fraction(int(value))
    raise TypeError(f"cannot use {type(value).__name__} as a tableau coefficient")


def _matrix(rows, s: int, name: str) -> Matrix:
    out = tuple(tuple(_frac(v) for v in row) for row in rows)
    if len(out) != s or any(len(row) != s for row in out):
        raise DomainError(f"{name} must be {s}x{s}")
    return out


def _vector(values, s: int, name: str) -> Vector:
    out = tuple(_frac(v) for v in values)
    if len(out) != s:
        raise DomainError(f"{name} must have length {s}")
    return out


@dataclass(frozen=True)
class StageArrays:
    """Float coefficient arrays in partitioned layout (x-stages use ``A``, ``B``)."""

    A: np.ndarray
    A_tilde: np.ndarray
    B: np.ndarray
    B_tilde: np.ndarray
    alpha: np.ndarray
    alpha_tilde: np.ndarray
    beta: np.ndarray
    beta_tilde: np.ndarray


def _f(values) -> np.ndarray:
    if values and isinstance(values[0], tuple):
        arr = np.array([[float(v) for v in row] for row in values])
    else:
        arr = np.array([float(v) for v in values])
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class KrkTableau:
    """s-stage stochastic KRK method: drift matrix A, noise matrix B, weights alpha, beta."""

    A: Matrix
    B: Matrix
    alpha: Vector
    beta: Vector
    name: str = field(default="", compare=False)

    def __init__(self, A, B, alpha, beta, name: str = ""):
        s = len(A)
        if s < 1:
            raise DomainError("tableau needs at least one stage")
        object.__setattr__(self, "A", _matrix(A, s, "A"))
        object.__setattr__(self, "B", _matrix(B, s, "B"))
        object.__setattr__(self, "alpha", _vector(alpha, s, "alpha"))
        object.__setattr__(self, "beta", _vector(beta, s, "beta"))
        object.__setattr__(self, "name", name)

    @property
    def s(self) -> int:
        return len(self.A)

    @cached_property
    def arrays(self) -> StageArrays:
        A, B = _f(self.A), _f(self.B)
        alpha, beta = _f(self.alpha), _f(self.beta)
        return StageArrays(A, A, B, B, alpha, alpha, beta, beta)


@dataclass(frozen=True)
class KprkTableau:
    """s-stage stochastic KPRK method.

    The untilded arrays drive the x-stages and X-update, the tilded arrays the
    y-stages and Y-update.
    """

    A: Matrix
    A_tilde: Matrix
    B: Matrix
    B_tilde: Matrix
    alpha: Vector
    alpha_tilde: Vector
    beta: Vector
    beta_tilde: Vector
    name: str = field(default="", compare=False)

    def __init__(self, A, A_tilde, B, B_tilde, alpha, alpha_tilde, beta, beta_tilde, name: str = ""):
        s = len(A)
        if s < 1:
            raise DomainError("tableau needs at least one stage")
        for attr, value in (("A", A), ("A_tilde", A_tilde), ("B", B), ("B_tilde", B_tilde)):
            object.__setattr__(self, attr, _matrix(value, s, attr))
        for attr, value in (
            ("alpha", alpha),
            ("alpha_tilde", alpha_tilde),
            ("beta", beta),
            ("beta_tilde", beta_tilde),
        ):
            object.__setattr__(self, attr, _vector(value, s, attr))
        object.__setattr__(self, "name", name)

    @property
    def s(self) -> int:
        return len(self.A)

    @cached_property
    def arrays(self) -> StageArrays:
        return StageArrays(
            _f(self.A),
            _f(self.A_tilde),
            _f(self.B),
            _f(self.B_tilde),
            _f(self.alpha),
            _f(self.alpha_tilde),
            _f(self.beta),
            _f(self.beta_tilde),
        )


Tableau = Union[KrkTableau, KprkTableau]


def _bilinear_max(w1: Vector, M1: Matrix, w2: Vector, M2: Matrix) -> Fraction:
    """max_ij |w1_i M1_ij + w2_j M2_ji - w1_i w2_j|."""
    s = len(w1)
    worst = Fraction(0)
    for i in range(s):
        for j in range(s):
            r = abs(w1[i] * M1[i][j] + w2[j] * M2[j][i] - w1[i] * w2[j])
            worst = max(worst, r)
    return worst


def _krk_residual_exact(t: KrkTableau) -> Fraction:
    return max(
        _bilinear_max(t.alpha, t.A, t.alpha, t.A),
        _bilinear_max(t.alpha, t.B, t.beta, t.A),
        _bilinear_max(t.beta, t.B, t.beta, t.B),
    )


def _kprk_residual_exact(t: KprkTableau) -> Fraction:
    equal_weights = max(
        max(abs(a - b) for a, b in zip(t.alpha, t.alpha_tilde)),
        max(abs(a - b) for a, b in zip(t.beta, t.beta_tilde)),
    )
    return max(
        equal_weights,
        _bilinear_max(t.alpha, t.A_tilde, t.alpha_tilde, t.A),
        _bilinear_max(t.beta, t.A_tilde, t.alpha_tilde, t.B),
        _bilinear_max(t.alpha, t.B_tilde, t.beta_tilde, t.A),
        _bilinear_max(t.beta, t.B_tilde, t.beta_tilde, t.B),
    )


def krk_symplectic_residual(t: KrkTableau) -> float:
    """Largest violation of the three KRK symplecticity identities."""
    return float(_krk_residual_exact(t))


def kprk_symplectic_residual(t: KprkTableau) -> float:
    """Largest violation of the KPRK symplecticity identities (weights equal plus four bilinear families)."""
    return float(_kprk_residual_exact(t))


def symplectic_residual(t: Tableau) -> float:
    if isinstance(t, KprkTableau):
        return kprk_symplectic_residual(t)
    return krk_symplectic_residual(t)


def order_residual(t: Tableau) -> float:
    """Largest deviation of the weight sums from one (the first-order conditions)."""
    weights = [t.alpha, t.beta]
    if isinstance(t, KprkTableau):
        weights += [t.alpha_tilde, t.beta_tilde]
    return float(max(abs(sum(w) - 1) for w in weights))


_HALF = Fraction(1, 2)


def scheme(scheme_id: int, a11=None, b11=None) -> Tableau:
    """Built-in tableaus.

    1: the unique one-stage KRK method (midpoint in log coordinates).
    2: the two-stage diagonally implicit KRK family with free ``a11``, ``b11``
       in (0, 1/2); defaults to (1/8, 1/4).
    3: the one-stage KPRK method, identical to scheme 1.
    4: a two-stage KPRK method that can be evaluated explicitly.
    """
    h = _HALF
    if scheme_id == 1:
        return KrkTableau([[h]], [[h]], [1], [1], name="scheme1")
    if scheme_id == 2:
        a = _frac(Fraction(1, 8) if a11 is None else a11)
        b = _frac(Fraction(1, 4) if b11 is None else b11)
        for label, value in (("a11", a), ("b11", b)):
            if not (0 < value < h):
                raise DomainError(f"{label} must lie in (0, 1/2), got {float(value)!r}")
        return KrkTableau(
            [[a, 0], [2 * a, h - a]],
            [[b, 0], [2 * b, h - b]],
            [2 * a, 1 - 2 * a],
            [2 * b, 1 - 2 * b],
            name="scheme2",
        )
    if scheme_id == 3:
        return KprkTableau([[h]], [[h]], [[h]], [[h]], [1], [1], [1], [1], name="scheme3")
    if scheme_id == 4:
        upper = [[0, 0], [h, h]]
        lower = [[h, 0], [h, 0]]
        w = [h, h]
        return KprkTableau(upper, lower, upper, lower, w, w, w, w, name="scheme4")
    raise DomainError(f"unknown scheme id {scheme_id!r}; expected 1, 2, 3 or 4")


def krk_to_kprk(t: KrkTableau) -> KprkTableau:
    return KprkTableau(t.A, t.A, t.B, t.B, t.alpha, t.alpha, t.beta, t.beta, name=t.name)


def stage_order(t: Tableau) -> list[tuple[str, int]] | None:
    """Order in which stages can be evaluated by forward substitution, or None.

    Nodes are ("x", i) and ("y", i); x-stage i needs y-stage j when A_ij != 0
    and y-stage i needs x-stage j when A~_ij != 0. The noise matrices only
    multiply the increment and create no dependencies.
    """
    A = t.A
    A_tilde = t.A_tilde if isinstance(t, KprkTableau) else t.A
    graph = {}
    for i in range(t.s):
        graph[("x", i)] = {("y", j) for j in range(t.s) if A[i][j] != 0}
        graph[("y", i)] = {("x", j) for j in range(t.s) if A_tilde[i][j] != 0}
    try:
        return list(graphlib.TopologicalSorter(graph).static_order())
    except graphlib.CycleError:
        return None


def is_explicit(t: Tableau) -> bool:
    return stage_order(t) is not None


# ---------------------------------------------------------------------------
# text format

_KRK_SECTIONS = ("A", "B", "alpha", "beta")
_KPRK_SECTIONS = ("A", "A~", "B", "B~", "alpha", "alpha~", "beta", "beta~")


def parse_tableau(text: str) -> Tableau:
    """Parse the sectioned text format.

    Each section starts with a header line (``A``, ``B``, ``alpha``, ``beta`` and,
    for partitioned methods, ``A~``, ``B~``, ``alpha~``, ``beta~``) followed by
    whitespace-separated rows. Entries are read as exact rationals (``1/8``,
    ``0.125``, ``-3``). Blank lines and ``#`` comments are ignored.
    """
    sections: dict[str, list[list[Fraction]]] = {}
    header_line: dict[str, int] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped in _KPRK_SECTIONS:
            if stripped in sections:
                raise TableauParseError(f"duplicate section {stripped!r}", lineno, line.index(stripped) + 1)
            current = stripped
            sections[current] = []
            header_line[current] = lineno
            continue
        if current is None:
            col = len(line) - len(line.lstrip()) + 1
            raise TableauParseError("data before any section header", lineno, col)
        row = []
        pos = 0
        for token in line.split():
            col = line.index(token, pos) + 1
            pos = col - 1 + len(token)
            try:
                row.append(Fraction(token))
            except (ValueError, ZeroDivisionError):
                raise TableauParseError(f"not a number: {token!r}", lineno, col) from None
        sections[current].append(row)

    if not sections:
        raise TableauParseError("empty tableau", 1, 1)
    partitioned = any(name.endswith("~") for name in sections)
    expected = _KPRK_SECTIONS if partitioned else _KRK_SECTIONS
    last_line = max(header_line.values())
    for name in expected:
        if name not in sections:
            raise TableauParseError(f"missing section {name!r}", last_line, 1)
        if not sections[name]:
            raise TableauParseError(f"section {name!r} has no rows", header_line[name], 1)

    s = len(sections["A"])
    values = {}
    for name in expected:
        rows = sections[name]
        line = header_line[name]
        if name.startswith(("alpha", "beta")):
            flat = [v for row in rows for v in row]
            if len(flat) != s:
                raise TableauParseError(f"section {name!r} needs {s} entries, got {len(flat)}", line, 1)
            values[name] = flat
        else:
            if len(rows) != s or any(len(r) != s for r in rows):
                raise TableauParseError(f"section {name!r} must be {s}x{s}", line, 1)
            values[name] = rows

    if partitioned:
        return KprkTableau(*(values[n] for n in _KPRK_SECTIONS), name="file")
    return KrkTableau(*(values[n] for n in _KRK_SECTIONS), name="file")


def _fmt_row(values: Iterable[Fraction]) -> str:
    return " ".join(str(v) for v in values)


def format_tableau(t: Tableau) -> str:
    """Inverse of :func:`parse_tableau`."""
    if isinstance(t, KprkTableau):
        parts: Sequence = (
            ("A", t.A),
            ("A~", t.A_tilde),
            ("B", t.B),
            ("B~", t.B_tilde),
            ("alpha", [t.alpha]),
            ("alpha~", [t.alpha_tilde]),
            ("beta", [t.beta]),
            ("beta~", [t.beta_tilde]),
        )
    else:
        parts = (("A", t.A), ("B", t.B), ("alpha", [t.alpha]), ("beta", [t.beta]))
    lines = []
    for name, rows in parts:
        lines.append(name)
        lines.extend(_fmt_row(r) for r in rows)
    return "\n".join(lines) + "\n"
