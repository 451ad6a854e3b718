"""Command-line driver: ``ksymplectic <subcommand> [flags]``.

Exit codes: 0 success, 1 numerical failure (or failed check), 2 usage or
parse error. CSV goes to ``--output`` (stdout by default) behind ``#`` header
lines echoing the configuration; summaries go to stderr.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

from . import __version__
from .brownian import sample
from .errors import ConvergenceError, DomainError, TableauParseError
from .experiments import (
    DEFAULT_INITIAL,
    DESK,
    FULL_SCALE,
    convergence_study,
    error_table,
    format_float,
    phase_area_study,
)
from .integrate import SCHEME_NAMES, integrate, scheme_config, write_trajectory_csv
from .model import LV_PARAMS, ModelParams, State
from .tableau import is_explicit, order_residual, parse_tableau, scheme, symplectic_residual
from .verify import Triangle, defect_scan, probe_states

CHECK_TOL = 1e-12
_POW = re.compile(r"^\s*([+-]?[\d.]+)\s*(?:\^|\*\*)\s*([+-]?\d+)\s*$")


def real(text: str) -> float:
    """Parse ``0.125``, ``1/8`` or ``2^-3``."""
    m = _POW.match(text)
    try:
        if m:
            return float(m.group(1)) ** int(m.group(2))
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def real_list(text: str) -> list[float]:
    return [real(t) for t in text.split(",") if t.strip()]


def scheme_list(text: str) -> list[str]:
    names = [t.strip().lower() for t in text.split(",") if t.strip()]
    for n in names:
        if n not in SCHEME_NAMES:
            raise argparse.ArgumentTypeError(f"unknown scheme {n!r}; choose from {', '.join(SCHEME_NAMES)}")
    if not names:
        raise argparse.ArgumentTypeError("empty scheme list")
    return names


def scheme_name(text: str) -> str:
    names = scheme_list(text)
    if len(names) != 1:
        raise argparse.ArgumentTypeError(f"expected a single scheme, got {text!r}")
    return names[0]


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _add_common(p: argparse.ArgumentParser, initial: bool = True) -> None:
    g = p.add_argument_group("model")
    for name in ("gamma1", "gamma2", "eta1", "eta2", "sigma1", "sigma2"):
        g.add_argument(f"--{name}", type=real, default=getattr(LV_PARAMS, name))
    if initial:
        g.add_argument("--x0", type=real, default=DEFAULT_INITIAL.x)
        g.add_argument("--y0", type=real, default=DEFAULT_INITIAL.y)
    p.add_argument("--seed", type=int, default=42, help="master seed (default 42)")
    p.add_argument("-o", "--output", type=Path, help="CSV output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ksymplectic",
        description="K-symplectic stochastic Runge-Kutta integrators for the stochastic Lotka-Volterra model",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    tab = sub.add_parser("tableau", help="tableau utilities")
    tab_sub = tab.add_subparsers(dest="tableau_command", required=True)
    chk = tab_sub.add_parser("check", help="evaluate symplecticity and order residuals")
    chk.add_argument("file", nargs="?", type=Path, help="tableau text file")
    chk.add_argument("--builtin", type=int, choices=(1, 2, 3, 4), help="check a built-in scheme")
    chk.add_argument("--a11", type=real, help="scheme 2 free parameter")
    chk.add_argument("--b11", type=real, help="scheme 2 free parameter")

    sim = sub.add_parser("simulate", help="integrate one path and write t,x,y")
    _add_common(sim)
    sim.add_argument("--scheme", type=scheme_name, default="4")
    sim.add_argument("--h", type=real, default=2.0**-5)
    sim.add_argument("--T", type=real, default=1.0)
    sim.add_argument("--path-id", type=int, default=0)
    sim.add_argument("--a11", type=real)
    sim.add_argument("--b11", type=real)

    conv = sub.add_parser("convergence", help="strong L1 convergence study")
    _add_common(conv)
    conv.add_argument("--schemes", type=scheme_list, default=["em", "milstein", "1", "4"])
    conv.add_argument("--h-list", type=real_list)
    conv.add_argument("--h-ref", type=real)
    conv.add_argument("--n-paths", type=positive_int)
    conv.add_argument("--T", type=real, default=1.0)
    conv.add_argument("--reference", type=scheme_name, default="4")
    conv.add_argument("--paper-scale", action="store_true", help="1000 paths, h_ref = 2^-12, h down to 2^-9")
    conv.add_argument("--threads", type=positive_int, default=1)

    table = sub.add_parser("table", help="L1 errors over several horizons")
    _add_common(table)
    table.add_argument("--schemes", type=scheme_list, default=["em", "milstein", "1", "4"])
    table.add_argument("--T", type=real_list, default=[0.5, 1.0, 5.0, 10.0, 20.0])
    table.add_argument("--h", type=real, default=2.0**-6)
    table.add_argument("--h-ref", type=real)
    table.add_argument("--n-paths", type=positive_int)
    table.add_argument("--reference", type=scheme_name, default="4")
    table.add_argument("--paper-scale", action="store_true")
    table.add_argument("--threads", type=positive_int, default=1)

    area = sub.add_parser("phase-area", help="triangle phase-area evolution")
    _add_common(area, initial=False)
    area.add_argument("--schemes", type=scheme_list, default=["1", "milstein"])
    area.add_argument("--h", type=real, default=2.0**-5)
    area.add_argument("--T", type=real, default=0.2)
    area.add_argument("--h-ref", type=real, default=2.0**-12)
    area.add_argument("--path-id", type=int, default=0)
    area.add_argument("--reference", type=scheme_name, default="4")
    area.add_argument(
        "--triangle",
        type=real_list,
        default=[1, 7, 7, 1, 2, 8],
        help="six numbers x1,y1,x2,y2,x3,y3 (default the triangle (1,7),(7,1),(2,8))",
    )

    dfc = sub.add_parser("defect", help="finite-difference K-symplecticity defect scan")
    _add_common(dfc)
    dfc.add_argument("--schemes", type=scheme_list, default=["1", "2", "3", "4", "em", "milstein"])
    dfc.add_argument("--h-list", type=real_list, default=[2.0**-4, 2.0**-6])
    dfc.add_argument("--n-states", type=positive_int, default=20)
    return parser


@contextmanager
def _sink(path: Path | None):
    if path is None:
        yield sys.stdout
    else:
        with path.open("w", newline="") as fh:
            yield fh


def _header(fh, args, keys) -> None:
    fh.write(f"# seed={args.seed}\n")
    for key in keys:
        value = getattr(args, key)
        if isinstance(value, float):
            value = format_float(value)
        elif isinstance(value, list):
            value = ",".join(format_float(v) if isinstance(v, float) else str(v) for v in value)
        fh.write(f"# {key}={value}\n")


_MODEL_KEYS = ("gamma1", "gamma2", "eta1", "eta2", "sigma1", "sigma2", "x0", "y0")


def _params(args) -> ModelParams:
    return ModelParams(args.gamma1, args.gamma2, args.eta1, args.eta2, args.sigma1, args.sigma2)


def _initial(args) -> State:
    return State(args.x0, args.y0)


def _err(msg: str) -> None:
    print(f"ksymplectic: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------


def cmd_tableau_check(args, parser) -> int:
    if (args.file is None) == (args.builtin is None):
        parser.error("tableau check needs exactly one of FILE or --builtin")
    if args.builtin is not None:
        if args.builtin != 2 and (args.a11 is not None or args.b11 is not None):
            parser.error("--a11/--b11 only apply to --builtin 2")
        try:
            t = scheme(args.builtin, args.a11, args.b11)
        except DomainError as exc:
            parser.error(str(exc))
        label = f"scheme {args.builtin}"
    else:
        if args.a11 is not None or args.b11 is not None:
            parser.error("--a11/--b11 only apply to --builtin 2")
        try:
            text = args.file.read_text()
        except OSError as exc:
            _err(f"cannot read {args.file}: {exc.strerror}")
            return 2
        try:
            t = parse_tableau(text)
        except TableauParseError as exc:
            _err(f"{args.file}: {exc}")
            return 2
        except DomainError as exc:
            _err(f"{args.file}: {exc}")
            return 2
        label = str(args.file)
    sym = symplectic_residual(t)
    order = order_residual(t)
    ok = sym <= CHECK_TOL and order <= CHECK_TOL
    kind = "KPRK" if hasattr(t, "A_tilde") else "KRK"
    print(f"tableau: {label} ({kind}, {t.s} stage{'s' if t.s > 1 else ''})")
    print(f"symplectic_residual: {sym:.3e}")
    print(f"order_residual: {order:.3e}")
    print(f"explicit: {'yes' if is_explicit(t) else 'no'}")
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_simulate(args, parser) -> int:
    p, s0 = _params(args), _initial(args)
    N = args.T / args.h
    if not (args.h > 0 and args.T > 0) or abs(N - round(N)) > 1e-9 * max(N, 1) or round(N) < 1:
        parser.error(f"--T {args.T!r} must be a positive whole number of steps --h {args.h!r}")
    if (args.a11 is not None or args.b11 is not None) and args.scheme != "2":
        parser.error("--a11/--b11 only apply to scheme 2")
    cfg = scheme_config(args.scheme, args.a11, args.b11)
    g = sample(args.T, round(N), args.seed, args.path_id)
    try:
        traj = integrate(s0, g, cfg, p)
    except ConvergenceError as exc:
        _err(f"solver failure at step {exc.step_index}: {exc}")
        return 1
    if traj.first_violation is not None:
        _err(f"warning: {args.scheme} left the positive quadrant at step {traj.first_violation}")
    with _sink(args.output) as fh:
        _header(fh, args, ("scheme", "h", "T", "path_id") + _MODEL_KEYS)
        write_trajectory_csv(traj, fh)
    return 0


def _scale(args, parser) -> tuple[int, float, tuple[float, ...]]:
    if args.paper_scale:
        clash = [f for f in ("n_paths", "h_ref") if getattr(args, f) is not None]
        if clash:
            parser.error(f"--paper-scale fixes {', '.join('--' + c.replace('_', '-') for c in clash)}")
        base = FULL_SCALE
    else:
        base = DESK
    n_paths = args.n_paths if args.n_paths is not None else base.n_paths
    h_ref = args.h_ref if args.h_ref is not None else base.h_ref
    if n_paths < 2:
        parser.error("--n-paths must be at least 2")
    return n_paths, h_ref, base.h_list


def cmd_convergence(args, parser) -> int:
    n_paths, h_ref, h_list = _scale(args, parser)
    if args.h_list is not None:
        if args.paper_scale:
            parser.error("--paper-scale fixes --h-list")
        h_list = tuple(args.h_list)
    args.n_paths, args.h_ref, args.h_list = n_paths, h_ref, sorted(h_list, reverse=True)
    try:
        reports = convergence_study(
            args.schemes, h_list, _initial(args), _params(args), n_paths, args.seed, args.T, h_ref,
            args.reference, args.threads,
        )
    except DomainError as exc:
        parser.error(str(exc))
    except ConvergenceError as exc:
        _err(str(exc))
        return 1
    with _sink(args.output) as fh:
        _header(fh, args, ("schemes", "h_list", "h_ref", "n_paths", "T", "reference") + _MODEL_KEYS)
        fh.write("scheme,h,l1_error,stderr,violations\n")
        for rep in reports.values():
            for row in rep.rows:
                fh.write(f"{rep.scheme},{format_float(row.h)},{format_float(row.l1_error)},"
                         f"{format_float(row.stderr)},{row.violations}\n")
    for rep in reports.values():
        if rep.degenerate:
            print(f"{rep.scheme:>9}: slope undefined (degenerate fit)", file=sys.stderr)
        else:
            print(f"{rep.scheme:>9}: slope {rep.slope:.3f}  R^2 {rep.r_squared:.4f}", file=sys.stderr)
    return 0


def cmd_table(args, parser) -> int:
    n_paths, h_ref, _ = _scale(args, parser)
    args.n_paths, args.h_ref = n_paths, h_ref
    try:
        rows = error_table(
            args.schemes, args.T, args.h, _initial(args), _params(args), n_paths, args.seed, h_ref,
            args.reference, args.threads,
        )
    except DomainError as exc:
        parser.error(str(exc))
    except ConvergenceError as exc:
        _err(str(exc))
        return 1
    with _sink(args.output) as fh:
        _header(fh, args, ("schemes", "T", "h", "h_ref", "n_paths", "reference") + _MODEL_KEYS)
        fh.write("scheme,T,l1_error\n")
        for r in rows:
            fh.write(f"{r.scheme},{format_float(r.T)},{format_float(r.l1_error)}\n")
    horizons = sorted({r.T for r in rows})
    print("T".rjust(9) + "".join(f"{T:>11g}" for T in horizons), file=sys.stderr)
    for name in dict.fromkeys(r.scheme for r in rows):
        vals = {r.T: r.l1_error for r in rows if r.scheme == name}
        print(name.rjust(9) + "".join(f"{vals[T]:>11.3e}" for T in horizons), file=sys.stderr)
    return 0


def cmd_phase_area(args, parser) -> int:
    if len(args.triangle) != 6:
        parser.error("--triangle needs six numbers")
    v = args.triangle
    try:
        tri = Triangle(State(v[0], v[1]), State(v[2], v[3]), State(v[4], v[5]))
        report = phase_area_study(
            tri, args.h, args.T, args.seed, args.schemes, _params(args), args.h_ref, args.path_id, args.reference
        )
    except DomainError as exc:
        parser.error(str(exc))
    except ConvergenceError as exc:
        _err(str(exc))
        return 1
    with _sink(args.output) as fh:
        _header(fh, args, ("schemes", "h", "T", "h_ref", "path_id", "reference", "triangle") + _MODEL_KEYS[:6])
        fh.write("t,scheme,area,area_ref,abs_error,log_area\n")
        for name in report.schemes:
            for k, t in enumerate(report.times):
                fh.write(
                    f"{format_float(t)},{name},{format_float(report.area[name][k])},"
                    f"{format_float(report.area_ref[k])},{format_float(report.abs_error[name][k])},"
                    f"{format_float(report.log_area[name][k])}\n"
                )
    for name in report.schemes:
        print(
            f"{name:>9}: max |area - area_ref| {report.max_error(name):.4e}  "
            f"log-area drift {report.log_area_drift(name):.4%}",
            file=sys.stderr,
        )
    return 0


def cmd_defect(args, parser) -> int:
    states = probe_states(args.n_states, args.seed)
    try:
        rows = defect_scan(args.schemes, states, args.h_list, _params(args))
    except ConvergenceError as exc:
        _err(str(exc))
        return 1
    with _sink(args.output) as fh:
        _header(fh, args, ("schemes", "h_list", "n_states") + _MODEL_KEYS[:6])
        fh.write("scheme,x,y,h,J,defect\n")
        for r in rows:
            fh.write(",".join([r.scheme] + [format_float(v) for v in (r.x, r.y, r.h, r.J, r.defect)]) + "\n")
    for name in args.schemes:
        worst = max(r.defect for r in rows if r.scheme == name)
        print(f"{name:>9}: max defect {worst:.3e}", file=sys.stderr)
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "convergence": cmd_convergence,
    "table": cmd_table,
    "phase-area": cmd_phase_area,
    "defect": cmd_defect,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "tableau":
        return cmd_tableau_check(args, parser)
    handler = _COMMANDS[args.command]
    # model validation happens before any computation
    if hasattr(args, "gamma1"):
        try:
            _params(args)
            if hasattr(args, "x0"):
                _initial(args)
        except DomainError as exc:
            parser.error(str(exc))
    for flag in ("h", "h_ref", "T"):
        value = getattr(args, flag, None)
        if isinstance(value, float) and not (math.isfinite(value) and value > 0):
            parser.error(f"--{flag.replace('_', '-')} must be positive")
    return handler(args, parser)


if __name__ == "__main__":
    sys.exit(main())
