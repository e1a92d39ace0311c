"""Command-line front end.

Subcommands::

    thermogame game CONFIG [--beta B] [--tol T] [--starts N] [--seed S] [--out CSV]
    thermogame gap CONFIG ...
    thermogame pressure-ed CONFIG --l L [--open] [--spectrum CSV]
    thermogame pressure-quasifree CONFIG [--grid L]
    thermogame perminv CONFIG
    thermogame convergence CONFIG --l 3
    thermogame validate CONFIG
    thermogame sweep CONFIG --axis beta=2:8:13 [--axis ...] [--workers N] --out CSV

Exit codes: 0 success, 1 usage or I/O error, 2 solver failure, 3 invariant
violation. Every CSV starts with a ``# thermogame-csv`` schema line followed
by the header row; numbers carry 12 significant digits.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, _decode, model_from_dict
from .fockspace import (
    CSV_SCHEMA_VERSION,
    FockSpaceError,
    build_internal_energy,
    passivity_check,
    pbc_consistency,
    pressure_ed,
    random_density_matrix,
    write_spectrum_csv,
)
from .game import DEFAULT_STARTS, DEFAULT_TOL, SolverError, convergence_study, solve_game
from .model import LongRangeModel, ModelError
from .perminv import perminv_pressure
from .quasifree import (
    ConvergenceError,
    HubbardTypeModel,
    QuadratureError,
    pressure_hubbard_type,
    pressure_on_grid,
    pressure_quasifree,
    quadratic_from_kernel,
    box_grid,
)

SCHEMA_VERSION = CSV_SCHEMA_VERSION
EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_INVARIANT = 0, 1, 2, 3
ED_DIM_CAP = 2**12  # validate skips boxes with a larger Fock space
PASSIVITY_DIM_CAP = 2**8  # dense random trial states above this are too costly


class UsageError(Exception):
    """Bad command-line input."""


class InvariantError(Exception):
    """A computed quantity broke an invariant."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# formatting


def fmt(x) -> str:
    """Number with 12 significant digits; negative zero prints as 0."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x == 0.0:
        return "0"
    return f"{x:.12g}"


def csv_text(kind: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    buf.write(f"# thermogame-csv schema={SCHEMA_VERSION} table={kind}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def _write(path: str | None, text: str):
    if path is None:
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def _check_finite(values: dict):
    bad = [k for k, v in values.items() if not np.all(np.isfinite(v))]
    if bad:
        raise InvariantError(f"non-finite output: {', '.join(bad)}")


# ---------------------------------------------------------------------------
# configuration


def _read_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return _decode(text)


def _apply_overrides(doc: dict, args) -> dict:
    doc = copy.deepcopy(doc)
    if getattr(args, "beta", None) is not None:
        doc["beta"] = args.beta
    if getattr(args, "l", None) is not None and getattr(args, "command", "") != "convergence":
        doc.setdefault("lattice", {})["side"] = args.l
    return doc


def _model(doc: dict):
    return model_from_dict(doc)


def _fingerprint(model) -> str:
    return model.fingerprint()


# ---------------------------------------------------------------------------
# game


GAME_COLUMNS = ["model_hash", "beta", "F_sharp", "F_flat", "duality_gap", "pressure", "residual"]


def game_header(n_channels: int) -> list[str]:
    return GAME_COLUMNS + [f"d_abs_{k}" for k in range(1, n_channels + 1)] + ["wall_ms"]


def _solver_options(args) -> dict:
    return dict(starts=args.starts, seed=args.seed, tol=args.tol)


def _engine_side(model, args):
    if isinstance(model, HubbardTypeModel):
        return "auto", None
    engine = args.engine
    if args.grid is not None:
        return (engine if engine != "auto" else "quasifree"), args.grid
    return engine, None


def run_game(doc: dict, options: dict, engine: str = "auto", grid: int | None = None,
             timing: bool = False) -> tuple[list, Any, Any]:
    """Solve one configuration; returns ``(row, model, solution)``."""
    model = _model(doc)
    t0 = time.perf_counter()
    sol = solve_game(model, engine=engine, side=grid, **options)
    wall = (time.perf_counter() - t0) * 1e3 if timing else 0.0
    d_abs = np.abs(sol.d)
    _check_finite({"F_sharp": sol.F_sharp, "F_flat": sol.F_flat, "d": d_abs})
    row = [_fingerprint(model), model.beta, sol.F_sharp, sol.F_flat, sol.duality_gap,
           sol.pressure, sol.gap_residual, *d_abs, wall]
    return row, model, sol


def _game_report(model, sol) -> str:
    lines = [
        f"model {model.name} ({_fingerprint(model)}), beta = {fmt(model.beta)}, engine {sol.engine}"
        + ("" if sol.exact else " (finite volume)"),
        f"  F_sharp      {fmt(sol.F_sharp)}",
        f"  F_flat       {fmt(sol.F_flat)}",
        f"  duality gap  {fmt(sol.duality_gap)}",
        f"  pressure     {fmt(sol.pressure)}",
        f"  residual     {fmt(sol.gap_residual)}",
        f"  starts       {sol.starts_converged}/{sol.starts} converged",
    ]
    for k, dk in enumerate(sol.d, start=1):
        lines.append(f"  d_{k} = {fmt(dk.real)} {'+' if dk.imag >= 0 else '-'} {fmt(abs(dk.imag))}i"
                     f"  (|d_{k}| = {fmt(abs(dk))}, gamma {int(sol.gammas[k - 1]):+d})")
    lines.append(f"  {len(sol.multistart_minima)} distinct local minimizer(s), "
                 f"{len(sol.conservative)} conservative")
    for dm, val in sol.multistart_minima:
        comps = ", ".join(f"{fmt(v.real)}{'+' if v.imag >= 0 else '-'}{fmt(abs(v.imag))}i"
                          for v in dm.values)
        lines.append(f"    value {fmt(val)} at c_- = ({comps})")
    return "\n".join(lines) + "\n"


def _check_game(sol, tol: float):
    if sol.F_flat > sol.F_sharp + 1e-9:
        raise InvariantError(f"F_flat exceeds F_sharp by {sol.F_flat - sol.F_sharp:.3e}")
    if sol.gap_residual > tol:
        raise InvariantError(f"gap residual {sol.gap_residual:.3e} above tolerance {tol:.1e}")


def cmd_game(args) -> int:
    doc = _apply_overrides(_read_config(args.config), args)
    model = _model(doc)
    engine, grid = _engine_side(model, args)
    row, model, sol = run_game(doc, _solver_options(args), engine, grid, args.timing)
    _check_game(sol, args.tol)
    report = _game_report(model, sol)
    sys.stdout.write(report)
    _write(args.report, report)
    _write(args.out, csv_text("game", game_header(len(sol.d)), [row]))
    return EXIT_OK


def cmd_gap(args) -> int:
    doc = _apply_overrides(_read_config(args.config), args)
    model = _model(doc)
    engine, grid = _engine_side(model, args)
    _, model, sol = run_game(doc, _solver_options(args), engine, grid, args.timing)
    _check_game(sol, args.tol)
    header = ["model_hash", "beta", "minimizer", "value", "residual"]
    n = len(sol.d)
    header += [f"d_re_{k}" for k in range(1, n + 1)] + [f"d_im_{k}" for k in range(1, n + 1)]
    rows = []
    out = [f"gap equations d = e(d), beta = {fmt(model.beta)}: "
           f"{len(sol.conservative)} conservative solution(s), residual {fmt(sol.gap_residual)}"]
    for j, (dm, rp, val) in enumerate(sol.conservative, start=1):
        d = dm.values + rp.values
        rows.append([_fingerprint(model), model.beta, j, val, sol.gap_residual, *d.real, *d.imag])
        out.append(f"  solution {j}: value {fmt(val)}, d = ["
                   + ", ".join(f"{fmt(v.real)}{'+' if v.imag >= 0 else '-'}{fmt(abs(v.imag))}i" for v in d)
                   + "]")
    sys.stdout.write("\n".join(out) + "\n")
    _write(args.out, csv_text("gap", header, rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracles


def cmd_pressure_ed(args) -> int:
    doc = _apply_overrides(_read_config(args.config), args)
    model = _model(doc)
    if not isinstance(model, LongRangeModel):
        raise UsageError("pressure-ed needs a lattice model (not the hubbard-type preset)")
    lat = model.lattice
    t0 = time.perf_counter()
    energy = build_internal_energy(model, lat, pbc=not args.open)
    p = pressure_ed(energy, model.beta, lat.volume)
    wall = (time.perf_counter() - t0) * 1e3 if args.timing else 0.0
    _check_finite({"pressure": p})
    if energy.dropped_terms:
        sys.stderr.write(f"note: {energy.dropped_terms} kernel term(s) left the open box and were dropped\n")
    sys.stdout.write(f"p_{lat.side} = {fmt(p)}  (beta {fmt(model.beta)}, "
                     f"{'open' if args.open else 'periodic'} box, Fock dimension {energy.dim})\n")
    header = ["model_hash", "beta", "l", "pbc", "pressure", "wall_ms"]
    _write(args.out, csv_text("pressure-ed", header,
                              [[_fingerprint(model), model.beta, lat.side, int(not args.open), p, wall]]))
    if args.spectrum:
        try:
            write_spectrum_csv(energy, args.spectrum)
        except OSError as exc:
            raise UsageError(f"cannot write {args.spectrum}: {exc}") from exc
    return EXIT_OK


def cmd_pressure_quasifree(args) -> int:
    doc = _apply_overrides(_read_config(args.config), args)
    model = _model(doc)
    t0 = time.perf_counter()
    if isinstance(model, HubbardTypeModel):
        p = pressure_hubbard_type(model, starts=args.starts, seed=args.seed, tol=args.tol)
        label = "P (Hubbard-type, game value)"
        grid = ""
    else:
        form = quadratic_from_kernel(model.local, model.lattice.spins)
        if model.channels:
            sys.stderr.write("note: channels ignored; this is the pressure of the local part\n")
        if args.grid is not None:
            p = pressure_on_grid(form, model.beta, box_grid(args.grid, model.lattice.dim))
            grid = args.grid
        else:
            p = pressure_quasifree(form, model.beta, tol=args.quasifree_tol)
            grid = ""
        label = "p (quasi-free)" if args.grid is None else f"p_{args.grid} (quasi-free, box grid)"
    wall = (time.perf_counter() - t0) * 1e3 if args.timing else 0.0
    _check_finite({"pressure": p})
    sys.stdout.write(f"{label} = {fmt(p)}  (beta {fmt(model.beta)})\n")
    header = ["model_hash", "beta", "grid", "pressure", "wall_ms"]
    _write(args.out, csv_text("pressure-quasifree", header,
                              [[_fingerprint(model), model.beta, str(grid), p, wall]]))
    return EXIT_OK


def cmd_perminv(args) -> int:
    doc = _apply_overrides(_read_config(args.config), args)
    model = _model(doc)
    if not isinstance(model, LongRangeModel):
        raise UsageError("perminv needs a lattice model")
    t0 = time.perf_counter()
    p, state = perminv_pressure(model, seed=args.seed)
    wall = (time.perf_counter() - t0) * 1e3 if args.timing else 0.0
    _check_finite({"pressure": p})
    np.set_printoptions(precision=6, suppress=True)
    sys.stdout.write(f"pressure (one-site problem) = {fmt(p)}\n"
                     f"odd-block norm of the minimizer = {fmt(state.odd_block_norm)}\n"
                     f"one-site density matrix:\n{np.real_if_close(state.density)}\n")
    header = ["model_hash", "beta", "pressure", "odd_block_norm", "wall_ms"]
    _write(args.out, csv_text("perminv", header,
                              [[_fingerprint(model), model.beta, p, state.odd_block_norm, wall]]))
    return EXIT_OK


def cmd_convergence(args) -> int:
    doc = _apply_overrides(_read_config(args.config), args)
    model = _model(doc)
    if not isinstance(model, LongRangeModel):
        raise UsageError("convergence needs a lattice model")
    sides = list(range(1, (args.l or 3) + 1))
    rep = convergence_study(model, sides, starts=args.starts, seed=args.seed, tol=args.tol,
                            engine=args.engine)
    n = model.n_channels
    header = ["model_hash", "beta", "l", "pressure_l", "F_sharp", "deviation"]
    header += [f"ed_abs_{k}" for k in range(1, n + 1)] + [f"ed_lro_{k}" for k in range(1, n + 1)]
    header += [f"d_abs_{k}" for k in range(1, n + 1)]
    rows = []
    for l, p, dev, ch, mod in zip(rep.sides, rep.pressures, rep.deviations, rep.ed_channel,
                                   rep.ed_channel_modulus):
        rows.append([_fingerprint(model), model.beta, l, p, rep.F_sharp, dev,
                     *np.abs(ch), *mod, *np.abs(rep.game_channel)])
    lines = [f"-F_sharp = {fmt(-rep.F_sharp)}"]
    for l, p, dev in zip(rep.sides, rep.pressures, rep.deviations):
        lines.append(f"  l = {l}: p_l = {fmt(p)}, |p_l + F_sharp| = {fmt(dev)}")
    lines.append(f"  fitted exponent {fmt(rep.exponent)}, monotone: {'yes' if rep.monotone else 'no'}")
    sys.stdout.write("\n".join(lines) + "\n")
    _write(args.out, csv_text("convergence", header, rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# validation battery


def _fock_dim(model, side: int) -> int:
    return 2 ** (len(model.lattice.spins) * (2 * side + 1) ** model.lattice.dim)


def validate_model(model, args) -> list[tuple[str, str, str]]:
    """Run the invariant battery; returns ``(check, status, detail)`` rows."""
    rows = []

    def record(name, ok, detail):
        rows.append((name, "pass" if ok else "FAIL", detail))

    if isinstance(model, HubbardTypeModel):
        sol = solve_game(model, starts=args.starts, seed=args.seed, tol=args.tol)
        record("game ordering", sol.F_flat <= sol.F_sharp + 1e-9, f"F_sharp - F_flat = {sol.F_sharp - sol.F_flat:.3e}")
        record("gap residual", sol.gap_residual <= args.tol, f"{sol.gap_residual:.3e}")
        return rows
    rng = np.random.default_rng(args.seed)
    side = model.lattice.side
    if _fock_dim(model, side) > ED_DIM_CAP:
        rows.append(("finite-volume checks", "skip", f"Fock dimension {_fock_dim(model, side)} above {ED_DIM_CAP}"))
    else:
        lat = model.lattice
        energy = build_internal_energy(model, lat, pbc=True)
        if energy.dim <= PASSIVITY_DIM_CAP:
            trials = [random_density_matrix(energy.dim, rng) for _ in range(20)]
            rep = passivity_check(energy, model.beta, trials, lat.volume)
            record("passivity", rep.passed,
                   f"worst margin {rep.worst_margin:.3e}, Gibbs margin {rep.gibbs_margin:.3e}")
        else:
            rows.append(("passivity", "skip", f"Fock dimension {energy.dim} above {PASSIVITY_DIM_CAP}"))
        sides = [l for l in range(1, side + 1) if _fock_dim(model, l) <= ED_DIM_CAP]
        if len(sides) >= 2:
            pbc = pbc_consistency(model, sides)
            record("periodic boundary reduction", pbc.monotone,
                   "differences " + ", ".join(f"{d:.3e}" for d in pbc.differences))
        if model.local.is_quadratic():
            form = quadratic_from_kernel(model.local, lat.spins)
            plain = LongRangeModel(lat, model.local, (), model.beta)
            p_ed = pressure_ed(build_internal_energy(plain, lat, pbc=True), model.beta, lat.volume)
            p_qf = pressure_on_grid(form, model.beta, box_grid(side, lat.dim))
            record("ED against quasi-free (local part)", abs(p_ed - p_qf) <= 1e-9, f"difference {abs(p_ed - p_qf):.3e}")
    sol = solve_game(model, starts=args.starts, seed=args.seed, tol=args.tol)
    record("game ordering", sol.F_flat <= sol.F_sharp + 1e-9, f"F_sharp - F_flat = {sol.F_sharp - sol.F_flat:.3e}")
    record("gap residual", sol.gap_residual <= args.tol, f"{sol.gap_residual:.3e}")
    if model.is_single_site():
        p, state = perminv_pressure(model, seed=args.seed)
        record("one-site problem against game", abs(p - sol.pressure) <= 1e-7,
               f"difference {abs(p - sol.pressure):.3e}")
        record("one-site minimizer even", state.odd_block_norm <= 1e-12, f"{state.odd_block_norm:.3e}")
    return rows


def cmd_validate(args) -> int:
    doc = _apply_overrides(_read_config(args.config), args)
    model = _model(doc)
    rows = validate_model(model, args)
    width = max(len(r[0]) for r in rows)
    for name, status, detail in rows:
        sys.stdout.write(f"{status:4s}  {name:<{width}}  {detail}\n")
    header = ["model_hash", "check", "status", "detail"]
    _write(args.out, csv_text("validate", header, [[_fingerprint(model), *r] for r in rows]))
    return EXIT_INVARIANT if any(r[1] == "FAIL" for r in rows) else EXIT_OK


# ---------------------------------------------------------------------------
# sweeps


def parse_axis(spec: str) -> tuple[str, np.ndarray]:
    """``name=start:stop:steps`` to ``(name, values)`` (inclusive, evenly spaced)."""
    name, sep, rng = spec.partition("=")
    parts = rng.split(":")
    if not sep or not name or len(parts) != 3:
        raise UsageError(f"axis must look like name=start:stop:steps, got {spec!r}")
    try:
        start, stop, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise UsageError(f"bad numbers in axis {spec!r}") from exc
    if steps < 1:
        raise UsageError(f"axis {name!r} needs at least one step")
    return name.strip(), np.linspace(start, stop, steps)


_INTEGER_KEYS = {"side", "d"}


def set_parameter(doc: dict, name: str, value: float) -> dict:
    """Copy of ``doc`` with the dotted path ``name`` set to ``value``.

    Integer path components index arrays from 1, e.g. ``channel.1.weight``
    or ``params.channels.2.weight``.
    """
    doc = copy.deepcopy(doc)
    keys = name.split(".")
    node: Any = doc
    for j, key in enumerate(keys):
        last = j == len(keys) - 1
        if isinstance(node, list):
            try:
                idx = int(key) - 1
            except ValueError as exc:
                raise UsageError(f"{name}: {key!r} must be a 1-based index") from exc
            if not 0 <= idx < len(node):
                raise UsageError(f"{name}: index {key} out of range")
            if last:
                node[idx] = value
            node = node[idx]
        elif isinstance(node, dict):
            if last:
                node[key] = int(round(value)) if key in _INTEGER_KEYS else value
            else:
                node = node.setdefault(key, {})
        else:
            raise UsageError(f"{name}: cannot descend into {key!r}")
    return doc


def sweep_points(axes: Sequence[tuple[str, np.ndarray]]):
    names = [a for a, _ in axes]
    dupes = sorted({a for a in names if names.count(a) > 1})
    if dupes:
        raise UsageError(f"axis given more than once: {', '.join(dupes)}")
    return list(itertools.product(*[v for _, v in axes]))


def _sweep_point(task):
    doc, names, point, options, engine, grid, timing = task
    for name, value in zip(names, point):
        doc = set_parameter(doc, name, float(value))
    try:
        row, _, _ = run_game(doc, options, engine, grid, timing)
        return "ok", row
    except (SolverError, ConvergenceError, QuadratureError) as exc:
        return "solver", str(exc)
    except (ModelError, UsageError) as exc:
        return "usage", str(exc)


def cmd_sweep(args) -> int:
    base = _apply_overrides(_read_config(args.config), args)
    if not args.axis:
        raise UsageError("sweep needs at least one --axis name=start:stop:steps")
    axes = [parse_axis(a) for a in args.axis]
    points = sweep_points(axes)
    names = [a for a, _ in axes]
    model = _model(base)
    engine, grid = _engine_side(model, args)
    tasks = [(base, names, p, _solver_options(args), engine, grid, args.timing) for p in points]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    n_channels = None
    rows, failures = [], []
    for point, (status, payload) in zip(points, results):
        if status != "ok":
            failures.append((status, point, payload))
            continue
        rows.append([*point, *payload])
        n_channels = len(payload) - len(GAME_COLUMNS) - 1
    if failures:
        for status, point, msg in failures:
            where = ", ".join(f"{n}={fmt(v)}" for n, v in zip(names, point))
            sys.stderr.write(f"sweep point {where}: {msg}\n")
        return EXIT_USAGE if any(f[0] == "usage" for f in failures) else EXIT_SOLVER
    header = [f"axis_{n}" for n in names] + game_header(n_channels)
    text = csv_text("sweep", header, rows)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thermogame", description="Thermodynamic games of long-range lattice fermion models.")
    parser.add_argument("--version", action="version", version=f"thermogame {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, solver=True):
        p.add_argument("config", help="model configuration (TOML)")
        p.add_argument("--beta", type=float, help="override the inverse temperature")
        p.add_argument("--l", type=int, help="box side (lattice.side)")
        p.add_argument("--grid", type=int, help="fixed momentum grid of the box with this side")
        p.add_argument("--out", help="CSV output path")
        p.add_argument("--seed", type=int, default=0, help="seed of every multistart (default 0)")
        p.add_argument("--timing", action="store_true", help="record wall time in the CSV (default writes 0)")
        if solver:
            p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="gap-equation tolerance")
            p.add_argument("--starts", type=int, default=DEFAULT_STARTS, help="multistart count")
            p.add_argument("--engine", choices=("auto", "one-site", "quasifree", "ed"), default="auto")
        return p

    p = common(sub.add_parser("game", help="solve the thermodynamic game"))
    p.add_argument("--report", help="also write the text report to this path")
    p.set_defaults(func=cmd_game)
    p = common(sub.add_parser("gap", help="solutions of the gap equations"))
    p.set_defaults(func=cmd_gap)
    p = common(sub.add_parser("pressure-ed", help="finite-volume pressure by exact diagonalization"), solver=False)
    p.add_argument("--open", action="store_true", help="open instead of periodic boundaries")
    p.add_argument("--spectrum", help="write the eigenvalues to this CSV")
    p.set_defaults(func=cmd_pressure_ed)
    p = common(sub.add_parser("pressure-quasifree", help="infinite-volume pressure of a quadratic model"))
    p.add_argument("--quasifree-tol", type=float, default=1e-9, help="grid-doubling tolerance")
    p.set_defaults(func=cmd_pressure_quasifree)
    p = common(sub.add_parser("perminv", help="one-site problem of a permutation-invariant model"), solver=False)
    p.set_defaults(func=cmd_perminv)
    p = common(sub.add_parser("convergence", help="finite-volume pressures against the game value"))
    p.set_defaults(func=cmd_convergence)
    p = common(sub.add_parser("validate", help="run the invariant battery"))
    p.set_defaults(func=cmd_validate)
    p = common(sub.add_parser("sweep", help="game over a parameter grid"))
    p.add_argument("--axis", action="append", default=[], help="name=start:stop:steps (repeatable)")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, ModelError, FockSpaceError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (SolverError, ConvergenceError, QuadratureError) as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER
    except InvariantError as exc:
        sys.stderr.write(f"invariant violated: {exc}\n")
        return EXIT_INVARIANT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
