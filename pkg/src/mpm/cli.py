"""Command-line entry point: ``mpm precompute|monitor|simulate|export|oracle``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from .dynamics import MODELS, SystemModel, load_model, model_from_dict
from .formula import FormulaError, FormulaSpec, parse_index_set
from .geometry import CeilingError, as_eps
from .monitor import MonitorError, MonitorState, VerdictKind
from .oracle import OracleTooLarge, compare, format_report, grid_tables, make_grid
from .precompute import DEFAULT_MAX_BOXES, compute_tables, load_table, save_table

log = logging.getLogger("mpm")

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_CONFIG = 2
EXIT_CEILING = 3
EXIT_INCONCLUSIVE = 4


class ConfigError(Exception):
    """Bad command-line arguments or input files; maps to exit code 2."""


# ---------------------------------------------------------------------------
# helpers


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _load_system(arg: str) -> SystemModel:
    if os.path.exists(arg):
        try:
            return load_model(arg)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"cannot read system file {arg}: {exc}") from exc
    if arg in MODELS:
        return model_from_dict({"model": arg})
    raise ConfigError(f"system {arg!r} is neither a file nor one of {sorted(MODELS)}")


def _load_formula(path: str, dim: int) -> FormulaSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read formula file {path}: {exc.strerror}") from exc
    return FormulaSpec.from_text(text, dim=dim)


def _load_table(path: str, spec=None, model=None):
    if not os.path.exists(path):
        raise ConfigError(f"table file {path} not found")
    return load_table(path, spec, model)


def _print_config(command: str, cfg: dict) -> None:
    print(json.dumps({"command": command, **cfg}, sort_keys=True, default=str), file=sys.stderr)


# ---------------------------------------------------------------------------
# precompute


def cmd_precompute(args) -> int:
    model = _load_system(args.system)
    spec = _load_formula(args.formula, model.n)
    eps = as_eps(_floats(args.eps), model.n)
    modes = ["feasible", "satisfiable"] if args.mode == "both" else [args.mode]
    _print_config("precompute", {
        "system": model.to_dict(), "formula": str(spec), "eps": eps.tolist(), "mode": args.mode,
        "max_boxes": args.max_boxes, "input_levels": args.input_levels,
        "threads": os.environ.get("MPM_THREADS", "1"), "kernels": os.environ.get("MPM_KERNELS", "default"),
    })
    for mode in modes:
        out = args.out if len(modes) == 1 else f"{args.out}.{mode}"
        t0 = time.perf_counter()
        table = compute_tables(model, spec, eps, mode, max_boxes=args.max_boxes, input_levels=args.input_levels)
        save_table(table, out)
        n_boxes = sum(len(e) for e in table.entries.values())
        print(f"{mode}: {len(table.entries)} entries, {n_boxes} boxes, "
              f"{time.perf_counter() - t0:.2f} s, discarded volume {table.meta['discarded_volume']:.6g} -> {out}")
        if args.verbose:
            for (k, I), e in sorted(table.entries.items()):
                print(f"  ({k},{I}) boxes={len(e)} volume={e.volume():.6g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# monitor


def _trace_rows(path: str, n: int):
    """Yield (k, state) rows from a trace CSV; '-' streams standard input."""
    fh = sys.stdin if path == "-" else open(path, encoding="utf-8")
    try:
        header = None
        expect = None
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = [c.strip() for c in line.split(",")]
            if header is None:
                if cells[0] != "k" or len(cells) != n + 1:
                    raise ConfigError(f"line {lineno}: expected header 'k,x0,...,x{n - 1}'")
                header = cells
                continue
            if len(cells) != n + 1:
                raise ConfigError(f"line {lineno}: expected {n + 1} fields, got {len(cells)}")
            try:
                k = int(cells[0])
                x = np.array([float(c) for c in cells[1:]])
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {exc}") from exc
            if expect is not None and k != expect:
                raise ConfigError(f"line {lineno}: instant {k} does not follow {expect - 1}")
            expect = k + 1
            yield k, x
        if header is None:
            raise ConfigError("trace has no header")
    finally:
        if fh is not sys.stdin:
            fh.close()


def cmd_monitor(args) -> int:
    feasible = _load_table(args.table)
    satisfiable = _load_table(args.satisfiable) if args.satisfiable else None
    n = feasible.dim
    spec = _load_formula(args.formula, n)
    if args.system:
        model = _load_system(args.system)
        if model.digest() != feasible.model_digest:
            raise ConfigError("feasible table was built for a different system")
    _print_config("monitor", {"table": args.table, "satisfiable": args.satisfiable, "formula": str(spec),
                              "trace": args.trace, "format": args.format})
    state = MonitorState(spec, feasible, satisfiable)
    last = None
    for i, (k, x) in enumerate(_trace_rows(args.trace, n)):
        if i == 0 and k != 0:
            raise ConfigError("trace must start at instant 0")
        if k > spec.horizon_T:
            break
        last = state.step(x)
        if args.format == "json":
            print(json.dumps(last.to_dict()), flush=True)
        else:
            print(last.line(), flush=True)
        if last.kind.terminal:
            break
    if last is None or last.kind is VerdictKind.FEASIBLE:
        return EXIT_INCONCLUSIVE
    if last.kind is VerdictKind.VIOLATED:
        return EXIT_VIOLATED
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    model = _load_system(args.system)
    x0 = np.array(_floats(args.x0))
    if x0.shape != (model.n,):
        raise ConfigError(f"--x0 needs {model.n} values")
    if args.steps < 0:
        raise ConfigError("--steps must be non-negative")
    _print_config("simulate", {"system": model.to_dict(), "x0": x0.tolist(), "steps": args.steps,
                               "controller": args.controller})
    trace = model.simulate(x0, args.controller, args.steps)
    text = trace.to_csv()
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# export


def rectangles_csv(lo: np.ndarray, hi: np.ndarray, dims) -> str:
    cols = [f"{side}{d}" for d in dims for side in ("lo", "hi")]
    lines = [",".join(cols)]
    for a, b in zip(lo, hi):
        lines.append(",".join(f"{v!r}" for pair in zip(a, b) for v in map(float, pair)))
    return "\n".join(lines) + "\n"


def rectangles_svg(lo: np.ndarray, hi: np.ndarray, size: float = 480.0) -> str:
    if lo.shape[1] == 1:
        lo = np.hstack([lo, np.zeros((len(lo), 1))])
        hi = np.hstack([hi, np.ones((len(hi), 1))])
    if len(lo):
        blo, bhi = lo.min(axis=0), hi.max(axis=0)
    else:
        blo, bhi = np.zeros(2), np.ones(2)
    span = np.where(bhi - blo > 0, bhi - blo, 1.0)
    scale = size / span.max()
    w, h = span * scale
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1f}" height="{h:.1f}" '
             f'viewBox="0 0 {w:.3f} {h:.3f}">']
    for a, b in zip(lo, hi):
        x = (a[0] - blo[0]) * scale
        y = (bhi[1] - b[1]) * scale  # flip so the second axis points up
        parts.append(f'<rect x="{x:.3f}" y="{y:.3f}" width="{(b[0] - a[0]) * scale:.3f}" '
                     f'height="{(b[1] - a[1]) * scale:.3f}" fill="#4a7ab5" fill-opacity="0.6" stroke="none"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_export(args) -> int:
    table = _load_table(args.table)
    I = parse_index_set(args.set)
    entry = table.get(args.k, I)
    if entry is None:
        raise ConfigError(f"table has no entry ({args.k},{I})")
    dims = [int(d) for d in args.dims.split(",")] if args.dims else list(range(min(2, table.dim)))
    if not dims or any(d < 0 or d >= table.dim for d in dims) or len(set(dims)) != len(dims):
        raise ConfigError(f"--dims must be distinct indices in [0, {table.dim - 1}]")
    fmt = args.format or ("svg" if args.out.endswith(".svg") else "csv")
    if fmt == "svg" and len(dims) > 2:
        raise ConfigError("svg export takes one or two dims")
    # raw projection of every box, so the rectangles tile the projected entry
    lo, hi = entry.lo[:, dims], entry.hi[:, dims]
    _print_config("export", {"table": args.table, "k": args.k, "set": str(I), "dims": dims, "format": fmt})
    text = rectangles_svg(lo, hi) if fmt == "svg" else rectangles_csv(lo, hi, dims)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    print(f"{len(lo)} rectangles -> {args.out}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle


def cmd_oracle(args) -> int:
    model = _load_system(args.system)
    spec = _load_formula(args.formula, model.n)
    spacing = _floats(args.spacing)
    counts = [int(c) for c in _floats(args.input_counts)]
    _print_config("oracle", {"system": model.to_dict(), "formula": str(spec), "spacing": spacing,
                             "align": args.align, "input_counts": counts, "mode": args.mode})
    try:
        grid = make_grid(model, spacing, args.align)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if grid.size * (spec.horizon_T + 1) > args.max_work:
        raise OracleTooLarge(f"grid of {grid.size} points exceeds the work limit")
    result = grid_tables(model, spec, grid, counts, args.mode, max_work=args.max_work)
    if args.out:
        doc = {
            "format": "mpm-grid/1",
            "mode": args.mode,
            "axes": [a.tolist() for a in grid.axes],
            "formula_digest": spec.digest(),
            "model_digest": model.digest(),
            "entries": [{"k": k, "I": list(I), "points": np.flatnonzero(m).tolist()}
                        for (k, I), m in sorted(result.entries.items())],
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
    print(f"oracle: {grid.size} grid states, {len(result.entries)} entries", file=sys.stderr)
    if args.compare:
        table = _load_table(args.compare, spec, model)
        if table.mode != args.mode:
            raise ConfigError(f"--compare table is {table.mode}, oracle mode is {args.mode}")
        print(format_report(compare(table, result)))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpm", description="Set-based online monitoring of temporal-logic tasks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("precompute", help="build feasible/satisfiable set tables")
    pc.add_argument("--system", required=True, help="system JSON file or built-in model name")
    pc.add_argument("--formula", required=True, help="formula text file")
    pc.add_argument("--eps", required=True, help="bisection resolution, scalar or one value per state")
    pc.add_argument("--mode", choices=["feasible", "satisfiable", "both"], default="both")
    pc.add_argument("--out", required=True, help="table path ('.gz' compresses); 'both' appends .feasible/.satisfiable")
    pc.add_argument("--max-boxes", type=int, default=DEFAULT_MAX_BOXES)
    pc.add_argument("--input-levels", type=int, default=None, help="input lattice refinement depth")
    pc.set_defaults(func=cmd_precompute)

    mo = sub.add_parser("monitor", help="stream verdicts for a trace")
    mo.add_argument("--table", required=True, help="feasible table")
    mo.add_argument("--satisfiable", help="satisfiable table (enables early satisfaction verdicts)")
    mo.add_argument("--formula", required=True)
    mo.add_argument("--system", help="optional system file checked against the table")
    mo.add_argument("--trace", required=True, help="trace CSV, or '-' to read rows from standard input")
    mo.add_argument("--format", choices=["text", "json"], default="text")
    mo.set_defaults(func=cmd_monitor)

    si = sub.add_parser("simulate", help="simulate a trace")
    si.add_argument("--system", required=True)
    si.add_argument("--x0", required=True, help="initial state, comma separated")
    si.add_argument("--steps", type=int, required=True)
    si.add_argument("--controller", default="random:0", help="constant:u0,..  random:SEED  file:PATH")
    si.add_argument("--out", default="-")
    si.set_defaults(func=cmd_simulate)

    ex = sub.add_parser("export", help="project a table entry to rectangles")
    ex.add_argument("--table", required=True)
    ex.add_argument("--k", type=int, required=True)
    ex.add_argument("--set", required=True, help='remaining index set, e.g. "{1,2,3}"')
    ex.add_argument("--dims", default=None, help="projection dims, e.g. 0,2")
    ex.add_argument("--format", choices=["csv", "svg"], default=None)
    ex.add_argument("--out", required=True)
    ex.set_defaults(func=cmd_export)

    orc = sub.add_parser("oracle", help="exhaustive grid tables and comparison")
    orc.add_argument("--system", required=True)
    orc.add_argument("--formula", required=True)
    orc.add_argument("--spacing", required=True, help="state grid spacing, scalar or per state")
    orc.add_argument("--align", choices=["centers", "nodes"], default="centers")
    orc.add_argument("--input-counts", default="3", help="input grid points per input axis")
    orc.add_argument("--mode", choices=["feasible", "satisfiable"], default="feasible")
    orc.add_argument("--max-work", type=int, default=50_000_000)
    orc.add_argument("--out", help="write grid tables as JSON")
    orc.add_argument("--compare", help="box table to compare against the grid tables")
    orc.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, FormulaError, MonitorError, ValueError, KeyError, OSError) as exc:
        print(f"mpm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CeilingError, OracleTooLarge) as exc:
        print(f"mpm {args.command}: resource limit: {exc}", file=sys.stderr)
        return EXIT_CEILING


if __name__ == "__main__":
    sys.exit(main())
