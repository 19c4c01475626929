"""Command-line interface: ``run``, ``convergence`` and ``certify``.

Options can also come from a plain-text file of ``key = value`` lines passed
with ``--config``; command-line flags take precedence.  The output directory
defaults to ``$FPSOLVE_OUTPUT_DIR`` and then to ``./fpsolve_out``.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError, ConvergenceError, PositivityError
from .grid import build_grid
from .krylov import DENSE_LIMIT
from .monotonicity import certify
from .problem import CATALOG_NAMES, accuracy_problem, get_problem, load_table, sample
from .simulate import ENTROPIES, convergence_study, run, write_field_csv, write_trace_csv

__all__ = ["RunConfig", "main", "build_parser", "read_config_file", "OUTPUT_ENV"]

OUTPUT_ENV = "FPSOLVE_OUTPUT_DIR"


@dataclass(frozen=True)
class RunConfig:
    problem: Optional[str]
    table: Optional[str]
    order: int
    cells: Optional[int]
    dt: Optional[float]
    final_time: Optional[float]
    steady: bool
    output: Path
    entropy: str
    check: bool
    oracle: bool
    dimension: Optional[int] = None
    diffusion: Optional[float] = None
    snapshot_every: Optional[int] = None
    tol: float = 1e-12

    def __post_init__(self):
        if (self.problem is None) == (self.table is None):
            raise ConfigurationError("give exactly one of --problem or --table")
        if self.problem is not None and self.problem not in CATALOG_NAMES:
            raise ConfigurationError(f"unknown problem {self.problem!r}; choose from {', '.join(CATALOG_NAMES)}")
        if self.order not in (2, 4):
            raise ConfigurationError("--order must be 2 or 4")
        for name in ("cells", "dt", "final_time", "diffusion", "snapshot_every", "tol"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigurationError(f"--{name.replace('_', '-')} must be positive")
        if self.entropy not in ENTROPIES:
            raise ConfigurationError(f"--entropy must be one of {', '.join(sorted(ENTROPIES))}")


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _add_common(p):
    p.add_argument("--config", help="file of 'key = value' lines (flags win)")
    p.add_argument("--problem", help=f"catalog problem: {', '.join(CATALOG_NAMES)}")
    p.add_argument("--table", help="CSV of per-point fields instead of a catalog problem")
    p.add_argument("--order", type=int, default=2, choices=(2, 4))
    p.add_argument("--cells", type=int, help="elements per axis (ignored for --table)")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--dimension", type=int, choices=(1, 2), help="for problems available in 1D and 2D")
    p.add_argument("--diffusion", type=float, help="override the diffusion constant")
    p.add_argument("--output", help=f"output directory (default ${OUTPUT_ENV} or ./fpsolve_out)")


def build_parser():
    parser = argparse.ArgumentParser(prog="fpsolve", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="time-step a problem and write fields and a trace")
    _add_common(r)
    r.add_argument("--T", dest="final_time", type=float, help="final time")
    r.add_argument("--steady", action="store_true", help="stop at steady state")
    r.add_argument("--entropy", default="chi2", help="entropy in the trace: chi2 or kl")
    r.add_argument("--snapshot-every", type=int, help="write field_<n>.csv every this many steps")
    r.add_argument("--no-check", dest="check", action="store_false", help="skip the monotonicity report")
    r.add_argument("--oracle", action="store_true", help="include the dense-inverse oracle (n <= 4096)")
    r.add_argument("--tol", type=float, default=1e-12, help="linear solver relative residual")

    c = sub.add_parser("convergence", help="error table against the manufactured solution")
    c.add_argument("--config")
    c.add_argument("--order", type=int, default=2, choices=(2, 4))
    c.add_argument("--grids", default="9,17,33,65,129", help="points per axis, comma separated")
    c.add_argument("--T", dest="final_time", type=float, default=1.0)
    c.add_argument("--source-form", default="conservative", choices=("conservative", "advective"))
    c.add_argument("--output")

    k = sub.add_parser("certify", help="print the monotonicity report for one configuration")
    _add_common(k)
    k.add_argument("--oracle", action="store_true", help="also compute min(A^-1) densely")
    return parser


def _apply_config(parser, argv):
    """Parse once to find --config, then re-parse with file values as defaults."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    values = read_config_file(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    actions = {a.dest: a for a in sub._actions}  # noqa: SLF001
    defaults = {}
    for key, value in values.items():
        if key in ("T", "t"):
            key = "final_time"
        if key not in actions or key in ("help", "config"):
            raise ConfigurationError(f"unknown config key {key!r}")
        act = actions[key]
        if act.nargs == 0:  # store_true / store_false
            flag = _BOOL.get(value.lower())
            if flag is None:
                raise ConfigurationError(f"config key {key!r} needs a boolean")
            defaults[key] = flag
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _output_dir(arg):
    out = Path(arg or os.environ.get(OUTPUT_ENV) or "fpsolve_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _setup(cfg):
    """Problem, grid and time step for a run/certify configuration."""
    if cfg.table is not None:
        problem, grid = load_table(
            cfg.table, cfg.order, diffusion=cfg.diffusion or 1.0, dt=cfg.dt,
            final_time=cfg.final_time or 1.0,
        )
    else:
        kwargs = {}
        if cfg.dimension is not None and cfg.problem in ("flat", "ou"):
            kwargs["dimension"] = cfg.dimension
        problem = get_problem(cfg.problem, **kwargs)
        if cfg.dimension is not None and cfg.dimension != problem.dimension:
            raise ConfigurationError(f"problem {cfg.problem!r} is {problem.dimension}D only")
        if cfg.diffusion is not None:
            problem = problem.with_(diffusion=cfg.diffusion)
        if cfg.cells is None:
            raise ConfigurationError("--cells is required for catalog problems")
        grid = build_grid(problem.bounds, cfg.cells, cfg.order, problem.dimension)
    dt = cfg.dt if cfg.dt is not None else problem.dt
    if dt is None:
        dt = grid.h  # dt = dx when nothing else is specified
    return problem, grid, dt


def _config(args):
    return RunConfig(
        problem=args.problem,
        table=args.table,
        order=args.order,
        cells=args.cells,
        dt=args.dt,
        final_time=getattr(args, "final_time", None),
        steady=getattr(args, "steady", False),
        output=_output_dir(args.output),
        entropy=getattr(args, "entropy", "chi2"),
        check=getattr(args, "check", True),
        oracle=getattr(args, "oracle", False),
        dimension=args.dimension,
        diffusion=args.diffusion,
        snapshot_every=getattr(args, "snapshot_every", None),
        tol=getattr(args, "tol", 1e-12),
    )


def _write_report(report, out):
    (out / "report.txt").write_text(report.to_text() + "\n")
    (out / "report.csv").write_text(report.to_csv())


def cmd_run(args, stdout):
    cfg = _config(args)
    problem, grid, dt = _setup(cfg)
    fields = sample(problem, grid)
    verdict = "not checked"
    if cfg.check:
        oracle = cfg.oracle and grid.size <= DENSE_LIMIT
        report = certify(grid, fields, problem.diffusion, dt, oracle=oracle)
        _write_report(report, cfg.output)
        verdict = report.verdict.value
        if cfg.oracle and not oracle:
            print(f"oracle refused: n={grid.size} > {DENSE_LIMIT}", file=sys.stderr)
    result = run(
        problem, grid, dt=dt, final_time=cfg.final_time, steady=cfg.steady,
        entropy=cfg.entropy, tol=cfg.tol, fields=fields, snapshot_every=cfg.snapshot_every or 10**12,
    )
    for n, rho in sorted(result.snapshots.items()):
        write_field_csv(grid, rho, cfg.output / f"field_{n}.csv")
    write_trace_csv(result.trace, cfg.output / "trace.csv")
    mass = result.trace.column("mass")
    drift = float(np.max(result.mass_defects())) if len(mass) > 1 else 0.0
    lines = [
        f"problem: {problem.name}",
        f"grid: {'x'.join([str(grid.n)] * grid.dimension)} order {grid.order}, h={grid.h:.17g}, dt={dt:.17g}",
        f"steps: {result.state.n}  t={result.state.t:.17g}" + ("  (steady state)" if result.steady else ""),
        f"max per-step mass drift (relative): {drift:.3e}",
        f"min density: {float(result.trace.column('min_rho').min()):.17g}",
        f"monotonicity: {verdict}",
    ]
    summary = "\n".join(lines) + "\n"
    (cfg.output / "summary.txt").write_text(summary)
    stdout.write(summary)
    if cfg.oracle and cfg.check and grid.size > DENSE_LIMIT:
        return 1
    return 0


def cmd_convergence(args, stdout):
    try:
        points = [int(s) for s in str(args.grids).split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"--grids must be integers: {exc}") from exc
    if len(points) < 2:
        raise ConfigurationError("--grids needs at least two grid sizes")
    out = _output_dir(args.output)
    problem = accuracy_problem(args.source_form)
    rows = convergence_study(problem, args.order, points, final_time=args.final_time)

    def f(x):
        return "" if math.isnan(x) else f"{x:.17g}"

    path = out / f"convergence_order{args.order}.csv"
    with open(path, "w") as fh:
        fh.write("N,l2_error,l2_order,linf_error,linf_order\n")
        for r in rows:
            fh.write(f"{r.N},{f(r.l2_error)},{f(r.l2_order)},{f(r.linf_error)},{f(r.linf_order)}\n")
    stdout.write(f"{'N':>5} {'l2 error':>10} {'order':>6} {'linf error':>10} {'order':>6}\n")
    for r in rows:
        o2 = "" if math.isnan(r.l2_order) else f"{r.l2_order:.2f}"
        oi = "" if math.isnan(r.linf_order) else f"{r.linf_order:.2f}"
        stdout.write(f"{r.N:>5} {r.l2_error:>10.3e} {o2:>6} {r.linf_error:>10.3e} {oi:>6}\n")
    return 0


def cmd_certify(args, stdout):
    cfg = _config(args)
    problem, grid, dt = _setup(cfg)
    fields = sample(problem, grid)
    refused = cfg.oracle and grid.size > DENSE_LIMIT
    report = certify(grid, fields, problem.diffusion, dt, oracle=cfg.oracle and not refused)
    _write_report(report, cfg.output)
    stdout.write(report.to_text() + "\n")
    if refused:
        print(f"oracle refused: n={grid.size} > {DENSE_LIMIT}", file=sys.stderr)
        return 1
    return 0


def main(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        handler = {"run": cmd_run, "convergence": cmd_convergence, "certify": cmd_certify}[args.command]
        return handler(args, stdout)
    except (ConfigurationError, PositivityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
