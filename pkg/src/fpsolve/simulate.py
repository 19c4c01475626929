"""Implicit-Euler time loop with per-step diagnostics.

The operator is assembled once; each step solves ``A_fd g^{n+1} = M g^n +
dt f`` and records mass, the chi-square divergence, a chosen phi-entropy,
the minimum density and the solver statistics.  All sums use the same lumped
quadrature weights as the scheme.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .assembly import SchemeOperator, assemble
from .errors import ConfigurationError, ConvergenceError, EntropyDomainError
from .grid import Grid, build_grid
from .krylov import solve
from .problem import sample

__all__ = [
    "State",
    "TraceRow",
    "RunTrace",
    "RunResult",
    "DecayFit",
    "ENTROPIES",
    "phi_entropy",
    "chi2_divergence",
    "step",
    "run",
    "fit_decay_rate",
    "write_trace_csv",
    "write_field_csv",
    "accuracy_errors",
    "convergence_study",
    "ConvergenceRow",
]

TRACE_COLUMNS = ("n", "t", "mass", "chi2", "entropy", "min_rho", "solver_iters", "residual")


@dataclass(frozen=True)
class State:
    n: int
    dt: float
    g: np.ndarray
    M: np.ndarray

    @property
    def t(self):
        return self.n * self.dt

    @property
    def rho(self):
        return self.M * self.g


def _chi2_f(x):
    return (x - 1.0) ** 2


def _kl_f(x):
    if np.any(x <= 0):
        raise EntropyDomainError("kl entropy needs g > 0 everywhere")
    return x * np.log(x) - x + 1.0


ENTROPIES: dict = {"chi2": _chi2_f, "kl": _kl_f}


def phi_entropy(state, fields, weights, f="chi2"):
    """``sum_i w_i M_i f(g_i)`` for a convex ``f`` (name or callable)."""
    fn = ENTROPIES.get(f) if isinstance(f, str) else f
    if fn is None:
        raise ConfigurationError(f"unknown entropy {f!r}; choose from {sorted(ENTROPIES)}")
    g = state.g if isinstance(state, State) else np.asarray(state, float)
    M = np.asarray(fields.M, float)
    return float(np.sum(np.asarray(weights) * M * fn(g)))


def chi2_divergence(rho, M, weights):
    return float(np.sum(weights * (rho - M) ** 2 / M))


@dataclass(frozen=True)
class TraceRow:
    n: int
    t: float
    mass: float
    chi2: float
    entropy: float
    min_rho: float
    solver_iters: int
    residual: float


@dataclass
class RunTrace:
    rows: list = field(default_factory=list)
    entropy_name: str = "chi2"

    def append(self, row):
        if self.rows and row.n <= self.rows[-1].n:
            raise ValueError("trace rows must have increasing step index")
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])


@dataclass(frozen=True)
class DecayFit:
    """Geometric fit ``chi2_n ~ C q^n``; ``rate = 1 - q`` per step."""

    factor: float
    rate: float
    window: int
    exact: bool = False  # chi2 reached zero; factor/rate are sentinels


def fit_decay_rate(trace, window=20):
    """Least-squares slope of ``ln chi2`` against ``n`` over the trailing window.

    A window containing a vanishing chi-square divergence (relative to the
    squared mass) yields the sentinel ``DecayFit(0.0, 1.0, k, exact=True)``.
    """
    chi = np.asarray(trace.column("chi2") if isinstance(trace, RunTrace) else trace, float)
    steps = (
        trace.column("n").astype(float) if isinstance(trace, RunTrace) else np.arange(len(chi), dtype=float)
    )
    k = min(int(window), len(chi))
    if k < 3:
        raise ConfigurationError("decay fit needs at least 3 trace rows")
    chi, steps = chi[-k:], steps[-k:]
    scale = 1.0
    if isinstance(trace, RunTrace):
        scale = float(np.max(np.abs(trace.column("mass")))) or 1.0
    if np.any(chi <= 1e-28 * scale * scale):
        return DecayFit(0.0, 1.0, k, exact=True)
    slope = np.polyfit(steps, np.log(chi), 1)[0]
    q = float(np.exp(slope))
    return DecayFit(q, 1.0 - q, k)


def step(state, scheme, fields=None, tol=1e-12, max_iter=None, method="bicgstab"):
    """Advance one implicit-Euler step.

    Returns the new state and the solver report.  Solver failures are raised
    as :class:`ConvergenceError` carrying the step index.
    """
    f = None if fields is None else fields.f
    if f is not None and not np.any(f):
        f = None
    b = scheme.rhs(state.g, f)
    try:
        g, report = solve(scheme.A_fd, b, x0=state.g, tol=tol, max_iter=max_iter, method=method)
    except ConvergenceError as exc:
        raise ConvergenceError(f"step {state.n + 1}: {exc}", exc.report, state.n + 1) from exc
    return State(state.n + 1, state.dt, g, state.M), report


@dataclass
class RunResult:
    trace: RunTrace
    state: State
    scheme: SchemeOperator
    fields: object
    grid: Grid
    snapshots: dict = field(default_factory=dict)
    steady: bool = False

    def mass_defects(self):
        """Per-step ``|m^{n+1} - m^n - dt sum(w f)| / m^0``."""
        mass = self.trace.column("mass")
        src = self.state.dt * float(np.sum(self.grid.weights * self.fields.f))
        return np.abs(np.diff(mass) - src) / abs(mass[0])


def _row(state, weights, fields, entropy, iters, residual):
    rho = state.rho
    return TraceRow(
        n=state.n,
        t=state.t,
        mass=float(np.sum(weights * rho)),
        chi2=chi2_divergence(rho, state.M, weights),
        entropy=phi_entropy(state, fields, weights, entropy),
        min_rho=float(rho.min()),
        solver_iters=int(iters),
        residual=float(residual),
    )


def run(
    problem,
    grid,
    order=None,
    dt=None,
    final_time=None,
    steady=False,
    tol_ss=None,
    max_steps=None,
    entropy="chi2",
    tol=1e-12,
    fields=None,
    initial=None,
    snapshot_every=None,
    on_step: Optional[Callable] = None,
):
    """Run the time loop.

    Parameters
    ----------
    problem : ProblemSpec
    grid : Grid
    dt, final_time : float, optional
        Default to the problem's values.
    steady : bool
        Stop when ``max|rho^{n+1} - rho^n| / dt < tol_ss`` instead of at the
        final time (``final_time`` still caps the run).
    tol_ss : float, optional
        Defaults to ``1e-10 * max(rho^0)``.
    fields : SampledFields, optional
        Pre-sampled coefficients (otherwise sampled from ``problem``).
    initial : ndarray, optional
        Initial density overriding ``fields.rho0``.
    snapshot_every : int, optional
        Keep ``rho`` every this many steps (and the last one).
    """
    order = grid.order if order is None else order
    dt = problem.dt if dt is None else dt
    if dt is None or dt <= 0:
        raise ConfigurationError("a positive time step is required")
    T = problem.final_time if final_time is None else final_time
    if fields is None:
        fields = sample(problem, grid)
    rho0 = np.asarray(fields.rho0 if initial is None else initial, float)
    scheme = assemble(grid, fields, problem.diffusion, dt, order)
    weights = grid.weights
    nsteps = max(1, int(round(T / dt))) if T is not None else None
    if max_steps is not None:
        nsteps = max_steps if nsteps is None else min(nsteps, max_steps)
    if nsteps is None:
        raise ConfigurationError("need a final time or a step limit")
    if tol_ss is None:
        tol_ss = 1e-10 * float(np.max(np.abs(rho0)))

    state = State(0, float(dt), rho0 / fields.M, np.asarray(fields.M, float))
    trace = RunTrace(entropy_name=entropy if isinstance(entropy, str) else "custom")
    trace.append(_row(state, weights, fields, entropy, 0, 0.0))
    snaps = {0: state.rho.copy()} if snapshot_every else {}
    reached = False
    for _ in range(nsteps):
        prev = state.rho
        state, rep = step(state, scheme, fields, tol=tol)
        trace.append(_row(state, weights, fields, entropy, rep.iterations, rep.residual))
        if snapshot_every and state.n % snapshot_every == 0:
            snaps[state.n] = state.rho.copy()
        if on_step is not None:
            on_step(state, rep)
        if steady and np.max(np.abs(state.rho - prev)) / dt < tol_ss:
            reached = True
            break
    if snapshot_every:
        snaps[state.n] = state.rho.copy()
    return RunResult(trace, state, scheme, fields, grid, snaps, reached)


def _fmt(x):
    return f"{x:.17g}"


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in trace.rows:
            w.writerow([
                r.n, _fmt(r.t), _fmt(r.mass), _fmt(r.chi2), _fmt(r.entropy),
                _fmt(r.min_rho), r.solver_iters, _fmt(r.residual),
            ])


def write_field_csv(grid, rho, path):
    coords = grid.coordinates()
    header = ["x", "rho"] if grid.dimension == 1 else ["x", "y", "rho"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(grid.size):
            w.writerow([_fmt(c[k]) for c in coords] + [_fmt(rho[k])])


# --------------------------------------------------------------------------
# accuracy study


def accuracy_errors(grid, rho, exact):
    """``(l2, linf)`` errors against ``exact`` sampled at the grid points.

    The l2 error is ``sqrt(dx dy sum |rho_ij - rho(x_i, y_j)|^2)``.
    """
    ref = np.asarray(exact(*grid.coordinates()), float)
    err = np.asarray(rho, float) - ref
    l2 = math.sqrt(grid.h**grid.dimension * float(np.sum(err**2)))
    return l2, float(np.max(np.abs(err)))


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    l2_error: float
    l2_order: float
    linf_error: float
    linf_order: float


def convergence_study(problem, order, points, final_time=1.0, tol=1e-12, dt_rule=None):
    """Errors at ``final_time`` on grids with ``points`` nodes per axis.

    The time step is ``dt = T / ceil(T / dx)``: the largest step not above the
    grid spacing that lands exactly on ``T``.  Orders are ``log2`` ratios of
    successive errors (``nan`` on the first grid).
    """
    points = list(points)
    if len(points) < 2:
        raise ConfigurationError("a convergence study needs at least two grids")
    if problem.exact_solution is None:
        raise ConfigurationError(f"problem {problem.name!r} has no exact solution")
    rows = []
    prev = None
    for N in points:
        cells = N - 1 if order == 2 else (N - 1) // 2
        if order == 4 and (N - 1) % 2:
            raise ConfigurationError(f"order 4 needs an odd number of points, got {N}")
        grid = build_grid(problem.bounds, cells, order, problem.dimension)
        dt = dt_rule(grid.h) if dt_rule else final_time / math.ceil(final_time / grid.h - 1e-12)
        res = run(problem, grid, dt=dt, final_time=final_time, tol=tol)
        l2, linf = accuracy_errors(grid, res.state.rho, problem.exact_solution)
        if prev is None:
            o2 = oi = float("nan")
        else:
            ratio = math.log(prev[2] / grid.h)  # log 2 when the grid is halved
            o2 = math.log(prev[0] / l2) / ratio
            oi = math.log(prev[1] / linf) / ratio
        rows.append(ConvergenceRow(N, l2, o2, linf, oi))
        prev = (l2, linf, grid.h)
    return rows
