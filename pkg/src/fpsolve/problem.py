"""Problem definitions, coefficient sampling and the built-in catalog.

A :class:`ProblemSpec` carries point samplers: plain callables taking the
coordinate arrays ``(x,)`` or ``(x, y)`` and returning an array (or scalar)
of values.  :func:`sample` evaluates them on a grid.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, PositivityError
from .grid import Grid, build_grid

__all__ = [
    "Model",
    "ProblemSpec",
    "SampledFields",
    "sample",
    "velocity_from_stream",
    "check_discrete_div_free",
    "divergence_residual",
    "catalog",
    "get_problem",
    "accuracy_problem",
    "smile_problem",
    "cross_problem",
    "flat_problem",
    "ou_problem",
    "load_table",
    "CATALOG_NAMES",
]

Sampler = Callable[..., np.ndarray]


class Model(enum.Enum):
    MODEL1 = "model1"  # prescribed invariant measure, solenoidal u
    MODEL2 = "model2"  # general drift b, no decomposition


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    model: Model
    dimension: int
    bounds: tuple
    diffusion: float
    initial_density: Optional[Sampler] = None
    invariant_measure: Optional[Sampler] = None
    velocity: Optional[tuple] = None
    stream: Optional[Sampler] = None
    drift: Optional[tuple] = None
    source: Optional[Sampler] = None
    measure_gradient: Optional[Sampler] = None
    exact_solution: Optional[Sampler] = None
    final_time: float = 1.0
    dt: Optional[float] = None
    eps0: float = 1e-10
    zero_normal_velocity: bool = True
    table: Optional[dict] = field(default=None, repr=False)

    def __post_init__(self):
        if self.diffusion < 0:
            raise ConfigurationError("diffusion constant must be nonnegative")
        if self.final_time <= 0:
            raise ConfigurationError("final time must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ConfigurationError("time step must be positive")
        if self.dimension not in (1, 2):
            raise ConfigurationError("dimension must be 1 or 2")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class SampledFields:
    """Coefficient values at every grid point (flattened grid order)."""

    M: np.ndarray
    u: np.ndarray
    v: Optional[np.ndarray]
    rho0: np.ndarray
    f: np.ndarray
    measure_gradient: Optional[Sampler] = field(default=None, repr=False)
    eps0: float = 1e-10

    @property
    def g0(self):
        return self.rho0 / self.M

    @property
    def velocity(self):
        return (self.u,) if self.v is None else (self.u, self.v)


def _eval(sampler, coords, size):
    if sampler is None:
        return np.zeros(size)
    out = np.asarray(sampler(*coords), dtype=float)
    return np.broadcast_to(out, (size,)).astype(float, copy=True)


def _zero_normal(grid, u, v):
    u = u.copy()
    if grid.dimension == 1:
        u[[0, -1]] = 0.0
        return u, v
    v = v.copy()
    U, V = grid.reshape(u), grid.reshape(v)
    U[:, [0, -1]] = 0.0
    V[[0, -1], :] = 0.0
    return U.ravel(), V.ravel()


def sample(problem, grid, zero_normal=None):
    """Evaluate every sampler of ``problem`` on ``grid``.

    Model 2 is mapped onto the Model 1 form with ``M = 1`` and ``u = -b``.
    For Model 1 the boundary-normal velocity component is set to zero unless
    ``zero_normal`` (default ``problem.zero_normal_velocity``) is false.
    """
    if problem.dimension != grid.dimension:
        raise ConfigurationError(
            f"problem is {problem.dimension}D but grid is {grid.dimension}D"
        )
    if zero_normal is None:
        zero_normal = problem.zero_normal_velocity
    if problem.table is not None:
        return _sample_table(problem, grid)

    coords = grid.coordinates()
    n = grid.size
    rho0 = _eval(problem.initial_density, coords, n)
    f = _eval(problem.source, coords, n)
    v = None
    if problem.model is Model.MODEL2:
        M = np.ones(n)
        b = problem.drift or ()
        u = -_eval(b[0] if b else None, coords, n)
        if grid.dimension == 2:
            v = -_eval(b[1] if len(b) > 1 else None, coords, n)
        # Model 2 velocity is taken verbatim
        zero_normal = False
        grad = None
    else:
        M = _eval(problem.invariant_measure, coords, n) if problem.invariant_measure else np.ones(n)
        if problem.stream is not None:
            if grid.dimension != 2:
                raise ConfigurationError("stream functions need a 2D grid")
            u, v = velocity_from_stream(problem.stream, grid, zero_normal=False)
        else:
            vel = problem.velocity or ()
            u = _eval(vel[0] if vel else None, coords, n)
            if grid.dimension == 2:
                v = _eval(vel[1] if len(vel) > 1 else None, coords, n)
        grad = problem.measure_gradient
    if zero_normal:
        u, v = _zero_normal(grid, u, v)
    _check_measure(M, problem.eps0, grid)
    return SampledFields(M=M, u=u, v=v, rho0=rho0, f=f, measure_gradient=grad, eps0=problem.eps0)


def _check_measure(M, eps0, grid):
    if not np.all(np.isfinite(M)):
        raise PositivityError("invariant measure has non-finite samples")
    bad = np.flatnonzero(M < eps0)
    if bad.size:
        k = int(bad[np.argmin(M[bad])])
        point = tuple(float(c[k]) for c in grid.coordinates())
        raise PositivityError(
            f"invariant measure {M[k]:.3e} < eps0={eps0:g} at point {point} (index {k})",
            index=k,
            point=point,
            value=float(M[k]),
        )


# --------------------------------------------------------------------------
# stream functions and discrete divergence


def _diff_1d(p, h):
    """Parity-dependent first-difference weights (offset -> weight)."""
    if p == "wide":
        return {-2: 1.0 / (4 * h), -1: -4.0 / (4 * h), 1: 4.0 / (4 * h), 2: -1.0 / (4 * h)}
    return {-1: -1.0 / (2 * h), 1: 1.0 / (2 * h)}


def _parity(n, order):
    """'wide' at knot indices of the order-4 grid, 'narrow' elsewhere."""
    if order == 2:
        return np.array(["narrow"] * n)
    return np.where(np.arange(n) % 2 == 0, "wide", "narrow")


def velocity_from_stream(psi, grid, order=None, zero_normal=True):
    """Velocity ``(u, v) = (-d_y psi, d_x psi)`` with the scheme's own differences.

    ``psi`` is evaluated on the grid extended by two ghost layers per side.
    Along each axis the difference at a knot index (order 4) is the wide
    stencil ``(p[-2] - 4 p[-1] + 4 p[+1] - p[+2]) / (4h)``, elsewhere the
    centered ``(p[+1] - p[-1]) / (2h)``.  Because the x- and y-differences
    used at ``(i, j)`` depend only on the parity of ``i`` and ``j``
    respectively, the resulting field annihilates the scheme's discrete
    divergence at every point whose stencil avoids the boundary.
    """
    if grid.dimension != 2:
        raise ConfigurationError("velocity_from_stream needs a 2D grid")
    order = grid.order if order is None else order
    n, h = grid.n, grid.h
    ext = [np.concatenate([ax[0] - h * np.array([2.0, 1.0]), ax, ax[-1] + h * np.array([1.0, 2.0])]) for ax in grid.axes]
    X, Y = np.meshgrid(ext[0], ext[1], indexing="xy")
    try:
        P = np.asarray(psi(X, Y), dtype=float)
        P = np.broadcast_to(P, X.shape)
    except Exception as exc:  # noqa: BLE001 - any failure means psi is unusable
        raise ConfigurationError(f"stream function not evaluable on ghost layers: {exc}") from exc
    if not np.all(np.isfinite(P)):
        raise ConfigurationError("stream function not finite on ghost layers")

    par = _parity(n, order)
    U = np.zeros((n, n))
    V = np.zeros((n, n))
    core = slice(2, n + 2)
    for k in range(n):
        # y-difference along row j = k  (u = -d_y psi)
        for off, wgt in _diff_1d(par[k], h).items():
            U[k, :] -= wgt * P[2 + k + off, core]
        # x-difference along column i = k  (v = d_x psi)
        for off, wgt in _diff_1d(par[k], h).items():
            V[:, k] += wgt * P[core, 2 + k + off]
    u, v = U.ravel(), V.ravel()
    if zero_normal:
        u, v = _zero_normal(grid, u, v)
    return u, v


def _reflect_pad(a, axis):
    """Pad by two ghost layers along ``axis`` with odd reflection (normal velocity)."""
    a = np.moveaxis(a, axis, 0)
    if a.shape[0] > 2:
        lo, hi = -a[[2, 1]], -a[[-2, -3]]
    else:
        # outer ghost layer is only read by order-4 stencils, which need n >= 3
        z = np.zeros_like(a[:1])
        lo, hi = np.concatenate([z, -a[[1]]]), np.concatenate([-a[[-2]], z])
    out = np.concatenate([lo, a, hi], axis=0)
    return np.moveaxis(out, 0, axis)


def _axis_divergence(w, axis, order, h, n):
    """Advection row sums of one axis, using the ghost convention plus the
    boundary self-term that appears when the normal component is nonzero."""
    p = np.moveaxis(_reflect_pad(w, axis), axis, 0)
    wm = np.moveaxis(w, axis, 0)
    out = np.empty_like(wm)
    par = _parity(n, order)
    for k in range(n):
        c = k + 2
        if par[k] == "wide":
            out[k] = (-p[c - 2] + 4 * p[c - 1] - 4 * p[c + 1] + p[c + 2]) / (4 * h)
        else:
            out[k] = (p[c - 1] - p[c + 1]) / (2 * h)
    first = 3.0 / (2 * h) if order == 4 else 1.0 / h
    out[0] = out[0] - first * wm[0]
    out[-1] = out[-1] + first * wm[-1]
    return np.moveaxis(out, 0, axis)


def divergence_residual(fields, grid, order=None):
    """Pointwise discrete divergence seen by the scheme (flattened).

    At interior points this is the left side of the scheme's discrete
    divergence-free constraint, e.g. ``(u[i-1] - u[i+1]) / (2h) + ...`` for
    order 2.  Near the boundary the ghost convention applies.
    """
    order = grid.order if order is None else order
    if grid.dimension == 1:
        return _axis_divergence(np.asarray(fields.u, float), 0, order, grid.h, grid.n)
    U = grid.reshape(fields.u)
    V = grid.reshape(fields.v)
    return (_axis_divergence(U, 1, order, grid.h, grid.n) + _axis_divergence(V, 0, order, grid.h, grid.n)).ravel()


def check_discrete_div_free(fields, grid, order=None, mask=None):
    """Maximum absolute discrete divergence over the grid (or over ``mask``)."""
    r = np.abs(divergence_residual(fields, grid, order))
    if mask is not None:
        r = r[np.asarray(mask, bool)]
    return float(r.max()) if r.size else 0.0


# --------------------------------------------------------------------------
# catalog


def _accuracy_fields(source_form):
    def measure(x, y):
        return 2.0 + np.sin(x) * np.sin(y)

    def grad_measure(x, y):
        return np.cos(x) * np.sin(y), np.sin(x) * np.cos(y)

    def u(x, y):
        return np.sin(x) * np.cos(y)

    def v(x, y):
        return np.cos(x) * np.sin(y)

    def exact(x, y):
        return (3 * np.cos(x) * np.cos(y) + 3) * (2 + np.sin(x) * np.sin(y))

    def source(x, y):
        # g = rho/M = 3 cos x cos y + 3, D = 1:
        #   div(M grad g)     = -12 cx cy - 12 sx cx sy cy
        #   u . grad g        = -3 sx^2 cy^2 - 3 cx^2 sy^2
        #   g div u           = 6 cx^2 cy^2 + 6 cx cy
        sx, cx, sy, cy = np.sin(x), np.cos(x), np.sin(y), np.cos(y)
        f = 12 * cx * cy + 12 * sx * cx * sy * cy + 3 * sx**2 * cy**2 + 3 * cx**2 * sy**2
        if source_form == "conservative":
            f = f - 6 * cx**2 * cy**2 - 6 * cx * cy
        return f

    return measure, grad_measure, (u, v), exact, source


def accuracy_problem(source_form="conservative"):
    """Manufactured steady state on (0, pi)^2.

    ``source_form`` selects how the advection term is differentiated when
    building the source: ``"conservative"`` uses ``div(u g)`` (what the
    scheme discretizes), ``"advective"`` uses ``u . grad g``.
    """
    if source_form not in ("conservative", "advective"):
        raise ConfigurationError("source_form must be 'conservative' or 'advective'")
    measure, grad, vel, exact, source = _accuracy_fields(source_form)
    return ProblemSpec(
        name="accuracy",
        model=Model.MODEL1,
        dimension=2,
        bounds=((0.0, math.pi), (0.0, math.pi)),
        diffusion=1.0,
        initial_density=exact,
        invariant_measure=measure,
        velocity=vel,
        source=source,
        measure_gradient=grad,
        exact_solution=exact,
        final_time=1.0,
        dt=None,
    )


def cellular_stream(amplitude, wave_number):
    def psi(x, y):
        return amplitude * np.sin(wave_number * np.pi * x) * np.sin(wave_number * np.pi * y)

    return psi


def _banana(cx, cy, r2, ycenter, ywidth):
    """exp(-20 [(x-cx)^2 + (y-cy)^2 - r2]^2 - ywidth (y - ycenter)^2) and its gradient."""

    def value_grad(x, y):
        q = (x - cx) ** 2 + (y - cy) ** 2 - r2
        e = np.exp(-20 * q**2 - ywidth * (y - ycenter) ** 2)
        gx = e * (-80 * q * (x - cx))
        gy = e * (-80 * q * (y - cy) - 2 * ywidth * (y - ycenter))
        return e, gx, gy

    return value_grad


_SMILE_TERMS = (
    _banana(1.2, 1.2, 0.5, 2.0, 10.0),
    _banana(-1.2, 1.2, 0.5, 2.0, 10.0),
    _banana(0.0, 0.0, 2.0, -1.0, 10.0),
)


def smile_target(x, y):
    return sum(t(x, y)[0] for t in _SMILE_TERMS) + 0.1


def smile_target_gradient(x, y):
    parts = [t(x, y) for t in _SMILE_TERMS]
    return sum(p[1] for p in parts), sum(p[2] for p in parts)


def smile_initial(x, y):
    return (
        np.exp(-16 * (x + 3) ** 2 - 4 * y**2)
        + np.exp(-16 * (x - 3) ** 2 - 4 * y**2)
        + np.exp(-4 * x**2 - 16 * (y + 3) ** 2)
        + np.exp(-4 * x**2 - 16 * (y - 3) ** 2)
        + 0.1
    )


def smile_problem(amplitude=0.2, wave_number=10.0 / 9.0, diffusion=1.0):
    """Triple-banana target on [-4.5, 4.5]^2 stirred by a cellular flow.

    The default wave number makes ``sin(k pi x)`` vanish at ``x = +-4.5``, so
    the stream function is odd about the boundary and the flow has no normal
    component there.  With other wave numbers the boundary-normal velocity is
    zeroed after sampling, which breaks discrete divergence-freeness in the
    boundary rows.
    """
    return ProblemSpec(
        name="smile",
        model=Model.MODEL1,
        dimension=2,
        bounds=((-4.5, 4.5), (-4.5, 4.5)),
        diffusion=diffusion,
        initial_density=smile_initial,
        invariant_measure=smile_target,
        stream=cellular_stream(amplitude, wave_number),
        measure_gradient=smile_target_gradient,
        final_time=2.0,
        dt=0.01,
    )


def _gauss(ax, cx, ay, cy, weight=1.0):
    def value_grad(x, y):
        e = weight * np.exp(-ax * (x - cx) ** 2 - ay * (y - cy) ** 2)
        return e, -2 * ax * (x - cx) * e, -2 * ay * (y - cy) * e

    return value_grad


_CROSS_TARGET = (
    _gauss(1.0, -3.0, 0.25, 0.0),
    _gauss(1.0, 3.0, 0.25, 0.0),
    _gauss(4.0, 0.0, 16.0, -1.0, 0.5),
    _gauss(4.0, 0.0, 16.0, 1.0, 0.5),
)
_CROSS_INITIAL = (
    _gauss(16.0, -1.0, 4.0, 0.0, 0.5),
    _gauss(16.0, 1.0, 4.0, 0.0, 0.5),
    _gauss(0.25, 0.0, 1.0, -3.0),
    _gauss(0.25, 0.0, 1.0, 3.0),
)


def cross_target(x, y):
    return sum(t(x, y)[0] for t in _CROSS_TARGET) + 0.1


def cross_target_gradient(x, y):
    parts = [t(x, y) for t in _CROSS_TARGET]
    return sum(p[1] for p in parts), sum(p[2] for p in parts)


def cross_initial(x, y):
    return sum(t(x, y)[0] for t in _CROSS_INITIAL) + 0.1


def cross_problem():
    return ProblemSpec(
        name="cross",
        model=Model.MODEL1,
        dimension=2,
        bounds=((-3.0, 3.0), (-3.0, 3.0)),
        diffusion=0.5,
        initial_density=cross_initial,
        invariant_measure=cross_target,
        stream=cellular_stream(0.2, 1.0),
        measure_gradient=cross_target_gradient,
        final_time=2.0,
        dt=0.02,
    )


def flat_problem(dimension=1, diffusion=1.0):
    """Uniform measure, no flow: pure diffusion on the unit interval/square."""
    if dimension == 1:
        rho0 = lambda x: 1.0 + 0.5 * np.cos(np.pi * x)  # noqa: E731
        grad = lambda x: np.zeros_like(x)  # noqa: E731
    else:
        rho0 = lambda x, y: 1.0 + 0.5 * np.cos(np.pi * x) * np.cos(np.pi * y)  # noqa: E731
        grad = lambda x, y: (np.zeros_like(x), np.zeros_like(y))  # noqa: E731
    return ProblemSpec(
        name="flat",
        model=Model.MODEL1,
        dimension=dimension,
        bounds=((0.0, 1.0),) * dimension,
        diffusion=diffusion,
        initial_density=rho0,
        measure_gradient=grad,
        final_time=0.1,
        dt=0.001,
    )


def ou_problem(dimension=1):
    """Model 2 with the linear restoring drift b = -x on [-3, 3]^d."""
    if dimension == 1:
        drift = (lambda x: -x,)
        rho0 = lambda x: 0.1 + np.exp(-4 * (x - 1.5) ** 2)  # noqa: E731
    else:
        drift = (lambda x, y: -x, lambda x, y: -y)
        rho0 = lambda x, y: 0.1 + np.exp(-4 * (x - 1.5) ** 2 - 4 * (y + 1) ** 2)  # noqa: E731
    return ProblemSpec(
        name="ou",
        model=Model.MODEL2,
        dimension=dimension,
        bounds=((-3.0, 3.0),) * dimension,
        diffusion=1.0,
        initial_density=rho0,
        drift=drift,
        final_time=1.0,
        dt=0.01,
    )


CATALOG_NAMES = ("accuracy", "smile", "cross", "flat", "ou")


def catalog():
    return {
        "accuracy": accuracy_problem,
        "smile": smile_problem,
        "cross": cross_problem,
        "flat": flat_problem,
        "ou": ou_problem,
    }


def get_problem(name, **kwargs):
    try:
        factory = catalog()[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown problem {name!r}; choose from {', '.join(CATALOG_NAMES)} or a custom table"
        ) from None
    return factory(**kwargs)


# --------------------------------------------------------------------------
# tabulated fields

_TABLE_COLUMNS = {1: ("x", "M", "u", "rho0"), 2: ("x", "y", "M", "u", "v", "rho0")}


def load_table(path, order, diffusion=1.0, eps0=1e-10, final_time=1.0, dt=None):
    """Read per-point fields from CSV and return ``(problem, grid)``.

    2D header ``x,y,M,u,v,rho0``; 1D header ``x,M,u,rho0``.  Rows are in
    flattened grid order (x fastest).  The grid is inferred from the
    coordinates and checked row by row.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise ConfigurationError(f"{path}: empty table") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    dimension = next((d for d, cols in _TABLE_COLUMNS.items() if tuple(header) == cols), None)
    if dimension is None:
        raise ConfigurationError(
            f"{path}: header must be {','.join(_TABLE_COLUMNS[2])} or {','.join(_TABLE_COLUMNS[1])}"
        )
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ConfigurationError(f"{path}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ConfigurationError(f"{path}: ragged rows")
    cols = {name: data[:, k] for k, name in enumerate(header)}
    nrows = data.shape[0]
    n = round(nrows ** (1.0 / dimension))
    if n**dimension != nrows or n < 2:
        raise ConfigurationError(f"{path}: {nrows} rows is not a full {dimension}D tensor grid")
    if order == 4 and n % 2 == 0:
        raise ConfigurationError(f"{path}: order 4 needs an odd number of points per axis, got {n}")
    cells = n - 1 if order == 2 else (n - 1) // 2
    bounds = [(float(cols["x"].min()), float(cols["x"].max()))]
    if dimension == 2:
        bounds.append((float(cols["y"].min()), float(cols["y"].max())))
    grid = build_grid(bounds, cells, order, dimension)
    coords = grid.coordinates()
    names = ("x", "y")[:dimension]
    for name, c in zip(names, coords):
        if not np.allclose(cols[name], c, rtol=0, atol=1e-9 * max(1.0, np.abs(c).max())):
            raise ConfigurationError(f"{path}: column {name} does not follow flattened grid order")
    table = {"M": cols["M"], "u": cols["u"], "v": cols.get("v"), "rho0": cols["rho0"], "n": nrows}
    problem = ProblemSpec(
        name=f"table:{path}",
        model=Model.MODEL1,
        dimension=dimension,
        bounds=grid.bounds,
        diffusion=diffusion,
        final_time=final_time,
        dt=dt,
        eps0=eps0,
        table=table,
    )
    return problem, grid


def _sample_table(problem, grid):
    t = problem.table
    if t["n"] != grid.size:
        raise ConfigurationError(f"table has {t['n']} rows but the grid has {grid.size} points")
    M = np.array(t["M"], float)
    _check_measure(M, problem.eps0, grid)
    v = None if t["v"] is None else np.array(t["v"], float)
    return SampledFields(
        M=M,
        u=np.array(t["u"], float),
        v=v,
        rho0=np.array(t["rho0"], float),
        f=np.zeros(grid.size),
        measure_gradient=None,
        eps0=problem.eps0,
    )
