"""Finite-difference assembly of the implicit-Euler Q1/Q2 schemes.

Every scheme row is a sum of one-dimensional rows, one per axis::

    A_fd[r, :] = M_r e_r + dt * sum_axes (diffusion_axis + advection_axis)[r, :]

Along an axis the 1D row depends on the (1-based) parity of the point's index
on that axis: order 2 always uses the three-point row, order 4 uses the
five-point knot row at odd indices and the three-point midpoint row at even
indices.  A knot in 2D is knot-type on both axes, an edge center on one, a
cell center on none, so the 2D edge rows parallel to x are produced from the
same 1D rows as the rows parallel to y with the roles of (i, u) and (j, v)
exchanged.

Boundary rows are written with ghost values mirrored across the boundary
node (measure and g even, the normal velocity odd) and folded back onto the
mirrored columns.  When the boundary-normal velocity does not vanish (Model 2
drifts) the boundary rows additionally carry the self term of the
quadrature scheme, so the assembled rows always equal the quadrature scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, StencilError
from .grid import Grid

__all__ = ["ghost_map", "SchemeOperator", "assemble", "build_rhs", "dump_coo"]


def ghost_map(n, index):
    """Mirror a 0-based axis index reaching up to two points past a boundary.

    Returns ``(mirrored_index, velocity_sign)``.  ``-1 -> 1``, ``-2 -> 2``,
    ``n -> n - 2``, ``n + 1 -> n - 3``; the normal velocity flips sign under
    the reflection while the measure and ``g`` do not.  In the 1-based
    notation this is ``0 -> 2``, ``-1 -> 3``, ``N+1 -> N-1``, ``N+2 -> N-2``.
    """
    if 0 <= index < n:
        return index, 1.0
    if -2 <= index < 0:
        return -index, -1.0
    if n <= index <= n + 1:
        return 2 * (n - 1) - index, -1.0
    raise StencilError(f"index {index} is more than two points outside [0, {n - 1}]")


def _pad(a, n, odd):
    """Two ghost layers on each side of the last axis of ``a``."""
    out = np.full(a.shape[:-1] + (n + 4,), np.nan)
    out[..., 2 : n + 2] = a
    for k in (-2, -1, n, n + 1):
        m, sign = ghost_map(n, k)
        if 0 <= m < n:
            out[..., k + 2] = (sign if odd else 1.0) * a[..., m]
    return out


def _interior_row(Mp, up, i, order, wide, h, D):
    """Coefficients of one 1D row at axis index ``i`` (0-based) over all lines.

    Returns ``{offset: (diffusion, advection)}`` with arrays over lines.
    ``Mp``/``up`` carry two ghost layers, so ``m(o)`` is the value at ``i + o``.
    """
    m = lambda o: Mp[:, i + 2 + o]  # noqa: E731
    w = lambda o: up[:, i + 2 + o]  # noqa: E731
    zero = np.zeros(Mp.shape[0])
    if order == 2:
        c = 2 * h * h
        return {
            -1: (-D * (m(-1) + m(0)) / c, w(-1) / (2 * h)),
            0: (D * (m(-1) + 2 * m(0) + m(1)) / c, zero),
            1: (-D * (m(0) + m(1)) / c, -w(1) / (2 * h)),
        }
    if wide:
        c = 8 * h * h
        return {
            -2: (D * (3 * m(-2) - 4 * m(-1) + 3 * m(0)) / c, -w(-2) / (4 * h)),
            -1: (-D * (4 * m(-2) + 12 * m(0)) / c, 4 * w(-1) / (4 * h)),
            0: (D * (m(-2) + 4 * m(-1) + 18 * m(0) + 4 * m(1) + m(2)) / c, zero),
            1: (-D * (12 * m(0) + 4 * m(2)) / c, -4 * w(1) / (4 * h)),
            2: (D * (3 * m(0) - 4 * m(1) + 3 * m(2)) / c, w(2) / (4 * h)),
        }
    c = 4 * h * h
    return {
        -1: (-D * (3 * m(-1) + m(1)) / c, w(-1) / (2 * h)),
        0: (4 * D * (m(-1) + m(1)) / c, zero),
        1: (-D * (m(-1) + 3 * m(1)) / c, -w(1) / (2 * h)),
    }


def _boundary_row(M, u, i, n, order, h, D):
    """Pre-ghost boundary rows of the quadrature scheme, absolute axis indices."""
    m = lambda k: M[:, k]  # noqa: E731
    w = lambda k: u[:, k]  # noqa: E731
    if order == 2:
        c = h * h
        if i == 0:
            return {
                0: (D * (m(0) + m(1)) / c, -w(0) / h),
                1: (-D * (m(0) + m(1)) / c, -w(1) / h),
            }
        N = n - 1
        return {
            N - 1: (-D * (m(N - 1) + m(N)) / c, w(N - 1) / h),
            N: (D * (m(N - 1) + m(N)) / c, w(N) / h),
        }
    c = 4 * h * h
    if i == 0:
        return {
            0: (D * (9 * m(0) + 4 * m(1) + m(2)) / c, -3 * w(0) / (2 * h)),
            1: (-D * (12 * m(0) + 4 * m(2)) / c, -4 * w(1) / (2 * h)),
            2: (D * (3 * m(0) - 4 * m(1) + 3 * m(2)) / c, w(2) / (2 * h)),
        }
    N = n - 1
    return {
        N - 2: (D * (3 * m(N - 2) - 4 * m(N - 1) + 3 * m(N)) / c, -w(N - 2) / (2 * h)),
        N - 1: (-D * (4 * m(N - 2) + 12 * m(N)) / c, 4 * w(N - 1) / (2 * h)),
        N: (D * (m(N - 2) + 4 * m(N - 1) + 9 * m(N)) / c, 3 * w(N) / (2 * h)),
    }


def _axis_entries(M, u, order, h, D, route):
    """COO pieces ``(line, axis_row, axis_col, diff, adv)`` of one axis operator.

    ``M`` and ``u`` have shape ``(lines, n)`` with the axis last.
    """
    lines, n = M.shape
    if order == 4 and n < 3:
        raise ConfigurationError("order 4 needs at least 3 points per axis")
    Mp = _pad(M, n, odd=False)
    up = _pad(u, n, odd=True)
    line_ids = np.arange(lines)
    pieces = []
    self_term = 3.0 / (2 * h) if order == 4 else 1.0 / h
    for i in range(n):
        wide = order == 4 and i % 2 == 0
        if route == "explicit" and (i == 0 or i == n - 1):
            for col, (dv, av) in _boundary_row(M, u, i, n, order, h, D).items():
                pieces.append((line_ids, i, col, dv, av))
            continue
        for off, (dv, av) in _interior_row(Mp, up, i, order, wide, h, D).items():
            col, _ = ghost_map(n, i + off)
            if route == "explicit" and col != i + off:
                raise StencilError("interior row reached a ghost point")
            pieces.append((line_ids, i, col, dv, av))
        if route == "ghost" and (i == 0 or i == n - 1):
            # zero when the normal velocity vanishes on the boundary
            sign = -1.0 if i == 0 else 1.0
            pieces.append((line_ids, i, i, np.zeros(lines), sign * self_term * u[:, i]))
    return pieces


@dataclass(frozen=True)
class SchemeOperator:
    """Assembled implicit-Euler system with its separable parts.

    ``A_fd`` is the finite-difference form that is actually solved::

        A_fd = diag(M) + dt * W^-1 (A_diff + A_adv)

    with ``W = diag(weights)`` the lumped quadrature weights.
    """

    A_fd: sp.csr_matrix
    weights: np.ndarray
    M: np.ndarray
    A_diff: sp.csr_matrix
    A_adv: sp.csr_matrix
    dt: float
    order: int
    diffusion: float
    grid: Grid = field(repr=False)

    @property
    def size(self):
        return self.A_fd.shape[0]

    def rhs(self, g_n, f=None):
        return build_rhs(self.M, g_n, self.dt, f)

    def fd_diffusion(self):
        """Diffusion part in finite-difference scaling, ``W^-1 A_diff``."""
        return sp.diags(1.0 / self.weights) @ self.A_diff

    def fd_advection(self):
        return sp.diags(1.0 / self.weights) @ self.A_adv


def _to_csr(rows, cols, vals, n):
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def assemble(grid, fields, D, dt, order=None, route="ghost"):
    """Assemble the scheme for ``grid`` and sampled ``fields``.

    Parameters
    ----------
    grid : Grid
    fields : SampledFields
    D : float
        Diffusion constant.
    dt : float
        Time step.
    order : {2, 4}, optional
        Must match ``grid.order``.
    route : {"ghost", "explicit"}
        ``"ghost"`` writes every row with the interior formula plus the
        ghost reflection; ``"explicit"`` writes boundary rows from their
        closed pre-ghost form.  Both give the same matrix when the normal
        velocity vanishes on the boundary.
    """
    order = grid.order if order is None else order
    if order != grid.order:
        raise ConfigurationError(f"grid was built for order {grid.order}, not {order}")
    if route not in ("ghost", "explicit"):
        raise ConfigurationError(f"unknown assembly route {route!r}")
    if dt <= 0:
        raise ConfigurationError("time step must be positive")
    n, N = grid.n, grid.size
    M = np.asarray(fields.M, float)
    if M.shape != (N,):
        raise ConfigurationError("fields were sampled on a different grid")

    rows, cols, dvals, avals = [], [], [], []
    if grid.dimension == 1:
        axes = [(M[None, :], np.asarray(fields.u, float)[None, :], lambda line, k: line * 0 + k)]
    else:
        if fields.v is None:
            raise ConfigurationError("2D assembly needs both velocity components")
        MM = grid.reshape(M)
        U = grid.reshape(fields.u)
        V = grid.reshape(fields.v)
        axes = [
            (MM, U, lambda line, k: line * n + k),  # x: lines are rows j
            (MM.T, V.T, lambda line, k: k * n + line),  # y: lines are columns i
        ]
    for Ma, ua, flat in axes:
        for line_ids, i, col, dv, av in _axis_entries(Ma, ua, order, grid.h, D, route):
            rows.append(flat(line_ids, i))
            cols.append(flat(line_ids, col))
            dvals.append(np.broadcast_to(dv, line_ids.shape))
            avals.append(np.broadcast_to(av, line_ids.shape))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    dvals = np.concatenate(dvals)
    avals = np.concatenate(avals)

    L_diff = _to_csr(rows, cols, dvals, N)
    L_adv = _to_csr(rows, cols, avals, N)
    L = _to_csr(rows, cols, dvals + avals, N)
    A_fd = (sp.diags(M) + dt * L).tocsr()
    A_fd.sum_duplicates()
    A_fd.sort_indices()
    W = sp.diags(grid.weights)
    return SchemeOperator(
        A_fd=A_fd,
        weights=np.asarray(grid.weights),
        M=M,
        A_diff=(W @ L_diff).tocsr(),
        A_adv=(W @ L_adv).tocsr(),
        dt=float(dt),
        order=order,
        diffusion=float(D),
        grid=grid,
    )


def build_rhs(M, g_n, dt, f=None):
    """Right-hand side ``M g^n + dt f`` (source taken at the new time level)."""
    rhs = np.asarray(M, float) * np.asarray(g_n, float)
    if f is not None:
        rhs = rhs + dt * np.asarray(f, float)
    return rhs


def dump_coo(A, path):
    """Write ``row col value`` lines (1-based indices, 17 significant digits)."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    with open(path, "w") as fh:
        for k in order:
            fh.write(f"{C.row[k] + 1} {C.col[k] + 1} {C.data[k]:.17g}\n")
