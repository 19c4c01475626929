"""Uniform Gauss-Lobatto grids for the Q1 (order 2) and Q2 (order 4) schemes.

Points are stored flattened with the x index running fastest: in 1-based
notation the point (i, j) lives at ``(j - 1) * N + i``.  Internally all
indices are 0-based, so the flat index is ``j * N + i``.  Parity statements
(knot = odd index) refer to 1-based indices, which means a 0-based index
``i`` is a knot index when ``i % 2 == 0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = ["PointType", "Grid", "build_grid", "quadrature_weights"]


class PointType(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    KNOT = "knot"
    MIDPOINT = "midpoint"
    EDGE_CENTER_X = "edge_center_x"  # edge parallel to the x-axis: i even, j odd
    EDGE_CENTER_Y = "edge_center_y"  # edge parallel to the y-axis: i odd, j even
    CELL_CENTER = "cell_center"


def _readonly(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Immutable uniform tensor grid.

    Attributes
    ----------
    dimension : int
        1 or 2.
    bounds : tuple of (float, float)
        Interval per axis.
    cells : int
        Number of finite elements per axis (k).
    order : int
        2 (Q1, two-point Gauss-Lobatto) or 4 (Q2, three-point Gauss-Lobatto).
    n : int
        Points per axis: ``k + 1`` for order 2, ``2k + 1`` for order 4.
    h : float
        Grid spacing (half the cell width for order 4).
    """

    dimension: int
    bounds: tuple
    cells: int
    order: int
    n: int
    h: float
    axes: tuple = field(repr=False)
    point_type: np.ndarray = field(repr=False)
    on_boundary: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def shape(self):
        """Array shape of a field, ``(N,)`` or ``(N, N)`` indexed ``[j, i]``."""
        return (self.n,) * self.dimension

    @property
    def size(self):
        return self.n**self.dimension

    @property
    def measure(self):
        return float(np.prod([b - a for a, b in self.bounds]))

    def coordinates(self):
        """Flattened coordinate arrays, one per axis (x first)."""
        if self.dimension == 1:
            return (self.axes[0].copy(),)
        X, Y = np.meshgrid(self.axes[0], self.axes[1], indexing="xy")
        return X.ravel(), Y.ravel()

    def flat_index(self, *idx):
        """0-based flat index of the point with 0-based axis indices ``(i[, j])``."""
        if len(idx) != self.dimension:
            raise ConfigurationError("index arity does not match grid dimension")
        if self.dimension == 1:
            return int(idx[0])
        i, j = idx
        return int(j) * self.n + int(i)

    def axis_indices(self, flat):
        """Inverse of :meth:`flat_index`."""
        if self.dimension == 1:
            return (int(flat),)
        j, i = divmod(int(flat), self.n)
        return (i, j)

    def reshape(self, values):
        return np.asarray(values).reshape(self.shape)


def _axis_weights(n, h, order):
    w = np.empty(n)
    if order == 2:
        w[:] = h
        w[0] = w[-1] = h / 2.0
    else:
        # composite Simpson on cells of width 2h
        w[0::2] = 2.0 * h / 3.0
        w[1::2] = 4.0 * h / 3.0
        w[0] = w[-1] = h / 3.0
    return w


def quadrature_weights(grid):
    """Lumped Gauss-Lobatto weights, flattened like the grid points.

    Order 2 uses the composite trapezoid rule (h/2 at the ends, h inside);
    order 4 uses composite Simpson on cells of width 2h (h/3, 2h/3 at interior
    knots, 4h/3 at midpoints).  2D weights are tensor products.
    """
    w = _axis_weights(grid.n, grid.h, grid.order)
    if grid.dimension == 1:
        return w
    return np.outer(w, w).ravel()


def _classify(n, dimension, order):
    idx = np.arange(n)
    bnd1 = (idx == 0) | (idx == n - 1)
    if dimension == 1:
        on_boundary = bnd1
        if order == 2:
            types = np.where(bnd1, PointType.BOUNDARY, PointType.INTERIOR)
        else:
            types = np.where(idx % 2 == 0, PointType.KNOT, PointType.MIDPOINT)
        return types.astype(object), on_boundary

    I, J = np.meshgrid(idx, idx, indexing="xy")
    on_boundary = (bnd1[I] | bnd1[J]).ravel()
    if order == 2:
        types = np.where(on_boundary, PointType.BOUNDARY, PointType.INTERIOR)
        return types.astype(object), on_boundary
    knot_i = (I % 2 == 0).ravel()  # 0-based even == 1-based odd
    knot_j = (J % 2 == 0).ravel()
    types = np.empty(n * n, dtype=object)
    types[knot_i & knot_j] = PointType.KNOT
    types[~knot_i & knot_j] = PointType.EDGE_CENTER_X
    types[knot_i & ~knot_j] = PointType.EDGE_CENTER_Y
    types[~knot_i & ~knot_j] = PointType.CELL_CENTER
    return types, on_boundary


def build_grid(bounds, cells, order, dimension=None):
    """Build a uniform grid of Gauss-Lobatto points.

    Parameters
    ----------
    bounds : (a, b) or sequence of (a, b)
        Domain interval(s).  A single pair is reused for every axis.
    cells : int
        Elements per axis.
    order : {2, 4}
    dimension : {1, 2}, optional
        Inferred from ``bounds`` when omitted.
    """
    if order not in (2, 4):
        raise ConfigurationError(f"order must be 2 or 4, got {order!r}")
    bounds_arr = np.asarray(bounds, dtype=float)
    if bounds_arr.ndim == 1:
        bounds_arr = bounds_arr[None, :]
    if dimension is None:
        dimension = bounds_arr.shape[0]
    if dimension not in (1, 2):
        raise ConfigurationError(f"dimension must be 1 or 2, got {dimension!r}")
    if bounds_arr.shape[0] == 1 and dimension == 2:
        bounds_arr = np.repeat(bounds_arr, 2, axis=0)
    if bounds_arr.shape != (dimension, 2):
        raise ConfigurationError("bounds must give one (a, b) pair per axis")
    if int(cells) != cells or cells < 1:
        raise ConfigurationError(f"cells must be a positive integer, got {cells!r}")
    cells = int(cells)
    widths = bounds_arr[:, 1] - bounds_arr[:, 0]
    if not np.all(np.isfinite(widths)) or np.any(widths <= 0):
        raise ConfigurationError("domain bounds must be finite with b > a")
    if dimension == 2 and not np.isclose(widths[0], widths[1], rtol=1e-12, atol=0):
        raise ConfigurationError("2D grids must have equal spacing on both axes")

    n = cells + 1 if order == 2 else 2 * cells + 1
    h = float(widths[0]) / (n - 1)
    axes = []
    for a, b in bounds_arr:
        x = a + h * np.arange(n)
        x[-1] = b  # pin the far endpoint exactly
        axes.append(_readonly(x))
    axes = tuple(axes)
    types, on_boundary = _classify(n, dimension, order)
    w = _axis_weights(n, h, order)
    weights = w if dimension == 1 else np.outer(w, w).ravel()
    return Grid(
        dimension=dimension,
        bounds=tuple((float(a), float(b)) for a, b in bounds_arr),
        cells=cells,
        order=order,
        n=n,
        h=h,
        axes=axes,
        point_type=_readonly(types),
        on_boundary=_readonly(on_boundary),
        weights=_readonly(weights),
    )
