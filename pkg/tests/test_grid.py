import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpsolve.errors import ConfigurationError
from fpsolve.grid import PointType, build_grid, quadrature_weights


def test_order4_1d_points_and_types():
    g = build_grid((-1.0, 1.0), 2, 4)
    assert g.n == 5
    assert g.h == 0.5
    np.testing.assert_array_equal(g.axes[0], [-1.0, -0.5, 0.0, 0.5, 1.0])
    assert list(g.point_type) == [
        PointType.KNOT, PointType.MIDPOINT, PointType.KNOT, PointType.MIDPOINT, PointType.KNOT
    ]
    assert list(g.on_boundary) == [True, False, False, False, True]


def test_order2_2d_square():
    g = build_grid((0.0, math.pi), 4, 2, dimension=2)
    assert g.n == 5 and g.size == 25
    assert g.h == pytest.approx(math.pi / 4, rel=1e-15)
    assert g.shape == (5, 5)


def test_coarse_smile_grid_size():
    g = build_grid((-4.5, 4.5), 100, 2, dimension=2)
    assert g.shape == (101, 101)


def test_flat_index_is_x_fastest():
    g = build_grid(((0.0, 1.0), (0.0, 1.0)), 2, 2)
    x, y = g.coordinates()
    k = g.flat_index(2, 1)
    assert k == 1 * 3 + 2
    assert (x[k], y[k]) == (1.0, 0.5)
    assert g.axis_indices(k) == (2, 1)


def test_order4_2d_classification_parity():
    g = build_grid(((0.0, 1.0), (0.0, 1.0)), 2, 4)
    T = g.point_type.reshape(g.shape)  # [j, i]
    assert T[0, 0] is PointType.KNOT
    assert T[2, 2] is PointType.KNOT
    assert T[1, 1] is PointType.CELL_CENTER
    # edge parallel to x: i in the middle of an x-edge (0-based odd), j on a knot row
    assert T[0, 1] is PointType.EDGE_CENTER_X
    assert T[1, 0] is PointType.EDGE_CENTER_Y
    counts = {t: int(np.sum(g.point_type == t)) for t in PointType}
    assert counts[PointType.KNOT] == 9 and counts[PointType.CELL_CENTER] == 4
    assert counts[PointType.EDGE_CENTER_X] == counts[PointType.EDGE_CENTER_Y] == 6


def test_one_cell_order4_weights():
    h = 0.25
    g = build_grid((0.0, 2 * h), 1, 4)
    np.testing.assert_allclose(g.weights, [h / 3, 4 * h / 3, h / 3], rtol=1e-15)


def test_order2_weights():
    g = build_grid((0.0, 1.0), 4, 2)
    np.testing.assert_allclose(g.weights, [0.125, 0.25, 0.25, 0.25, 0.125], rtol=1e-15)


def test_2d_cell_center_weight_is_tensor_product():
    g = build_grid(((0.0, 2.0), (0.0, 2.0)), 2, 4)
    k = g.flat_index(1, 1)
    assert g.weights[k] == pytest.approx((4 * g.h / 3) ** 2, rel=1e-15)
    np.testing.assert_allclose(quadrature_weights(g), g.weights)


@settings(max_examples=60, deadline=None)
@given(
    cells=st.integers(1, 64),
    order=st.sampled_from([2, 4]),
    dim=st.sampled_from([1, 2]),
    a=st.floats(-10, 10),
    width=st.floats(0.01, 20),
)
def test_weights_positive_and_sum_to_measure(cells, order, dim, a, width):
    g = build_grid(((a, a + width),) * dim, cells, order)
    assert np.all(g.weights > 0)
    assert g.weights.sum() == pytest.approx(width**dim, rel=1e-13)
    assert g.axes[0][-1] == a + width
    # every index gets exactly one type
    assert len(g.point_type) == g.size
    assert all(isinstance(t, PointType) for t in g.point_type)


def test_grid_is_immutable():
    g = build_grid((0.0, 1.0), 3, 2)
    with pytest.raises(ValueError):
        g.weights[0] = 1.0
    with pytest.raises(AttributeError):
        g.h = 2.0


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(bounds=(0.0, 1.0), cells=2, order=3),
        dict(bounds=(0.0, 1.0), cells=2, order=2, dimension=3),
        dict(bounds=(1.0, 1.0), cells=2, order=2),
        dict(bounds=(0.0, 1.0), cells=0, order=2),
        dict(bounds=((0.0, 1.0), (0.0, 2.0)), cells=2, order=2),
    ],
)
def test_invalid_configurations(kwargs):
    with pytest.raises(ConfigurationError):
        build_grid(**kwargs)
