import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from fpsolve.assembly import assemble
from fpsolve.errors import ConfigurationError
from fpsolve.grid import build_grid
from fpsolve.krylov import dense_inverse
from fpsolve.monotonicity import (
    ConditionRecord,
    MonotonicityReport,
    Verdict,
    certify,
    check_sufficient_conditions,
    lorenz_split,
    m_matrix_check,
    oracle_inverse_nonneg,
    verify_lorenz,
)
from fpsolve.problem import get_problem, sample

from conftest import make_fields


def flat_1d(cells, order):
    g = build_grid((0.0, 1.0), cells, order)
    return g, make_fields(g)


def test_order2_flat_margins():
    g, f = flat_1d(8, 2)
    rep = check_sufficient_conditions(g, f, 0.7, 0.3)
    assert rep.certified
    assert rep.record("o2_mesh").margin == pytest.approx(0.7)
    assert rep.record("o2_rowsum").margin == pytest.approx(1.0)


def test_order4_flat_time_step_boundary_case():
    D = 2.0
    g, f = flat_1d(4, 4)
    dt = 50 * g.h**2 / D
    rep = check_sufficient_conditions(g, f, D, dt)
    assert rep.verdict is Verdict.CERTIFIED_MONOTONE
    assert rep.record("o4_time_step").margin == pytest.approx(0.0, abs=1e-12)
    assert rep.binding.condition == "o4_time_step"


def test_order4_constant_velocity_too_fast():
    D = 1.0
    g = build_grid((0.0, 1.0), 4, 4)
    c = D / (2 * g.h)
    f = make_fields(g, u=c)
    rep = check_sufficient_conditions(g, f, D, 50 * g.h**2 / D)
    assert rep.verdict is Verdict.CONDITIONS_FAIL
    rec = rep.record("o4_mesh_velocity")
    assert not rec.passed
    assert rec.margin == pytest.approx(-D / 4)
    assert rec in rep.failed
    assert "o4_mesh_velocity" in rep.to_text()


def test_order4_velocity_at_quarter_bound_passes():
    D = 1.0
    g = build_grid((0.0, 1.0), 4, 4)
    u = np.where(g.on_boundary, 0.0, D / (4 * g.h))
    rep = check_sufficient_conditions(g, make_fields(g, u=u), D, 50 * g.h**2)
    assert rep.record("o4_mesh_velocity").passed


def test_order2_2d_names_worst_point():
    p = get_problem("smile")
    g = build_grid(p.bounds, 8, 2)
    f = sample(p, g)
    rep = check_sufficient_conditions(g, f, p.diffusion, p.dt)
    rec = rep.record("o2_mesh")
    assert not rec.passed
    speed = g.h * np.hypot(f.u, f.v)
    assert 0 <= rec.location < g.size
    # worst slack is attained at the reported point
    MM = g.reshape(f.M)
    from scipy import ndimage

    fp = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], bool)
    mins = ndimage.minimum_filter(MM, footprint=fp, mode="nearest").ravel()
    slack = p.diffusion * mins - speed
    assert rec.margin == pytest.approx(slack.min())
    assert slack[rec.location] == slack.min()


def test_derivative_source_is_reported():
    p = get_problem("cross")
    g = build_grid(p.bounds, 6, 4)
    rep = check_sufficient_conditions(g, sample(p, g), p.diffusion, p.dt)
    assert rep.derivative_source is not None
    f = sample(p, g)
    plain = make_fields(g, M=f.M, u=f.u, v=f.v)
    rep2 = check_sufficient_conditions(g, plain, p.diffusion, p.dt)
    assert "surrogate" in rep2.derivative_source
    assert rep.derivative_source != rep2.derivative_source


def test_mismatched_order_is_configuration_error():
    g, f = flat_1d(4, 4)
    with pytest.raises(ConfigurationError):
        check_sufficient_conditions(g, f, 1.0, 1.0, order=2)


# ---------------------------------------------------------------------- Lorenz


def test_lorenz_flat_positive_parts():
    D, dt = 1.0, 0.5
    g, f = flat_1d(4, 4)
    A = assemble(g, f, D, dt).A_fd
    s = lorenz_split(A, g)
    expected = dt * D / (4 * g.h**2)
    P = s.A_a_plus.toarray()
    for k in (2, 4, 6):  # interior knots
        assert P[k, k - 2] == pytest.approx(expected, rel=1e-14)
        assert P[k, k + 2] == pytest.approx(expected, rel=1e-14)
    assert not P.diagonal().any()
    assert (s.A_a_plus.data > 0).all()
    # adjacent entries absorb the positive part
    Z = s.A_z.toarray()
    a1 = A[4, 3]
    assert Z[4, 3] == a1 + expected
    assert s.A_s.toarray()[4, 3] == a1 - Z[4, 3]


def _random_instance(rng, dim, order, cells):
    g = build_grid(((0.0, 1.0),) * dim, cells, order)
    f = make_fields(
        g,
        M=0.5 + rng.random(g.size),
        u=rng.standard_normal(g.size),
        v=rng.standard_normal(g.size) if dim == 2 else 0.0,
    )
    return g, f


@settings(max_examples=60, deadline=None)
@given(dim=st.sampled_from([1, 2]), cells=st.integers(2, 5), seed=st.integers(0, 2**31),
       dt=st.floats(1e-4, 10.0))
def test_lorenz_reconstruction_is_exact(dim, cells, seed, dt):
    rng = np.random.default_rng(seed)
    g, f = _random_instance(rng, dim, 4, cells)
    A = assemble(g, f, 0.3, dt).A_fd
    s = lorenz_split(A, g)
    R = s.reconstruct()
    mismatch = (R != A).tocoo()
    # entries with a positive A_z part cannot be split exactly in floating point
    Z = s.A_z.toarray()
    assert (Z[mismatch.row, mismatch.col] > 0).all()
    assert abs(R - A).max() <= 4 * np.finfo(float).eps * abs(s.A_s).max()
    if s.valid:
        assert mismatch.nnz == 0
    assert np.all(s.A_a_plus.data > 0)
    assert not s.A_a_plus.diagonal().any()
    assert not (s.A_z.diagonal().any() or s.A_s.diagonal().any())
    assert np.array_equal(s.A_d.toarray(), np.diag(A.diagonal()))


@settings(max_examples=60, deadline=None)
@given(dim=st.sampled_from([1, 2]), cells=st.integers(2, 5), seed=st.integers(0, 2**31),
       dt=st.floats(1e-4, 10.0))
def test_lorenz_reconstruction_exact_for_valid_splittings(dim, cells, seed, dt):
    rng = np.random.default_rng(seed)
    g = build_grid(((0.0, 1.0),) * dim, cells, 4)
    f = make_fields(g, M=0.5 + rng.random(g.size), u=0.1 * rng.standard_normal(g.size),
                    v=0.1 * rng.standard_normal(g.size) if dim == 2 else 0.0)
    s = lorenz_split(assemble(g, f, 1.0, dt).A_fd, g)
    assert s.valid
    assert (s.reconstruct() != s.A_fd).nnz == 0


@pytest.mark.parametrize("dim", [1, 2])
def test_lorenz_parts_nonpositive_when_mesh_velocity_bound_holds(dim, rng):
    D = 1.0
    g = build_grid(((0.0, 1.0),) * dim, 4, 4)
    cap = D / (20 * g.h) if dim == 2 else D / (4 * g.h)
    u = cap * rng.uniform(-1, 1, g.size) / (math.sqrt(2) if dim == 2 else 1.0)
    v = cap * rng.uniform(-1, 1, g.size) / math.sqrt(2) if dim == 2 else 0.0
    f = make_fields(g, u=u, v=v)
    rep = check_sufficient_conditions(g, f, D, 50 * g.h**2)
    assert rep.record("o4_mesh_velocity").passed
    s = lorenz_split(assemble(g, f, D, 50 * g.h**2).A_fd, g)
    assert s.valid


def test_verify_lorenz_flat_certified():
    D = 1.0
    g, f = flat_1d(4, 4)
    rep = verify_lorenz(lorenz_split(assemble(g, f, D, 50 * g.h**2 / D).A_fd, g))
    assert rep.verdict is Verdict.CERTIFIED_MONOTONE
    assert {r.condition for r in rep.records} == {
        "lorenz_signs", "lorenz_m_matrix", "lorenz_product", "lorenz_rowsum",
    }


def test_verify_lorenz_fails_for_tiny_steps():
    D = 1.0
    g, f = flat_1d(4, 4)
    rep = verify_lorenz(lorenz_split(assemble(g, f, D, g.h**2 / 1000).A_fd, g))
    rec = rep.record("lorenz_product")
    assert not rec.passed and rec.margin < 0
    assert rec.location is not None
    assert rep.verdict is Verdict.CONDITIONS_FAIL
    assert rep.record("lorenz_signs").passed


def test_order2_split_is_unsupported():
    g, f = flat_1d(4, 2)
    with pytest.raises(ConfigurationError):
        lorenz_split(assemble(g, f, 1.0, 0.1).A_fd, g)


# ---------------------------------------------------------------------- oracle


def test_oracle_examples():
    mn, ok = oracle_inverse_nonneg(sp.csr_matrix([[2.0, -1.0], [-1.0, 2.0]]))
    assert mn == pytest.approx(1 / 3) and ok


def test_oracle_confirms_certified_flat_case():
    g, f = flat_1d(4, 4)
    A = assemble(g, f, 1.0, 50 * g.h**2).A_fd
    mn, ok = oracle_inverse_nonneg(A)
    assert ok and mn > 0


def test_oracle_detects_monotonicity_loss():
    g, f = flat_1d(4, 4)
    assert g.size == 9
    mn, ok = oracle_inverse_nonneg(assemble(g, f, 1.0, g.h**2 / 1000).A_fd)
    assert not ok and mn < 0


def test_m_matrix_check_implies_nonnegative_inverse(rng):
    checked = 0
    for _ in range(40):
        dim = int(rng.integers(1, 3))
        g, f = _random_instance(rng, dim, 2, int(rng.integers(2, 9)))
        f = make_fields(g, M=f.M, u=0.2 * f.u, v=0.2 * f.v if dim == 2 else 0.0)
        A = assemble(g, f, 1.0, float(rng.uniform(1e-3, 1.0))).A_fd
        rec = m_matrix_check(A)
        if rec.passed:
            checked += 1
            assert oracle_inverse_nonneg(A)[1]
    assert checked >= 10


def test_certify_adds_diagnostics_and_oracle():
    g, f = flat_1d(4, 4)
    rep = certify(g, f, 1.0, 50 * g.h**2)
    assert rep.certified and rep.oracle_flag
    assert not rep.record("lorenz_product").required
    rep = certify(g, f, 1.0, g.h**2 / 1000)
    assert rep.verdict is Verdict.CONDITIONS_FAIL and rep.oracle_flag is False
    g2, f2 = flat_1d(6, 2)
    rep = certify(g2, f2, 1.0, 0.1)
    assert rep.record("m_matrix").passed and rep.oracle_min > 0


def test_certify_oracle_only_verdict():
    # o4 time-step bound violated, yet the inverse stays nonnegative
    g, f = flat_1d(4, 4)
    rep = certify(g, f, 1.0, 10 * g.h**2)
    assert not rep.record("o4_time_step").passed
    assert rep.oracle_flag and rep.oracle_min > 0
    assert rep.verdict is Verdict.ORACLE_ONLY
    assert not rep.certified


def test_report_serialization():
    g, f = flat_1d(4, 4)
    rep = check_sufficient_conditions(g, f, 1.0, 50 * g.h**2)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "condition,margin,pass,location"
    assert len(lines) == 1 + len(rep.records)
    name, margin, flag, loc = lines[1].split(",")
    assert name == rep.records[0].condition
    assert float(margin) == rep.records[0].margin and flag in ("true", "false")
    text = rep.to_text()
    assert text.startswith("verdict: CertifiedMonotone")
    assert "binding constraint" in text


def test_report_invariant():
    bad = ConditionRecord("x", "", -1.0, False)
    with pytest.raises(ValueError):
        MonotonicityReport((bad,), Verdict.CERTIFIED_MONOTONE)
    ok = MonotonicityReport((bad,), Verdict.CONDITIONS_FAIL)
    assert ok.binding is bad


@settings(max_examples=30, deadline=None)
@given(dim=st.sampled_from([1, 2]), order=st.sampled_from([2, 4]), seed=st.integers(0, 2**31))
def test_certification_is_sound(dim, order, seed):
    rng = np.random.default_rng(seed)
    cells = int(rng.integers(2, 8 if dim == 2 else 16))
    if order == 2:
        cells *= 2
    g = build_grid(((0.0, 1.0),) * dim, cells, order)
    D = float(rng.uniform(0.2, 2.0))
    M = 1.0 + 0.01 * rng.random(g.size)
    scale = D / g.h * (0.05 if order == 4 else 0.5)
    f = make_fields(g, M=M, u=scale * rng.uniform(-1, 1, g.size),
                    v=scale * rng.uniform(-1, 1, g.size) if dim == 2 else 0.0)
    dt = float(g.h**2 * rng.uniform(50.0, 200.0) / D)
    rep = certify(g, f, D, dt)
    if rep.certified:
        inv = dense_inverse(assemble(g, f, D, dt).A_fd)
        assert inv.min() >= -1e-12 * np.abs(inv).max()
