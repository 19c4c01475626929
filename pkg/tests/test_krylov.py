import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp

from fpsolve.assembly import assemble
from fpsolve.errors import ConfigurationError, ConvergenceError, SingularMatrixError
from fpsolve.grid import build_grid
from fpsolve.krylov import dense_inverse, solve
from fpsolve.problem import get_problem, sample

from conftest import make_fields


def test_identity_solves_immediately(rng):
    r = rng.standard_normal(12)
    x, rep = solve(sp.identity(12, format="csr"), r)
    np.testing.assert_allclose(x, r, rtol=1e-14)
    assert rep.converged and rep.iterations <= 1 and rep.residual <= 1e-12


def _dominant(rng, n=20):
    A = rng.standard_normal((n, n))
    A += np.diag(np.abs(A).sum(axis=1) + 1.0)
    return sp.csr_matrix(A)


@pytest.mark.parametrize("method", ["bicgstab", "gmres", "direct"])
def test_matches_dense_lu(rng, method):
    A = _dominant(rng)
    b = rng.standard_normal(20)
    x, rep = solve(A, b, method=method)
    ref = la.lu_solve(la.lu_factor(A.toarray()), b)
    np.testing.assert_allclose(x, ref, atol=1e-10)
    assert rep.converged and rep.residual <= 1e-12


def test_deterministic(rng):
    A = _dominant(rng)
    b = rng.standard_normal(20)
    x1, r1 = solve(A, b)
    x2, r2 = solve(A, b)
    assert np.array_equal(x1, x2) and r1 == r2


def test_preconditioning_does_not_change_solution(rng):
    A = _dominant(rng, 40)
    b = rng.standard_normal(40)
    x1, _ = solve(A, b, precondition=True)
    x2, _ = solve(A, b, precondition=False)
    np.testing.assert_allclose(x1, x2, atol=1e-10)


def test_recovers_steady_state():
    p = get_problem("cross")
    g = build_grid(p.bounds, 16, 2)
    f = sample(p, g)
    op = assemble(g, f, p.diffusion, p.dt)
    K = 2.5
    x, rep = solve(op.A_fd, op.M * K)
    assert np.abs(x - K).max() <= 10 * 1e-12 * K


def test_stationary_point(rng):
    A = _dominant(rng)
    xs = rng.standard_normal(20)
    x, rep = solve(A, A @ xs)
    assert np.linalg.norm(A @ x - A @ xs) / np.linalg.norm(A @ xs) <= 1e-12


def test_zero_rhs():
    x, rep = solve(sp.identity(3, format="csr"), np.zeros(3))
    assert not x.any() and rep.converged


def test_nonconvergence_carries_report(rng):
    # random nonsymmetric matrix, far from diagonally dominant
    A = sp.csr_matrix(rng.standard_normal((200, 200)))
    b = rng.standard_normal(200)
    with pytest.raises(ConvergenceError) as info:
        solve(A, b, max_iter=2)
    rep = info.value.report
    assert not rep.converged and rep.residual > 1e-12


def test_bad_inputs():
    with pytest.raises(ConfigurationError):
        solve(sp.identity(3, format="csr"), np.ones(4))
    with pytest.raises(ConfigurationError):
        solve(sp.identity(3, format="csr"), np.ones(3), method="cg")
    with pytest.raises(SingularMatrixError):
        solve(sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]])), np.ones(2))


def test_dense_inverse_examples():
    np.testing.assert_allclose(dense_inverse(np.eye(4)), np.eye(4))
    inv = dense_inverse(sp.csr_matrix([[2.0, -1.0], [-1.0, 2.0]]))
    np.testing.assert_allclose(inv, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], rtol=1e-14)


def test_dense_inverse_of_order2_operator_is_nonnegative():
    g = build_grid((0.0, 1.0), 8, 2)
    op = assemble(g, make_fields(g, M=1.0 + 0.1 * g.axes[0], u=0.0), 1.0, 0.01)
    inv = dense_inverse(op.A_fd)
    np.testing.assert_allclose(op.A_fd @ inv, np.eye(9), atol=1e-10)
    assert inv.min() >= -1e-12


def test_dense_inverse_guards():
    with pytest.raises(SingularMatrixError):
        dense_inverse(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(ConfigurationError):
        dense_inverse(sp.identity(4097, format="csr"))
    with pytest.raises(ConfigurationError):
        dense_inverse(sp.identity(10, format="csr"), limit=5)
