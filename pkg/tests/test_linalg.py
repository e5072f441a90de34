"""Linear algebra tests; numpy's LAPACK routines serve as the independent
oracle (the shipped code never calls them for these decisions)."""

import numpy as np
import pytest

from isodeform import linalg
from isodeform.linalg import (
    DegenerateJacobianError,
    NotSPDError,
    SingularMatrixError,
    cholesky_spd,
    det,
    generalized_cross,
    jacobi_svd,
    max_principal_angle,
    solve,
    svd_rank_kernel,
    unit_normal,
)


def test_solve_known_system():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    x = solve(A, np.array([5.0, 10.0]))
    assert np.allclose(x, [1.0, 3.0], atol=1e-14)


def test_solve_multiple_rhs_vs_numpy():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3, 4, 6, 8):
        A = rng.uniform(-2, 2, (n, n)) + n * np.eye(n)
        B = rng.uniform(-1, 1, (n, 3))
        assert np.allclose(solve(A, B), np.linalg.solve(A, B), atol=1e-11)


def test_solve_requires_pivoting():
    # zero in the (0,0) slot forces a row swap
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(solve(A, np.array([2.0, 3.0])), [3.0, 2.0])


def test_solve_singular_raises():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError):
        solve(A, np.array([1.0, 1.0]))
    with pytest.raises(linalg.LinalgError):
        solve(np.array([[np.nan, 0], [0, 1.0]]), np.array([1.0, 1.0]))


def test_det_vs_numpy():
    rng = np.random.default_rng(1)
    for n in (1, 2, 3, 4, 5):
        A = rng.uniform(-1, 1, (n, n))
        assert det(A) == pytest.approx(np.linalg.det(A), rel=1e-10, abs=1e-12)
    assert det(np.array([[1.0, 2.0], [2.0, 4.0]])) == 0.0


def test_jacobi_svd_reconstruction_and_orthogonality():
    rng = np.random.default_rng(2)
    for m, n in [(2, 2), (3, 3), (4, 3), (5, 4), (3, 5), (8, 8)]:
        A = rng.uniform(-1, 1, (m, n))
        U, s, Vt = jacobi_svd(A)
        assert np.allclose(U @ np.diag(s) @ Vt, A, atol=1e-12)
        assert np.allclose(Vt @ Vt.T, np.eye(Vt.shape[0]), atol=1e-12)
        assert np.all(np.diff(s) <= 1e-15)
        assert np.allclose(s, np.linalg.svd(A, compute_uv=False), atol=1e-11)


def test_svd_rank_kernel():
    # rank-2 3x3 with kernel along (1,1,1)/sqrt3
    P = np.eye(3) - np.ones((3, 3)) / 3
    rank, kernel, s = svd_rank_kernel(P)
    assert rank == 2
    assert kernel.shape == (3, 1)
    assert abs(abs(kernel[:, 0] @ (np.ones(3) / np.sqrt(3))) - 1) < 1e-12

    rank, kernel, _ = svd_rank_kernel(np.zeros((3, 3)))
    assert rank == 0 and kernel.shape == (3, 3)

    rank, kernel, _ = svd_rank_kernel(np.diag([2.0, 1.0, 1e-14]))
    assert rank == 2


def test_generalized_cross_r3_matches_cross():
    rng = np.random.default_rng(3)
    for _ in range(20):
        J = rng.uniform(-1, 1, (3, 2))
        v = generalized_cross(J)
        assert np.allclose(v, np.cross(J[:, 0], J[:, 1]), atol=1e-12)


def test_generalized_cross_axes():
    J = np.zeros((3, 2))
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    assert np.allclose(generalized_cross(J), [0, 0, 1])
    J2 = np.zeros((3, 2))
    J2[0, 0] = 1.0
    J2[2, 1] = 1.0
    assert np.allclose(generalized_cross(J2), [0, -1, 0])


def test_generalized_cross_orthogonality_r5():
    rng = np.random.default_rng(4)
    for _ in range(10):
        J = rng.uniform(-1, 1, (5, 4))
        v = generalized_cross(J)
        assert np.max(np.abs(J.T @ v)) < 1e-12 * np.linalg.norm(v)
        # norm identity: |v| = sqrt(det(J^T J))
        assert np.linalg.norm(v) == pytest.approx(
            np.sqrt(np.linalg.det(J.T @ J)), rel=1e-9
        )


def test_generalized_cross_degenerate_raises():
    J = np.ones((3, 2))  # parallel columns
    with pytest.raises(DegenerateJacobianError):
        generalized_cross(J)


def test_unit_normal():
    rng = np.random.default_rng(5)
    J = rng.uniform(-1, 1, (4, 3))
    N = unit_normal(J)
    assert np.linalg.norm(N) == pytest.approx(1.0, rel=1e-14)
    assert np.max(np.abs(J.T @ N)) < 1e-13


def test_cholesky_batched_vs_numpy():
    rng = np.random.default_rng(6)
    M = rng.uniform(-1, 1, (10, 3, 3))
    g = np.einsum("bij,bkj->bik", M, M) + 0.5 * np.eye(3)
    L = cholesky_spd(g)
    assert np.allclose(np.einsum("bij,bkj->bik", L, L), g, atol=1e-12)
    assert np.allclose(L, np.linalg.cholesky(g), atol=1e-12)
    with pytest.raises(NotSPDError):
        cholesky_spd(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_max_principal_angle():
    B1 = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    B2 = B1.copy()
    assert max_principal_angle(B1, B2) == pytest.approx(0.0, abs=1e-7)
    th = 0.3
    B3 = np.array([[np.cos(th), 0.0], [0.0, 1.0], [np.sin(th), 0.0]])
    assert max_principal_angle(B1, B3) == pytest.approx(th, abs=1e-12)
    empty = np.zeros((3, 0))
    assert max_principal_angle(empty, empty) == 0.0
    with pytest.raises(linalg.LinalgError):
        max_principal_angle(B1, np.zeros((3, 1)))
