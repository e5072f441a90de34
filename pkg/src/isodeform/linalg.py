"""Dense linear algebra for tiny matrices (dims <= 8).

Everything here is hand-rolled so the singularity/rank semantics are
explicit and identical across platforms: LU with partial pivoting and a
relative pivot gate, one-sided Jacobi SVD iterated to a fixed off-diagonal
threshold, and the generalized (n-ary) cross product by cofactor expansion.
numpy is used only for array storage and elementwise work.
"""

from __future__ import annotations

import numpy as np

PIVOT_RTOL = 1e-12
JACOBI_TOL = 1e-13
RANK_RTOL = 1e-9
CROSS_RTOL = 1e-12


class LinalgError(ValueError):
    pass


class SingularMatrixError(LinalgError):
    pass


class DegenerateJacobianError(LinalgError):
    pass


class NotSPDError(LinalgError):
    pass


def _check_finite(A, what):
    if not np.all(np.isfinite(A)):
        raise LinalgError(f"{what} contains non-finite entries")


def lu_factor(A: np.ndarray):
    """PA = LU with partial pivoting; returns (LU packed, perm).

    Raises SingularMatrixError when a pivot falls at or below
    PIVOT_RTOL * max|A|.
    """
    A = np.array(A, dtype=float)
    _check_finite(A, "matrix")
    n = A.shape[0]
    if A.shape != (n, n):
        raise LinalgError(f"expected a square matrix, got {A.shape}")
    scale = np.abs(A).max()
    if scale == 0:
        raise SingularMatrixError("zero matrix")
    perm = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if np.abs(A[p, k]) <= PIVOT_RTOL * scale:
            raise SingularMatrixError(
                f"pivot {A[p, k]:.3e} at column {k} below {PIVOT_RTOL:.0e}*max|A|"
            )
        if p != k:
            A[[k, p]] = A[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        A[k + 1 :, k] /= A[k, k]
        A[k + 1 :, k + 1 :] -= np.outer(A[k + 1 :, k], A[k, k + 1 :])
    return A, perm


def solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve A X = B for one or many right-hand sides."""
    LU, perm = lu_factor(A)
    n = LU.shape[0]
    B = np.asarray(B, dtype=float)
    _check_finite(B, "right-hand side")
    single = B.ndim == 1
    X = (B.reshape(n, 1) if single else B)[perm].copy()
    for k in range(n):  # forward: L y = P b
        X[k + 1 :] -= np.outer(LU[k + 1 :, k], X[k])
    for k in range(n - 1, -1, -1):  # backward: U x = y
        X[k] /= LU[k, k]
        if k:
            X[:k] -= np.outer(LU[:k, k], X[k])
    return X[:, 0] if single else X


def det(A: np.ndarray) -> float:
    """Determinant via LU; 0.0 for numerically singular input."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    scale = np.abs(A).max()
    if scale == 0:
        return 0.0
    sign = 1.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if np.abs(A[p, k]) <= 1e-14 * scale:
            return 0.0
        if p != k:
            A[[k, p]] = A[[p, k]]
            sign = -sign
        A[k + 1 :, k] /= A[k, k]
        A[k + 1 :, k + 1 :] -= np.outer(A[k + 1 :, k], A[k, k + 1 :])
    return sign * float(np.prod(np.diag(A)))


def jacobi_svd(A: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = 60):
    """One-sided Jacobi SVD: A = U diag(s) V^T with s descending.

    Iterates plane rotations on column pairs until every pair is orthogonal
    to relative tolerance `tol`.  For m < n the transpose is factored and
    the roles of U and V swapped back.
    """
    A = np.asarray(A, dtype=float)
    _check_finite(A, "matrix")
    if A.ndim != 2:
        raise LinalgError(f"expected a 2-d matrix, got shape {A.shape}")
    m, n = A.shape
    if m < n:
        V, s, Ut = jacobi_svd(A.T, tol, max_sweeps)
        return Ut.T, s, V.T

    W = A.copy()
    V = np.eye(n)
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                app = W[:, p] @ W[:, p]
                aqq = W[:, q] @ W[:, q]
                apq = W[:, p] @ W[:, q]
                denom = np.sqrt(app * aqq)
                if denom == 0 or abs(apq) <= tol * denom:
                    continue
                off = max(off, abs(apq) / denom)
                tau = (aqq - app) / (2 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1 + tau * tau)) if tau != 0 else 1.0
                c = 1 / np.sqrt(1 + t * t)
                s_ = c * t
                Wp = W[:, p].copy()
                W[:, p] = c * Wp - s_ * W[:, q]
                W[:, q] = s_ * Wp + c * W[:, q]
                Vp = V[:, p].copy()
                V[:, p] = c * Vp - s_ * V[:, q]
                V[:, q] = s_ * Vp + c * V[:, q]
        if off == 0.0:
            break
    sig = np.sqrt(np.sum(W * W, axis=0))
    order = np.argsort(-sig, kind="stable")
    sig = sig[order]
    W = W[:, order]
    V = V[:, order]
    U = np.zeros((m, n))
    for j in range(n):
        if sig[j] > 0:
            U[:, j] = W[:, j] / sig[j]
    return U, sig, V.T


def svd_rank_kernel(A: np.ndarray, tol: float = RANK_RTOL):
    """Numerical rank and an orthonormal kernel basis.

    rank = #{sigma_i > tol * sigma_max}; kernel columns are the right
    singular vectors of the discarded sigmas.  A zero matrix has rank 0 and
    a full kernel.
    """
    U, s, Vt = jacobi_svd(A)
    smax = s[0] if len(s) else 0.0
    if smax == 0.0:
        rank = 0
    else:
        rank = int(np.sum(s > tol * smax))
    kernel = Vt[rank:].T.copy()  # (n, n-rank), orthonormal
    return rank, kernel, s


def generalized_cross(J: np.ndarray) -> np.ndarray:
    """Cross product of the n columns of an (n+1) x n matrix.

    v_k = (-1)^(k+1) det(J with row k deleted), 1-based k: orthogonal to
    every column, with norm = sqrt(det(J^T J)).  Raises when the result is
    degenerate relative to the column norms (rank-deficient J).
    """
    J = np.asarray(J, dtype=float)
    _check_finite(J, "Jacobian")
    np1, n = J.shape
    if np1 != n + 1:
        raise LinalgError(f"expected (n+1) x n, got {J.shape}")
    v = np.empty(np1)
    for k in range(np1):
        minor = np.delete(J, k, axis=0)
        v[k] = det(minor) * (1 if k % 2 == 0 else -1)
    colnorm = np.prod(np.sqrt(np.sum(J * J, axis=0)))
    norm = np.sqrt(v @ v)
    if norm <= CROSS_RTOL * colnorm:
        raise DegenerateJacobianError(
            f"cross product norm {norm:.3e} below {CROSS_RTOL:.0e} * column-norm product"
        )
    return v


def unit_normal(J: np.ndarray) -> np.ndarray:
    v = generalized_cross(J)
    return v / np.sqrt(v @ v)


def cholesky_spd(g: np.ndarray) -> np.ndarray:
    """Lower-triangular L with g = L L^T; batched over leading axes.

    Raises NotSPDError if any pivot is non-positive anywhere in the batch.
    """
    g = np.asarray(g, dtype=float)
    n = g.shape[-1]
    L = np.zeros_like(g)
    for j in range(n):
        d = g[..., j, j] - np.sum(L[..., j, :j] ** 2, axis=-1)
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise NotSPDError(f"cholesky pivot {np.min(d):.3e} at column {j}")
        L[..., j, j] = np.sqrt(d)
        for i in range(j + 1, n):
            L[..., i, j] = (
                g[..., i, j] - np.sum(L[..., i, :j] * L[..., j, :j], axis=-1)
            ) / L[..., j, j]
    return L


def max_principal_angle(B1: np.ndarray, B2: np.ndarray) -> float:
    """Largest principal angle (radians) between equal-dimension subspaces
    given by orthonormal-column bases.  Two empty bases agree: angle 0."""
    B1 = np.asarray(B1, dtype=float)
    B2 = np.asarray(B2, dtype=float)
    if B1.shape != B2.shape:
        raise LinalgError(f"subspace dimensions differ: {B1.shape} vs {B2.shape}")
    if B1.shape[1] == 0:
        return 0.0
    _, s, _ = jacobi_svd(B1.T @ B2)
    smin = np.clip(s[-1], -1.0, 1.0)
    return float(np.arccos(smin))
