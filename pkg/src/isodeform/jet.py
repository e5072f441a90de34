"""Truncated multivariate Taylor (jet) arithmetic.

A jet of order K at a point records the value and all partial derivatives
of a function up to order K.  Jets form a commutative ring (with division
by units, i.e. jets whose value is nonzero), so ordinary formulas evaluate
to exact derivatives: no symbolic differentiation, no finite-difference
truncation error.

Storage is one coefficient slot per monomial multi-index |alpha| <= K in
graded lexicographic order; the slot holds the Taylor coefficient
c_alpha = (d^alpha f) / alpha!.  Because each unordered derivative index
tuple owns exactly one slot, symmetry of the derivative tensors is
structural: the full-index accessors (d2, d3, d4) replicate the single
stored slot bit-identically.

Coefficient slots are numpy arrays, so a single jet can carry any batch
shape (e.g. every node of a sample grid at once); scalar use is the empty
batch.  All operations are elementwise over the batch.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

MIN_DIVISOR = 1e-300  # underflow guard for division by a jet

_MAX_ORDER = 4


class JetError(ValueError):
    pass


class JetMismatchError(JetError):
    """Raised when jets from different spaces (n_vars, order) are mixed."""


class JetDomainError(JetError):
    """Raised on a domain violation (division by ~0, log/sqrt of non-positive)."""


def _monomials(n_vars: int, order: int) -> list[tuple[int, ...]]:
    """All exponent tuples with |alpha| <= order, graded lex order."""

    def of_degree(deg, nv):
        if nv == 1:
            yield (deg,)
            return
        for first in range(deg, -1, -1):
            for rest in of_degree(deg - first, nv - 1):
                yield (first,) + rest

    out: list[tuple[int, ...]] = []
    for deg in range(order + 1):
        out.extend(of_degree(deg, n_vars))
    return out


@lru_cache(maxsize=None)
def jet_space(n_vars: int, order: int) -> "JetSpace":
    return JetSpace(n_vars, order)


class JetSpace:
    """Precomputed index tables for jets with a fixed (n_vars, order).

    Do not construct directly; use :func:`jet_space` so that identical
    spaces are shared and mixing checks reduce to an identity test.
    """

    def __init__(self, n_vars: int, order: int):
        if n_vars < 1:
            raise JetError(f"n_vars must be >= 1, got {n_vars}")
        if not (0 <= order <= _MAX_ORDER):
            raise JetError(f"order must be in 0..{_MAX_ORDER}, got {order}")
        self.n_vars = n_vars
        self.order = order
        self.monomials = _monomials(n_vars, order)
        self.size = len(self.monomials)
        self.index = {m: i for i, m in enumerate(self.monomials)}
        self.degrees = np.array([sum(m) for m in self.monomials])
        # number of monomials of degree <= k, for truncation slicing
        self.sizes_by_order = [int(np.sum(self.degrees <= k)) for k in range(order + 1)]

        # multiplication table: all (i, j) with deg_i + deg_j <= order,
        # sorted by target index so np.add.reduceat does the accumulation
        pairs = []
        for i, a in enumerate(self.monomials):
            for j, b in enumerate(self.monomials):
                if sum(a) + sum(b) <= order:
                    tgt = self.index[tuple(x + y for x, y in zip(a, b))]
                    pairs.append((tgt, i, j))
        pairs.sort()
        tgts = np.array([p[0] for p in pairs])
        self._mul_ii = np.array([p[1] for p in pairs])
        self._mul_jj = np.array([p[2] for p in pairs])
        # every target occurs (pair (alpha, 0) always exists)
        self._mul_starts = np.searchsorted(tgts, np.arange(self.size))

        # differentiation tables: child coef[beta] = (beta_i+1) * coef[beta+e_i]
        self._diff_src = []
        self._diff_fac = []
        if order >= 1:
            child = jet_space(n_vars, order - 1)
            for v in range(n_vars):
                src = np.empty(child.size, dtype=np.intp)
                fac = np.empty(child.size)
                for ci, m in enumerate(child.monomials):
                    up = list(m)
                    up[v] += 1
                    src[ci] = self.index[tuple(up)]
                    fac[ci] = up[v]
                self._diff_src.append(src)
                self._diff_fac.append(fac)

        # full-index derivative accessor tables (index grid + alpha! factors)
        self._deriv_tables: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        for k in range(1, order + 1):
            shape = (n_vars,) * k
            idx = np.empty(shape, dtype=np.intp)
            fac = np.empty(shape)
            for multi in np.ndindex(shape):
                alpha = [0] * n_vars
                for v in multi:
                    alpha[v] += 1
                idx[multi] = self.index[tuple(alpha)]
                fac[multi] = math.prod(math.factorial(a) for a in alpha)
            self._deriv_tables[k] = (idx, fac)

    def __repr__(self):
        return f"JetSpace(n_vars={self.n_vars}, order={self.order})"

    def constant(self, value, batch_ndim: int = 0) -> "JetScalar":
        value = np.asarray(value, dtype=float)
        shape = (1,) * batch_ndim if value.ndim == 0 and batch_ndim else value.shape
        coef = np.zeros((self.size,) + shape)
        coef[0] = value
        return JetScalar(self, coef)

    def variable(self, i: int, at) -> "JetScalar":
        """The coordinate function u_i seeded at the point(s) `at` (0-based i).

        In an order-0 space this degrades to a constant: only the value
        survives.
        """
        if not 0 <= i < self.n_vars:
            raise JetError(f"variable index {i} out of range for n_vars={self.n_vars}")
        if self.order < 1:
            return self.constant(np.asarray(at, dtype=float))
        at = np.asarray(at, dtype=float)
        coef = np.zeros((self.size,) + at.shape)
        coef[0] = at
        e_i = tuple(1 if v == i else 0 for v in range(self.n_vars))
        coef[self.index[e_i]] = 1.0
        return JetScalar(self, coef)


class JetScalar:
    """One jet: Taylor coefficients (possibly batched) in a JetSpace."""

    __slots__ = ("space", "coef")

    def __init__(self, space: JetSpace, coef: np.ndarray):
        self.space = space
        self.coef = coef

    # -- accessors ---------------------------------------------------------

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def n_vars(self) -> int:
        return self.space.n_vars

    @property
    def value(self):
        return self.coef[0]

    @property
    def d1(self):
        """Gradient, shape (n_vars, *batch)."""
        idx, fac = self.space._deriv_tables[1]
        return self.coef[idx] * fac.reshape(fac.shape + (1,) * (self.coef.ndim - 1))

    def _full(self, k: int):
        if k > self.order:
            raise JetError(f"derivative order {k} exceeds jet order {self.order}")
        idx, fac = self.space._deriv_tables[k]
        return self.coef[idx] * fac.reshape(fac.shape + (1,) * (self.coef.ndim - 1))

    def d2(self):
        """Full symmetric Hessian, shape (n, n, *batch)."""
        return self._full(2)

    def d3(self):
        return self._full(3)

    def d4(self):
        return self._full(4)

    def derivative(self, indices: tuple[int, ...]):
        """Mixed partial for an arbitrary index tuple (order = len(indices))."""
        alpha = [0] * self.n_vars
        for v in indices:
            alpha[v] += 1
        if sum(alpha) > self.order:
            raise JetError(f"derivative order {sum(alpha)} exceeds jet order {self.order}")
        fac = math.prod(math.factorial(a) for a in alpha)
        return self.coef[self.space.index[tuple(alpha)]] * fac

    def diff(self, i: int) -> "JetScalar":
        """The jet of the partial derivative d/du_i (order drops by one)."""
        if self.order < 1:
            raise JetError("cannot differentiate an order-0 jet")
        sp = self.space
        child = jet_space(sp.n_vars, sp.order - 1)
        fac = sp._diff_fac[i].reshape((child.size,) + (1,) * (self.coef.ndim - 1))
        return JetScalar(child, self.coef[sp._diff_src[i]] * fac)

    def truncated(self, order: int) -> "JetScalar":
        """Copy of this jet truncated to a lower order."""
        if order == self.order:
            return self
        if order > self.order:
            raise JetError(f"cannot raise jet order {self.order} -> {order}")
        child = jet_space(self.n_vars, order)
        return JetScalar(child, self.coef[: child.size])

    # -- ring operations ----------------------------------------------------

    def _check(self, other: "JetScalar"):
        if self.space is not other.space:
            raise JetMismatchError(
                f"mixed jets: {self.space} vs {other.space}"
            )

    def __add__(self, other):
        if isinstance(other, JetScalar):
            self._check(other)
            return JetScalar(self.space, self.coef + other.coef)
        out = self.coef.copy()
        out[0] = out[0] + other
        return JetScalar(self.space, out)

    __radd__ = __add__

    def __neg__(self):
        return JetScalar(self.space, -self.coef)

    def __sub__(self, other):
        if isinstance(other, JetScalar):
            self._check(other)
            return JetScalar(self.space, self.coef - other.coef)
        out = self.coef.copy()
        out[0] = out[0] - other
        return JetScalar(self.space, out)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, JetScalar):
            self._check(other)
            sp = self.space
            prod = self.coef[sp._mul_ii] * other.coef[sp._mul_jj]
            return JetScalar(sp, np.add.reduceat(prod, sp._mul_starts, axis=0))
        return JetScalar(self.space, self.coef * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, JetScalar):
            return self * _recip(other)
        return JetScalar(self.space, self.coef / other)

    def __rtruediv__(self, other):
        return _recip(self) * other

    def __pow__(self, e):
        if isinstance(e, (int, np.integer)) or (isinstance(e, float) and e.is_integer()):
            return _int_pow(self, int(e))
        return powf(self, float(e))

    def __repr__(self):
        v = self.value
        head = f"{v:.6g}" if np.ndim(v) == 0 else f"batch{np.shape(v)}"
        return f"JetScalar(order={self.order}, n={self.n_vars}, value={head})"


def _zero_delta(a: JetScalar) -> JetScalar:
    out = a.coef.copy()
    out[0] = 0.0
    return JetScalar(a.space, out)


def _compose(a: JetScalar, coeffs: list) -> JetScalar:
    """Evaluate sum_k coeffs[k] * (a - a0)^k by Horner; exact to order K
    because the delta jet has zero constant term."""
    delta = _zero_delta(a)
    res = JetScalar(a.space, np.zeros_like(a.coef))
    res.coef[0] = coeffs[-1]
    for k in range(len(coeffs) - 2, -1, -1):
        res = res * delta
        res.coef[0] = res.coef[0] + coeffs[k]
    return res


def _recip(a: JetScalar) -> JetScalar:
    v = np.asarray(a.value)
    if np.any(np.abs(v) <= MIN_DIVISOR) or not np.all(np.isfinite(v)):
        bad = v.flat[int(np.argmin(np.abs(v)))] if v.size else v
        raise JetDomainError(f"division by a jet with value {bad!r}")
    coeffs = [1.0 / v]
    for _ in range(a.order):
        coeffs.append(-coeffs[-1] / v)
    return _compose(a, coeffs)


def _int_pow(a: JetScalar, e: int) -> JetScalar:
    if e < 0:
        return _int_pow(_recip(a), -e)
    result = a.space.constant(1.0, batch_ndim=a.coef.ndim - 1)
    base = a
    while e:
        if e & 1:
            result = result * base
        base = base * base if e > 1 else base
        e >>= 1
    return result


def sin(a: JetScalar) -> JetScalar:
    v = a.value
    table = [np.sin(v), np.cos(v), -np.sin(v), -np.cos(v)]
    coeffs = [table[k % 4] / math.factorial(k) for k in range(a.order + 1)]
    return _compose(a, coeffs)


def cos(a: JetScalar) -> JetScalar:
    v = a.value
    table = [np.cos(v), -np.sin(v), -np.cos(v), np.sin(v)]
    coeffs = [table[k % 4] / math.factorial(k) for k in range(a.order + 1)]
    return _compose(a, coeffs)


def exp(a: JetScalar) -> JetScalar:
    ev = np.exp(a.value)
    coeffs = [ev / math.factorial(k) for k in range(a.order + 1)]
    return _compose(a, coeffs)


def log(a: JetScalar) -> JetScalar:
    v = np.asarray(a.value)
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise JetDomainError(f"log of a jet with value {np.min(v)!r}")
    coeffs = [np.log(v)]
    for k in range(1, a.order + 1):
        coeffs.append((-1.0) ** (k - 1) / (k * v**k))
    return _compose(a, coeffs)


def sqrt(a: JetScalar) -> JetScalar:
    v = np.asarray(a.value)
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise JetDomainError(f"sqrt of a jet with value {np.min(v)!r}")
    return powf(a, 0.5, _domain_checked=True)


def powf(a: JetScalar, r: float, _domain_checked: bool = False) -> JetScalar:
    """a**r for non-integer real r; requires the jet value to be positive."""
    v = np.asarray(a.value)
    if not _domain_checked and (np.any(v <= 0) or not np.all(np.isfinite(v))):
        raise JetDomainError(f"non-integer power of a jet with value {np.min(v)!r}")
    # c_k = binom(r, k) v^(r-k), built by the recurrence c_k = c_{k-1}(r-k+1)/(k v)
    coeffs = [v**r]
    for k in range(1, a.order + 1):
        coeffs.append(coeffs[-1] * (r - k + 1) / (k * v))
    return _compose(a, coeffs)


# -- small matrix algebra over the jet ring ---------------------------------
#
# These work for any commutative-ring elements supporting + - * (and / for
# the inverse), in particular plain floats and JetScalar, held in numpy
# object arrays or nested lists.  Dimensions here are tiny (n <= 5), so
# cofactor expansion is both exact and fast.


def mat_det(M):
    M = np.asarray(M, dtype=object)
    n = M.shape[0]
    if n == 1:
        return M[0, 0]
    if n == 2:
        return M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    acc = None
    for j in range(n):
        minor = np.delete(np.delete(M, 0, axis=0), j, axis=1)
        term = M[0, j] * mat_det(minor)
        if j % 2:
            term = -term
        acc = term if acc is None else acc + term
    return acc


def mat_inv(M):
    """Adjugate inverse (pivot-free, branch-free: safe for batched jets).

    Returns (inverse, det).  Raising on a non-unit det is the caller's job;
    division by the det jet already guards against exact underflow.
    """
    M = np.asarray(M, dtype=object)
    n = M.shape[0]
    det = mat_det(M)
    inv = np.empty((n, n), dtype=object)
    if n == 1:
        inv[0, 0] = 1.0 / det if not isinstance(det, JetScalar) else _recip(det)
        return inv, det
    for i in range(n):
        for j in range(n):
            minor = np.delete(np.delete(M, i, axis=0), j, axis=1)
            cof = mat_det(minor)
            if (i + j) % 2:
                cof = -cof
            inv[j, i] = cof / det
    return inv, det


def mat_mul(A, B):
    A = np.asarray(A, dtype=object)
    B = np.asarray(B, dtype=object)
    out = np.empty((A.shape[0], B.shape[1]), dtype=object)
    for i in range(A.shape[0]):
        for j in range(B.shape[1]):
            acc = A[i, 0] * B[0, j]
            for k in range(1, A.shape[1]):
                acc = acc + A[i, k] * B[k, j]
            out[i, j] = acc
    return out


def mat_vec(A, v):
    A = np.asarray(A, dtype=object)
    out = np.empty(A.shape[0], dtype=object)
    for i in range(A.shape[0]):
        acc = A[i, 0] * v[0]
        for k in range(1, A.shape[1]):
            acc = acc + A[i, k] * v[k]
        out[i] = acc
    return out


def values(obj_arr) -> np.ndarray:
    """Extract .value from an object array of jets -> float array with the
    jet batch axes appended after the array's own axes."""
    arr = np.asarray(obj_arr, dtype=object)
    flat = [np.asarray(j.value, dtype=float) for j in arr.flat]
    batch = np.broadcast_shapes(*(f.shape for f in flat))
    out = np.empty(arr.shape + batch)
    for idx, f in zip(np.ndindex(arr.shape), flat):
        out[idx] = np.broadcast_to(f, batch)
    return out


def d1_values(obj_arr) -> np.ndarray:
    """Extract .d1 from an object array of jets -> shape arr.shape+(n,)+batch."""
    arr = np.asarray(obj_arr, dtype=object)
    flat = [np.asarray(j.d1, dtype=float) for j in arr.flat]
    batch = np.broadcast_shapes(*(f.shape for f in flat))
    out = np.empty(arr.shape + batch)
    for idx, f in zip(np.ndindex(arr.shape), flat):
        out[idx] = np.broadcast_to(f, batch)
    return out
