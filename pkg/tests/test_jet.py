"""Jet arithmetic tests.

The independent oracle here is central finite differencing (one Richardson
level) applied to plain-float functions; jets must agree with it without
sharing any code path.  Hand-derived closed-form derivative values are
frozen inline where the calculus is short enough to do by hand.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isodeform import jet
from isodeform.jet import (
    JetDomainError,
    JetMismatchError,
    jet_space,
    mat_det,
    mat_inv,
    mat_mul,
    mat_vec,
)


# ---------------------------------------------------------------- FD oracle


def fd1(f, x, i, h=1e-5):
    """d f / d x_i by central differences with one Richardson level."""

    def central(hh):
        xp = list(x)
        xm = list(x)
        xp[i] += hh
        xm[i] -= hh
        return (f(xp) - f(xm)) / (2 * hh)

    return (4 * central(h / 2) - central(h)) / 3


def fd2(f, x, i, j, h=1e-3):
    return fd1(lambda y: fd1(f, y, i, h), x, j, h)


def fd3(f, x, i, j, k, h=5e-3):
    return fd1(lambda y: fd2(f, y, i, j, h), x, k, h)


# ---------------------------------------------------------------- seeds


def test_variable_seed():
    sp = jet_space(2, 3)
    u = sp.variable(0, 3.0)
    assert u.value == 3.0
    assert np.array_equal(u.d1, [1.0, 0.0])
    assert np.array_equal(u.d2(), np.zeros((2, 2)))
    assert np.array_equal(u.d3(), np.zeros((2, 2, 2)))


def test_constant_seed():
    sp = jet_space(3, 2)
    c = sp.constant(2.5)
    assert c.value == 2.5
    assert np.array_equal(c.d1, np.zeros(3))


def test_variable_index_out_of_range():
    sp = jet_space(2, 2)
    with pytest.raises(jet.JetError):
        sp.variable(2, 0.0)


# ---------------------------------------------------------------- arithmetic


def test_reciprocal_known_values():
    # 1/x at x=2: value 1/2, d1 -1/4, d2 2/x^3 = 1/4, d3 -6/x^4 = -3/8
    sp = jet_space(1, 3)
    x = sp.variable(0, 2.0)
    r = 1.0 / x
    assert r.value == pytest.approx(0.5, abs=1e-15)
    assert r.d1[0] == pytest.approx(-0.25, abs=1e-15)
    assert r.d2()[0, 0] == pytest.approx(0.25, abs=1e-15)
    assert r.d3()[0, 0, 0] == pytest.approx(-0.375, abs=1e-15)


def test_sqrt_chain_known_values():
    # sqrt(x^2+1) at x=1: value sqrt2, d1 x/sqrt(x^2+1) = 1/sqrt2,
    # d2 = 1/(x^2+1)^(3/2) = 1/(2 sqrt2)
    sp = jet_space(1, 2)
    x = sp.variable(0, 1.0)
    r = jet.sqrt(x * x + 1.0)
    assert r.value == pytest.approx(math.sqrt(2), abs=1e-15)
    assert r.d1[0] == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert r.d2()[0, 0] == pytest.approx(1 / (2 * math.sqrt(2)), abs=1e-15)


def test_polynomial_fourth_derivative_exact():
    sp = jet_space(1, 4)
    x = sp.variable(0, 1.7)
    p = x**4
    assert p.d4()[0, 0, 0, 0] == pytest.approx(24.0, rel=1e-14)
    assert p.d3()[0, 0, 0] == pytest.approx(24 * 1.7, rel=1e-14)


def test_product_rule_cross_term():
    sp = jet_space(2, 2)
    x = sp.variable(0, 2.0)
    y = sp.variable(1, 5.0)
    p = x * y
    assert p.value == 10.0
    assert np.array_equal(p.d1, [5.0, 2.0])
    assert p.d2()[0, 1] == 1.0 and p.d2()[1, 0] == 1.0


def test_scalar_mixing():
    sp = jet_space(1, 2)
    x = sp.variable(0, 4.0)
    r = (3.0 * x - 1.0) / 2.0 + 0.5
    assert r.value == pytest.approx(6.0)
    assert r.d1[0] == pytest.approx(1.5)
    r2 = 2.0 / x
    assert r2.d1[0] == pytest.approx(-2.0 / 16.0)


@pytest.mark.parametrize(
    "fn,jfn",
    [
        (math.sin, jet.sin),
        (math.cos, jet.cos),
        (math.exp, jet.exp),
        (math.log, jet.log),
        (math.sqrt, jet.sqrt),
    ],
)
def test_univariate_vs_fd(fn, jfn):
    def scalar_f(x):
        return fn(0.3 * x[0] ** 2 + x[0] + 0.8)

    sp = jet_space(1, 3)
    x = sp.variable(0, 0.9)
    r = jfn(0.3 * x * x + x + 0.8)
    assert r.value == pytest.approx(scalar_f([0.9]), rel=1e-15)
    assert r.d1[0] == pytest.approx(fd1(scalar_f, [0.9], 0), rel=1e-8)
    assert r.d2()[0, 0] == pytest.approx(fd2(scalar_f, [0.9], 0, 0), rel=1e-6)
    assert r.d3()[0, 0, 0] == pytest.approx(fd3(scalar_f, [0.9], 0, 0, 0), rel=2e-4)


def test_multivariate_mixed_partials_vs_fd():
    def scalar_f(x):
        return math.sin(x[0] * x[1] ** 2) + math.exp(x[0] - x[1])

    sp = jet_space(2, 3)
    x = sp.variable(0, 0.7)
    y = sp.variable(1, 1.3)
    r = jet.sin(x * y * y) + jet.exp(x - y)
    pt = [0.7, 1.3]
    for i in range(2):
        assert r.d1[i] == pytest.approx(fd1(scalar_f, pt, i), rel=1e-8)
        for j in range(2):
            assert r.d2()[i, j] == pytest.approx(fd2(scalar_f, pt, i, j), rel=1e-6)
    assert r.d3()[0, 0, 1] == pytest.approx(fd3(scalar_f, pt, 0, 0, 1), rel=2e-4)
    assert r.d3()[1, 1, 0] == pytest.approx(fd3(scalar_f, pt, 1, 1, 0), rel=2e-4)


def test_integer_power_matches_repeated_multiplication():
    sp = jet_space(1, 4)
    x = sp.variable(0, -1.3)  # negative base fine for integer powers
    assert np.allclose((x**5).coef, (x * x * x * x * x).coef, rtol=1e-14)
    inv2 = x**-2
    assert inv2.value == pytest.approx((-1.3) ** -2, rel=1e-14)


def test_noninteger_power_vs_fd():
    def scalar_f(x):
        return (x[0] ** 2 + 0.5) ** 1.7

    sp = jet_space(1, 3)
    x = sp.variable(0, 1.1)
    r = jet.powf(x * x + 0.5, 1.7)
    pt = [1.1]
    assert r.value == pytest.approx(scalar_f(pt), rel=1e-15)
    assert r.d1[0] == pytest.approx(fd1(scalar_f, pt, 0), rel=1e-8)
    assert r.d2()[0, 0] == pytest.approx(fd2(scalar_f, pt, 0, 0), rel=1e-6)


# ---------------------------------------------------------------- structure


def test_symmetry_is_bit_exact():
    sp = jet_space(3, 4)
    x = sp.variable(0, 0.4)
    y = sp.variable(1, -0.8)
    z = sp.variable(2, 1.9)
    r = jet.sin(x * y) * jet.exp(z) / (x * x + y * y + 3.0) + (x + y * z) ** 3
    d2, d3, d4 = r.d2(), r.d3(), r.d4()
    assert np.array_equal(d2, d2.T)
    for perm in [(1, 0, 2), (2, 1, 0), (0, 2, 1)]:
        assert np.array_equal(d3, np.transpose(d3, perm))
    for perm in [(1, 0, 2, 3), (3, 1, 2, 0), (0, 2, 1, 3)]:
        assert np.array_equal(d4, np.transpose(d4, perm))


def test_diff_lowers_order_to_derivative_jet():
    sp = jet_space(2, 3)
    x = sp.variable(0, 1.2)
    y = sp.variable(1, 0.3)
    f = x * x * y + y * y * y  # df/dy = x^2 + 3y^2
    dy = f.diff(1)
    assert dy.order == 2
    assert dy.value == pytest.approx(1.2**2 + 3 * 0.3**2, rel=1e-14)
    assert dy.d1[0] == pytest.approx(2 * 1.2, rel=1e-14)
    assert dy.d1[1] == pytest.approx(6 * 0.3, rel=1e-14)
    assert dy.d2()[0, 0] == pytest.approx(2.0, rel=1e-14)


def test_truncated_is_prefix():
    sp = jet_space(2, 4)
    x = sp.variable(0, 0.5)
    y = sp.variable(1, 0.25)
    f = jet.exp(x * y) * (x + 2.0)
    t = f.truncated(2)
    assert t.order == 2
    assert np.array_equal(t.coef, f.coef[: jet_space(2, 2).size])


def test_mixed_space_error():
    a = jet_space(2, 3).variable(0, 1.0)
    b = jet_space(2, 2).variable(0, 1.0)
    c = jet_space(3, 3).variable(0, 1.0)
    for other in (b, c):
        with pytest.raises(JetMismatchError):
            _ = a + other


def test_domain_errors():
    sp = jet_space(1, 2)
    x = sp.variable(0, 0.0)
    with pytest.raises(JetDomainError):
        _ = 1.0 / x
    with pytest.raises(JetDomainError):
        jet.log(x)
    with pytest.raises(JetDomainError):
        jet.sqrt(sp.variable(0, -2.0))
    with pytest.raises(JetDomainError):
        jet.powf(sp.variable(0, -2.0), 0.5)


# ---------------------------------------------------------------- ring axioms


def _random_jet(sp, rng):
    return jet.JetScalar(sp, rng.uniform(-2, 2, size=sp.size))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(2, 4), st.integers(0, 10_000))
def test_ring_axioms(n, k, seed):
    rng = np.random.default_rng(seed)
    sp = jet_space(n, k)
    a, b, c = (_random_jet(sp, rng) for _ in range(3))
    scale = max(np.abs(a.coef).max(), np.abs(b.coef).max(), np.abs(c.coef).max(), 1)
    # commutativity and associativity of *
    assert np.allclose((a * b).coef, (b * a).coef, atol=1e-14 * scale**2)
    assert np.allclose(
        ((a * b) * c).coef, (a * (b * c)).coef, atol=1e-13 * scale**3
    )
    # distributivity
    assert np.allclose(
        (a * (b + c)).coef, (a * b + a * c).coef, atol=1e-13 * scale**2
    )
    # additive group
    assert np.allclose(((a + b) - b).coef, a.coef, atol=1e-14 * scale)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(0, 10_000))
def test_division_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    sp = jet_space(n, 3)
    a = _random_jet(sp, rng)
    b = _random_jet(sp, rng)
    b.coef[0] = 1.5 + abs(b.coef[0])  # keep b a unit
    r = (a / b) * b
    assert np.allclose(r.coef, a.coef, atol=1e-12 * max(1, np.abs(a.coef).max()))


# ---------------------------------------------------------------- batching


def test_batch_matches_scalar_loop_exactly():
    pts = np.linspace(0.2, 1.4, 7)
    sp = jet_space(1, 3)
    xb = sp.variable(0, pts)
    rb = jet.sin(xb) / (xb * xb + 0.5) + jet.sqrt(xb)
    for m, p in enumerate(pts):
        xs = sp.variable(0, p)
        rs = jet.sin(xs) / (xs * xs + 0.5) + jet.sqrt(xs)
        assert np.array_equal(rb.coef[:, m], rs.coef)


def test_batch_domain_error_reports():
    sp = jet_space(1, 2)
    x = sp.variable(0, np.array([1.0, 0.0, 2.0]))
    with pytest.raises(JetDomainError):
        _ = 1.0 / x


# ---------------------------------------------------------------- jet matrices


def test_mat_det_inv_on_floats():
    rng = np.random.default_rng(3)
    for n in (1, 2, 3, 4):
        M = rng.uniform(-1, 1, (n, n)) + 2 * np.eye(n)
        det = mat_det(M.astype(object))
        assert det == pytest.approx(np.linalg.det(M), rel=1e-10)
        inv, _ = mat_inv(M.astype(object))
        assert np.allclose(inv.astype(float), np.linalg.inv(M), atol=1e-12)


def test_mat_inv_over_jets():
    sp = jet_space(2, 3)
    x = sp.variable(0, 0.3)
    y = sp.variable(1, -0.4)
    M = np.empty((2, 2), dtype=object)
    M[0, 0] = 2.0 + x * x
    M[0, 1] = x * y
    M[1, 0] = x * y
    M[1, 1] = 3.0 + jet.sin(y)
    inv, det = mat_inv(M)
    assert det.value == pytest.approx(
        (2 + 0.09) * (3 + math.sin(-0.4)) - (0.3 * -0.4) ** 2, rel=1e-14
    )
    eye = mat_mul(M, inv)
    for i in range(2):
        for j in range(2):
            expect = 1.0 if i == j else 0.0
            assert np.allclose(eye[i, j].coef[0], expect, atol=1e-13)
            assert np.allclose(eye[i, j].coef[1:], 0.0, atol=1e-13)


def test_mat_vec():
    M = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=object)
    v = np.array([5.0, 6.0], dtype=object)
    out = mat_vec(M, v)
    assert out[0] == 17.0 and out[1] == 39.0
