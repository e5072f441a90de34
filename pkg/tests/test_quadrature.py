import numpy as np
import pytest

from isodeform.quadrature import QuadratureError, integrate_segment


def test_polynomial_exact():
    out = integrate_segment(lambda t: t**7 - 3 * t**2, 0.0, 2.0)
    assert out == pytest.approx(2**8 / 8 - 8, abs=1e-12)


def test_oscillatory():
    out = integrate_segment(np.sin, 0.0, np.pi)
    assert out == pytest.approx(2.0, abs=1e-12)
    out = integrate_segment(lambda t: np.sin(40 * t), 0.0, 1.0)
    assert out == pytest.approx((1 - np.cos(40)) / 40, abs=1e-11)


def test_vector_valued():
    out = integrate_segment(lambda t: np.stack([t, np.exp(t)], axis=-1), 0.0, 1.0)
    assert np.allclose(out, [0.5, np.e - 1], atol=1e-12)


def test_reversed_and_empty():
    fwd = integrate_segment(np.cos, 0.0, 1.0)
    rev = integrate_segment(np.cos, 1.0, 0.0)
    assert rev == pytest.approx(-fwd, abs=1e-13)
    assert integrate_segment(np.cos, 0.7, 0.7) == pytest.approx(0.0)


def test_nonconvergent_raises():
    rng = np.random.default_rng(0)
    with pytest.raises(QuadratureError):
        integrate_segment(lambda t: rng.standard_normal(t.shape), 0.0, 1.0,
                          tol=1e-14, max_levels=4)
