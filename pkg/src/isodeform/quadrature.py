"""Adaptive composite Gauss-Legendre quadrature on segments.

16 nodes per panel; the panel count doubles until two successive composite
estimates agree to the requested tolerance.  Integrands are called once per
level with every node at once (shape (m,)), and may return per-node vectors
(shape (m, d)); convergence is measured in the max norm.
"""

from __future__ import annotations

import numpy as np

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(16)

DEFAULT_TOL = 1e-10
MAX_LEVELS = 12


class QuadratureError(RuntimeError):
    pass


def integrate_segment(fn, a: float, b: float, tol: float = DEFAULT_TOL,
                      max_levels: int = MAX_LEVELS):
    """Integrate fn over [a, b].  fn maps an (m,) array of parameters to an
    (m,) or (m, d) array of integrand values."""
    if a == b:
        probe = np.asarray(fn(np.array([a])))
        return np.zeros(probe.shape[1:])
    prev = None
    for level in range(max_levels + 1):
        panels = 2**level
        edges = np.linspace(a, b, panels + 1)
        mid = (edges[:-1] + edges[1:]) / 2  # (panels,)
        half = (edges[1:] - edges[:-1]) / 2
        ts = (mid[:, None] + half[:, None] * GL_NODES[None, :]).reshape(-1)
        vals = np.asarray(fn(ts), dtype=float)
        vals = vals.reshape(panels, len(GL_NODES), *vals.shape[1:])
        w = GL_WEIGHTS.reshape(1, -1, *([1] * (vals.ndim - 2)))
        est = np.sum(vals * w * half.reshape(-1, *([1] * (vals.ndim - 1))), axis=(0, 1))
        if prev is not None and np.max(np.abs(est - prev)) < tol:
            return est
        prev = est
    raise QuadratureError(
        f"no convergence to {tol:.1e} after {max_levels} bisection levels on "
        f"[{a}, {b}]"
    )
