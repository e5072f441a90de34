"""Pointwise geometry of a parametrized hypersurface immersion.

Everything derives from jets of the chart components f_1..f_{n+1}: Jacobian,
unit normal (generalized cross product in coordinate index order), first and
second fundamental forms, shape operator A = g^{-1} b, Christoffel symbols,
curvature tensor, and the covariant derivative of A.  The computation is a
single code path over the jet ring, so a deformed immersion assembled from
jets re-enters the very same pipeline.

Index conventions (0-based everywhere):
    J[p, k]        = d f_p / d u_k          (columns are coordinate tangents)
    g[i, j]        = <d_i f, d_j f>
    b[i, j]        = <d_i d_j f, N>
    A[k, j]        : A e_j = A[:, j],  A = g^{-1} b
    Gamma[k, i, j] = Gamma^k_{ij}
    R[l, k, i, j]  : R(e_i, e_j) e_k = R^l_{kij} e_l
    nablaA[i, k, j]= (nabla_i A)^k_j

Sign convention: the Weingarten identity dN(X) = -J(A X) holds with the
cross-product normal; it is a checked residual, not an assumption.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import expr as exprmod
from . import jet as jetmod
from .errors import SceneError
from .expr import ExprAst
from .jet import JetScalar, d1_values, jet_space, mat_det, mat_inv, mat_mul, values
from .linalg import DegenerateJacobianError, NotSPDError, cholesky_spd, svd_rank_kernel

GRID_SHRINK = 0.02  # grids sample the open box shrunk by this per side
SELF_ADJOINT_TOL = 1e-10


class ChartError(SceneError):
    pass


class DomainError(ValueError):
    pass


class FrameError(ValueError):
    pass


@dataclass(frozen=True)
class Chart:
    """An immersion f: box in R^n -> R^{n+1} with DSL components."""

    n: int
    components: tuple[ExprAst, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    label: str = "chart"

    @property
    def ambient_dim(self) -> int:
        return self.n + 1

    def contains(self, u) -> bool:
        u = np.asarray(u, dtype=float)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return bool(np.all(u >= lo) and np.all(u <= hi))

    def center(self) -> np.ndarray:
        return (np.asarray(self.lo) + np.asarray(self.hi)) / 2


def make_chart(component_sources, domain, label="chart") -> Chart:
    """Parse and validate a chart.

    component_sources: n+1 DSL strings (or pre-built ASTs);
    domain: n pairs (lo, hi).  Validation checks the box is nondegenerate
    and the Jacobian has full rank at the box center.
    """
    n = len(domain)
    if len(component_sources) != n + 1:
        raise ChartError(
            f"{label}: need {n + 1} components for an n={n} chart, got "
            f"{len(component_sources)}"
        )
    comps = []
    for k, src in enumerate(component_sources):
        if isinstance(src, str):
            try:
                comps.append(exprmod.parse(src, n))
            except exprmod.ExprSyntaxError as e:
                raise ChartError(f"{label}: component {k + 1}: {e}") from e
        else:
            comps.append(src)
    lo = tuple(float(a) for a, _ in domain)
    hi = tuple(float(b) for _, b in domain)
    for a, b in zip(lo, hi):
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ChartError(f"{label}: bad domain interval ({a}, {b})")
    chart = Chart(n, tuple(comps), lo, hi, label)
    try:
        fr = frame_at(chart, chart.center(), order=2)
    except (exprmod.ExprEvalError, DegenerateJacobianError, NotSPDError, FrameError) as e:
        raise ChartError(f"{label}: degenerate at box center: {e}") from e
    if not np.all(np.isfinite(fr.J)):
        raise ChartError(f"{label}: non-finite Jacobian at box center")
    return chart


# ---------------------------------------------------------------- jet pipeline


def _move(arr: np.ndarray, lead: int) -> np.ndarray:
    """Move the first `lead` axes (tensor indices) after the batch axes."""
    return np.moveaxis(arr, list(range(lead)), list(range(-lead, 0)))


class ChartJets:
    """Lazy jet-level geometric pipeline at a point (or point batch).

    Construct via :func:`chart_jets` for a chart, or directly from component
    jets (this is how a deformed immersion is re-analyzed through the same
    code path).
    """

    def __init__(self, comps, u: np.ndarray):
        self.comps = list(comps)
        self.u = np.asarray(u, dtype=float)
        self.n = self.u.shape[-1]
        self.batch_shape = self.u.shape[:-1]
        self.batch_ndim = len(self.batch_shape)
        if len(self.comps) != self.n + 1:
            raise FrameError(
                f"need {self.n + 1} component jets, got {len(self.comps)}"
            )
        sp = self.comps[0].space
        for c in self.comps:
            if c.space is not sp:
                raise FrameError("component jets live in different jet spaces")
        self.order = sp.order

    @cached_property
    def Jjet(self):
        out = np.empty((self.n + 1, self.n), dtype=object)
        for p in range(self.n + 1):
            for k in range(self.n):
                out[p, k] = self.comps[p].diff(k)
        return out

    @cached_property
    def Njet(self):
        J = self.Jjet
        cross = np.empty(self.n + 1, dtype=object)
        for k in range(self.n + 1):
            rows = [r for r in range(self.n + 1) if r != k]
            d = mat_det(J[rows, :])
            cross[k] = d if k % 2 == 0 else -d
        normsq = cross[0] * cross[0]
        for k in range(1, self.n + 1):
            normsq = normsq + cross[k] * cross[k]
        norm_val = np.sqrt(np.asarray(normsq.value))
        Jv = values(J)  # (n+1, n, *batch)
        colnorm = np.prod(np.sqrt(np.sum(Jv * Jv, axis=0)), axis=0)
        if np.any(norm_val <= 1e-12 * colnorm):
            raise DegenerateJacobianError(
                f"normal norm {np.min(norm_val):.3e} below 1e-12 * column-norm product"
            )
        norm = jetmod.sqrt(normsq)
        return np.array([cross[k] / norm for k in range(self.n + 1)], dtype=object)

    @cached_property
    def gjet(self):
        J = self.Jjet
        g = np.empty((self.n, self.n), dtype=object)
        for i in range(self.n):
            for j in range(i, self.n):
                acc = J[0, i] * J[0, j]
                for p in range(1, self.n + 1):
                    acc = acc + J[p, i] * J[p, j]
                g[i, j] = g[j, i] = acc
        return g

    @cached_property
    def _ginv_det(self):
        inv, det = mat_inv(self.gjet)
        if np.any(np.asarray(det.value) <= 0):
            raise NotSPDError(f"det g = {np.min(det.value):.3e} <= 0")
        return inv, det

    @property
    def ginv_jet(self):
        return self._ginv_det[0]

    @cached_property
    def d2jet(self):
        """Second-derivative jets of the components, shape (n+1, n, n)."""
        out = np.empty((self.n + 1, self.n, self.n), dtype=object)
        for p in range(self.n + 1):
            for i in range(self.n):
                di = self.comps[p].diff(i)
                for j in range(i, self.n):
                    out[p, i, j] = out[p, j, i] = di.diff(j)
        return out

    @cached_property
    def bjet(self):
        Nt = [nj.truncated(self.order - 2) for nj in self.Njet]
        d2 = self.d2jet
        b = np.empty((self.n, self.n), dtype=object)
        for i in range(self.n):
            for j in range(i, self.n):
                acc = d2[0, i, j] * Nt[0]
                for p in range(1, self.n + 1):
                    acc = acc + d2[p, i, j] * Nt[p]
                b[i, j] = b[j, i] = acc
        return b

    @cached_property
    def Ajet(self):
        ginv2 = _trunc_mat(self.ginv_jet, self.order - 2)
        return mat_mul(ginv2, self.bjet)

    @cached_property
    def Gammajet(self):
        return christoffel_jets(self.gjet, self.ginv_jet)

    def scalar_grad_jets(self, s: JetScalar):
        """Contravariant gradient of a scalar jet.

        Entries have order min(K, order of s) - 1, so scalars built at a
        lower order than the chart jets still work.
        """
        out = min(self.order, s.space.order) - 1
        ds = [s.diff(l).truncated(out) for l in range(self.n)]
        ginv = _trunc_mat(self.ginv_jet, out)
        return np.array(
            [_dotsum(ginv[k, :], ds) for k in range(self.n)], dtype=object
        )

    def scalar_hess_jets(self, s: JetScalar):
        """Hessian operator (nabla grad s as a (1,1) tensor), order K-2."""
        K = self.order
        ds = [s.diff(l).truncated(K - 2) for l in range(self.n)]
        d2s = {}
        for i in range(self.n):
            di = s.diff(i)
            for l in range(i, self.n):
                d2s[i, l] = d2s[l, i] = di.diff(l)
        G = self.Gammajet
        ginv2 = _trunc_mat(self.ginv_jet, K - 2)
        H = np.empty((self.n, self.n), dtype=object)
        for k in range(self.n):
            for i in range(self.n):
                acc = None
                for l in range(self.n):
                    term = d2s[i, l]
                    for m in range(self.n):
                        term = term - G[m, i, l] * ds[m]
                    term = ginv2[k, l] * term
                    acc = term if acc is None else acc + term
                H[k, i] = acc
        return H


def _trunc_mat(M, order):
    out = np.empty(M.shape, dtype=object)
    for idx in np.ndindex(M.shape):
        out[idx] = M[idx].truncated(order)
    return out


def _dotsum(row, vec):
    acc = row[0] * vec[0]
    for k in range(1, len(vec)):
        acc = acc + row[k] * vec[k]
    return acc


def christoffel_jets(gjet, ginv_jet):
    """Gamma^k_{ij} = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij), as jets
    one order below the metric jets.  Shared by the base metric and any
    deformed metric."""
    n = gjet.shape[0]
    order = gjet[0, 0].order - 1
    ginv = _trunc_mat(ginv_jet, order)
    dg = np.empty((n, n, n), dtype=object)  # dg[i,j,l] = d_l g_ij
    for i in range(n):
        for j in range(i, n):
            for l in range(n):
                dg[i, j, l] = dg[j, i, l] = gjet[i, j].diff(l)
    G = np.empty((n, n, n), dtype=object)
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                acc = None
                for l in range(n):
                    term = dg[j, l, i] + dg[i, l, j] - dg[i, j, l]
                    term = ginv[k, l] * term
                    acc = term if acc is None else acc + term
                G[k, i, j] = G[k, j, i] = acc * 0.5
    return G


def curvature_values(Gamma_jets) -> np.ndarray:
    """R[l,k,i,j] values from Christoffel jets (order >= 1 required)."""
    Gv = _move(values(Gamma_jets), 3)  # (*b, k, i, j)
    dG = _move(d1_values(Gamma_jets), 4)  # (*b, k, i, j, m) = d_m Gamma^k_ij
    # d_i Gamma^l_jk - d_j Gamma^l_ik
    term1 = np.einsum("...ljki->...lkij", dG) - np.einsum("...likj->...lkij", dG)
    # Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik
    term2 = np.einsum("...lim,...mjk->...lkij", Gv, Gv) - np.einsum(
        "...ljm,...mik->...lkij", Gv, Gv
    )
    return term1 + term2


# ---------------------------------------------------------------- frames


@dataclass
class Frame:
    """Numeric first/second-order data at a point or batch of points.

    Batch axes (if any) lead; tensor indices trail.  R and nablaA are None
    when the jet order was 2.
    """

    u: np.ndarray
    order: int
    f: np.ndarray       # (*b, n+1)
    J: np.ndarray       # (*b, n+1, n)
    d2f: np.ndarray     # (*b, n+1, n, n)
    N: np.ndarray       # (*b, n+1)
    dN: np.ndarray      # (*b, n+1, n)
    g: np.ndarray       # (*b, n, n)
    g_inv: np.ndarray
    b: np.ndarray
    A: np.ndarray
    Gamma: np.ndarray | None  # (*b, k, i, j)
    R: np.ndarray | None      # (*b, l, k, i, j)
    nablaA: np.ndarray | None  # (*b, i, k, j)

    @property
    def n(self) -> int:
        return self.J.shape[-1]


def frame_from_jets(cj: ChartJets) -> Frame:
    """Extract the numeric frame from the jet pipeline, with validity checks."""
    if cj.order < 2:
        raise FrameError(f"jet order {cj.order} < 2 cannot produce a frame")
    f = _move(values(np.array(cj.comps, dtype=object)), 1)
    J = _move(values(cj.Jjet), 2)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(J))):
        raise FrameError("non-finite immersion values or Jacobian")
    d2f = _move(values(cj.d2jet), 3)
    N = _move(values(cj.Njet), 1)
    dN = _move(d1_values(cj.Njet), 2)
    g = _move(values(cj.gjet), 2)
    g_inv = _move(values(cj.ginv_jet), 2)
    b = _move(values(cj.bjet), 2)
    A = _move(values(cj.Ajet), 2)
    cholesky_spd(g)  # raises NotSPDError when g is not positive definite
    gA = np.einsum("...ij,...jk->...ik", g, A)
    scale = np.maximum(1.0, np.abs(gA).max())
    if np.abs(gA - gA.swapaxes(-1, -2)).max() > SELF_ADJOINT_TOL * scale:
        raise FrameError("shape operator lost g-self-adjointness")
    R = nablaA = None
    Gamma = _move(values(cj.Gammajet), 3)
    if cj.order >= 3:
        R = curvature_values(cj.Gammajet)
        dA = _move(d1_values(cj.Ajet), 3)  # (*b, k, j, i) = d_i A^k_j
        Gv = Gamma
        nablaA = (
            np.einsum("...kji->...ikj", dA)
            + np.einsum("...kil,...lj->...ikj", Gv, A)
            - np.einsum("...lij,...kl->...ikj", Gv, A)
        )
    return Frame(
        u=cj.u, order=cj.order, f=f, J=J, d2f=d2f, N=N, dN=dN,
        g=g, g_inv=g_inv, b=b, A=A, Gamma=Gamma, R=R, nablaA=nablaA,
    )


def chart_jets(chart: Chart, u, order: int = 3) -> ChartJets:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != chart.n:
        raise DomainError(f"point dimension {u.shape[-1]} != chart n={chart.n}")
    if order not in (2, 3, 4):
        raise ValueError(f"jet order must be 2, 3 or 4, got {order}")
    lo = np.asarray(chart.lo)
    hi = np.asarray(chart.hi)
    if np.any(u < lo) or np.any(u > hi):
        bad = np.argwhere((u < lo) | (u > hi))
        raise DomainError(
            f"point outside domain of {chart.label}: first offender index "
            f"{tuple(bad[0])}"
        )
    comps = [exprmod.eval_jet(c, u, order) for c in chart.components]
    return ChartJets(comps, u)


def frame_at(chart: Chart, u, order: int = 3) -> Frame:
    """Full geometric frame at a single point or batch of points."""
    return frame_from_jets(chart_jets(chart, u, order))


# ---------------------------------------------------------------- residuals
#
# Field variants return one value per batch point; the plain functions
# reduce with max so a single number certifies the whole sample.


def g_norm(frame: Frame, v: np.ndarray) -> np.ndarray:
    """|v|_g for tangent vectors with coordinate components (*b, n)."""
    return np.sqrt(np.einsum("...i,...ij,...j->...", v, frame.g, v))


def weingarten_residual_field(frame: Frame) -> np.ndarray:
    """max_i | d_i N + J (A e_i) | (ambient Euclidean norm)."""
    JA = np.einsum("...pk,...ki->...pi", frame.J, frame.A)
    diff = frame.dN + JA
    return np.sqrt(np.einsum("...pi,...pi->...i", diff, diff)).max(axis=-1)


def gauss_residual_field(frame: Frame) -> np.ndarray:
    """Gauss equation: R(e_i,e_j)e_k = <Ae_j,e_k> Ae_i - <Ae_i,e_k> Ae_j,
    residual in the g-norm, maxed over i,j,k."""
    if frame.R is None:
        raise FrameError("curvature needs jet order >= 3")
    gA = np.einsum("...ij,...jk->...ik", frame.g, frame.A)
    rhs = np.einsum("...kj,...li->...lkij", gA, frame.A) - np.einsum(
        "...ki,...lj->...lkij", gA, frame.A
    )
    diff = frame.R - rhs
    norms = np.sqrt(
        np.abs(np.einsum("...lkij,...lm,...mkij->...kij", diff, frame.g, diff))
    )
    return norms.max(axis=(-1, -2, -3))


def codazzi_A_residual_field(frame: Frame) -> np.ndarray:
    """| (nabla_i A) e_j - (nabla_j A) e_i |_g maxed over i,j."""
    if frame.nablaA is None:
        raise FrameError("nabla A needs jet order >= 3")
    D = frame.nablaA - np.einsum("...ikj->...jki", frame.nablaA)
    norms = np.sqrt(np.abs(np.einsum("...ikj,...kl,...ilj->...ij", D, frame.g, D)))
    return norms.max(axis=(-1, -2))


def metric_compat_residual_field(frame: Frame) -> np.ndarray:
    """nabla g = 0: d_l g_ij - Gamma^k_li g_kj - Gamma^k_lj g_ik."""
    # d_l g_ij = sum_p (d2f[p,l,i] J[p,j] + J[p,i] d2f[p,l,j])
    dg = np.einsum("...pli,...pj->...ijl", frame.d2f, frame.J) + np.einsum(
        "...pi,...plj->...ijl", frame.J, frame.d2f
    )
    corr = np.einsum("...kli,...kj->...ijl", frame.Gamma, frame.g) + np.einsum(
        "...klj,...ik->...ijl", frame.Gamma, frame.g
    )
    return np.abs(dg - corr).max(axis=(-1, -2, -3))


def bianchi_first_residual_field(frame: Frame) -> np.ndarray:
    """R^l_{kij} + R^l_{ijk} + R^l_{jki} = 0."""
    if frame.R is None:
        raise FrameError("curvature needs jet order >= 3")
    R = frame.R
    cyc = R + np.einsum("...lkij->...ljki", R) + np.einsum("...lkij->...lijk", R)
    return np.abs(cyc).max(axis=(-1, -2, -3, -4))


def gauss_formula_residual_field(frame: Frame) -> np.ndarray:
    """Ambient Gauss formula: d_i d_j f = Gamma^k_ij d_k f + b_ij N."""
    rhs = np.einsum("...kij,...pk->...pij", frame.Gamma, frame.J) + np.einsum(
        "...ij,...p->...pij", frame.b, frame.N
    )
    return np.abs(frame.d2f - rhs).max(axis=(-1, -2, -3))


def weingarten_residual(frame: Frame) -> float:
    return float(np.max(weingarten_residual_field(frame)))


def gauss_residual(frame: Frame) -> float:
    return float(np.max(gauss_residual_field(frame)))


def codazzi_A_residual(frame: Frame) -> float:
    return float(np.max(codazzi_A_residual_field(frame)))


# ---------------------------------------------------------------- utilities


def decompose_ambient(frame: Frame, vec) -> tuple[np.ndarray, np.ndarray]:
    """Split an ambient vector (field) into df(Z_top) + h N.

    Returns (Z_top, h) with Z_top in coordinate components.  vec may be a
    single (n+1,) vector or a batch matching the frame.
    """
    vec = np.broadcast_to(np.asarray(vec, dtype=float), frame.f.shape)
    h = np.einsum("...p,...p->...", vec, frame.N)
    tang = vec - h[..., None] * frame.N
    rhs = np.einsum("...pk,...p->...k", frame.J, tang)
    Z = np.einsum("...kl,...l->...k", frame.g_inv, rhs)
    return Z, h


def scalar_grad_hess(chart: Chart, u, s_ast: ExprAst, order: int = 3):
    """Contravariant gradient and Hessian operator of a scalar DSL field."""
    cj = chart_jets(chart, u, order)
    s = exprmod.eval_jet(s_ast, cj.u, order)
    grad = _move(values(cj.scalar_grad_jets(s)), 1)
    hess = _move(values(cj.scalar_hess_jets(s)), 2)
    return grad, hess


def rank_A_field(frame: Frame, tol: float = 1e-9) -> np.ndarray:
    """Pointwise numerical rank of the shape operator."""
    A = frame.A.reshape(-1, frame.n, frame.n)
    ranks = np.empty(A.shape[0], dtype=int)
    for m in range(A.shape[0]):
        ranks[m], _, _ = svd_rank_kernel(A[m], tol)
    return ranks.reshape(frame.A.shape[:-2])


def rank_A(frame: Frame, tol: float = 1e-9) -> int:
    """Certified rank over the sample: the minimum pointwise rank."""
    return int(np.min(rank_A_field(frame, tol)))


def fd_oracle(chart: Chart, u, step: float = 1e-5):
    """Finite-difference values (f, J, d2f) at a single point.

    Central differences with one Richardson level, evaluated through the
    value-only expression path (independent of the jet machinery).  First
    derivatives use `step`; second derivatives use 100*step to keep
    cancellation noise well under the comparison tolerances.  The point must
    sit at least 200*step inside the domain.
    """
    u = np.asarray(u, dtype=float)
    h2 = 100 * step
    lo = np.asarray(chart.lo)
    hi = np.asarray(chart.hi)
    if np.any(u - lo < 2 * h2) or np.any(hi - u < 2 * h2):
        raise DomainError(f"point too close to the boundary for step {step}")

    def fval(x):
        return np.array([exprmod.eval_value(c, x) for c in chart.components])

    n = chart.n
    f = fval(u)
    J = np.empty((n + 1, n))
    d2f = np.empty((n + 1, n, n))

    def central1(x, i, h):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        return (fval(xp) - fval(xm)) / (2 * h)

    for i in range(n):
        J[:, i] = (4 * central1(u, i, step / 2) - central1(u, i, step)) / 3

    def second_same(i, h):
        xp, xm = u.copy(), u.copy()
        xp[i] += h
        xm[i] -= h
        return (fval(xp) - 2 * f + fval(xm)) / h**2

    def second_mixed(i, j, h):
        out = np.zeros(n + 1)
        for si in (+1, -1):
            for sj in (+1, -1):
                x = u.copy()
                x[i] += si * h
                x[j] += sj * h
                out += si * sj * fval(x)
        return out / (4 * h**2)

    for i in range(n):
        d2f[:, i, i] = (4 * second_same(i, h2 / 2) - second_same(i, h2)) / 3
        for j in range(i + 1, n):
            v = (4 * second_mixed(i, j, h2 / 2) - second_mixed(i, j, h2)) / 3
            d2f[:, i, j] = d2f[:, j, i] = v
    return f, J, d2f


def grid_axes(chart: Chart, res) -> list[np.ndarray]:
    """Per-axis sample positions: the open box shrunk by 2% per side."""
    if np.isscalar(res):
        res = [int(res)] * chart.n
    if len(res) != chart.n or any(r < 2 for r in res):
        raise ValueError(f"bad grid resolution {res} for n={chart.n}")
    axes = []
    for k in range(chart.n):
        lo, hi = chart.lo[k], chart.hi[k]
        pad = GRID_SHRINK * (hi - lo)
        axes.append(np.linspace(lo + pad, hi - pad, int(res[k])))
    return axes


def grid_points(chart: Chart, res) -> np.ndarray:
    """Sample grid flattened to (m, n), first axis varying slowest."""
    axes = grid_axes(chart, res)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)
