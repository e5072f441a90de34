"""Constructing and verifying the deformed immersion.

Given a chart f and a commuting Codazzi operator Q, the deformation theory
produces a second immersion F of the same domain with dF = df o Q, inducing
the metric g~(X, Y) = g(QX, QY).  When Q = Hess(g) - h A comes from a
scalar pair, F has the closed form

    F = df(grad g) + h N,

which this module pushes through the same jet pipeline as f itself, so
every geometric quantity of F is computed from scratch rather than assumed.
For an operator given only entrywise, F is instead recovered by integrating
the 1-form omega = df o Q along staircase paths; the loop integrals of
omega measure how far Q is from being integrable at all.

``verify_deformation`` checks the theory's claims about F pointwise on a
sample: dF = df o Q, induced metric, shape operator A~ = sign(det Q) Q^-1 A
with a single global sign, Gauss map equal to the original up to that sign,
the wedge identity (Q A~ X) ^ (Q A~ Y) = (A X) ^ (A Y), and equality of the
kernels of A and A~.  ``extract_gh`` runs the construction backwards from
an immersion to a scalar pair; ``gauge_fit`` identifies two pairs modulo
the affine gauge (g, h) -> (g + <f, a> + c, h + <N, a>).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import codazzi as codazzimod
from .codazzi import (
    CodazziFrame,
    CodazziSpec,
    Explicit,
    GHPair,
    MinusA,
    Parallel,
    codazzi_frame_from_jets,
    deformed_metric,
    q_from_scalar_jets,
    q_jets,
)
from . import expr as exprmod
from .errors import HypothesisError
from .geometry import (
    Chart,
    ChartJets,
    Frame,
    chart_jets,
    codazzi_A_residual_field,
    decompose_ambient,
    frame_from_jets,
    grid_axes,
)
from .jet import JetScalar, values
from .linalg import (
    cholesky_spd,
    det,
    jacobi_svd,
    max_principal_angle,
    solve,
    svd_rank_kernel,
)
from .quadrature import integrate_segment


class KernelMismatchError(ValueError):
    """Ranks of A and the deformed shape operator disagree."""

    def __init__(self, rank_A: int, rank_At: int, where: int):
        self.rank_A = rank_A
        self.rank_At = rank_At
        super().__init__(
            f"kernel dimensions differ at sample {where}: "
            f"rank A = {rank_A}, rank deformed A = {rank_At}"
        )


# ------------------------------------------------------------ scalar pairs


@dataclass(frozen=True)
class GHPairData:
    """A scalar pair given as jet-building callables.

    ``g_fn`` must return a jet at the chart jets' full order; ``h_fn`` at
    order >= K-1.  ``label`` names the pair in reports.
    """

    g_fn: Callable[[ChartJets], JetScalar]
    h_fn: Callable[[ChartJets], JetScalar]
    label: str = "pair"


def gh_parallel_offset(t: float) -> GHPairData:
    """The pair (|f|^2/2, <f, N> + t), whose operator is Id - t A."""

    def g_fn(cj: ChartJets) -> JetScalar:
        acc = None
        for c in cj.comps:
            term = c * c
            acc = term if acc is None else acc + term
        return acc * 0.5

    def h_fn(cj: ChartJets) -> JetScalar:
        acc = None
        for c, Np in zip(cj.comps, cj.Njet):
            term = c.truncated(cj.order - 1) * Np
            acc = term if acc is None else acc + term
        return acc + t

    return GHPairData(g_fn, h_fn, label=f"parallel-offset t={t:g}")


def gh_gauss_translation(a: Optional[Sequence[float]] = None) -> GHPairData:
    """The pair (<f, a>, <N, a> + 1), whose operator is -A and F = a + N."""
    avec = None if a is None else [float(x) for x in a]

    def coeffs(cj: ChartJets) -> List[float]:
        if avec is None:
            return [0.0] * len(cj.comps)
        if len(avec) != len(cj.comps):
            raise ValueError(
                f"translation vector length {len(avec)} != ambient "
                f"dimension {len(cj.comps)}"
            )
        return avec

    def g_fn(cj: ChartJets) -> JetScalar:
        cs = coeffs(cj)
        acc = cj.comps[0] * cs[0]
        for c, ai in zip(cj.comps[1:], cs[1:]):
            acc = acc + c * ai
        return acc

    def h_fn(cj: ChartJets) -> JetScalar:
        cs = coeffs(cj)
        acc = cj.Njet[0] * cs[0]
        for Np, ai in zip(cj.Njet[1:], cs[1:]):
            acc = acc + Np * ai
        return acc + 1.0

    label = "gauss-translation" if avec is None else f"gauss-translation a={avec}"
    return GHPairData(g_fn, h_fn, label=label)


PairSource = Union[GHPairData, CodazziSpec]


def as_pair(source: PairSource) -> Optional[GHPairData]:
    """The scalar pair realizing a spec's closed-form F, if one exists."""
    if isinstance(source, GHPairData):
        return source
    if isinstance(source, Parallel):
        return gh_parallel_offset(source.t)
    if isinstance(source, MinusA):
        return gh_gauss_translation()
    if isinstance(source, GHPair):
        g_src, h_src = source.g_source, source.h_source

        def g_fn(cj: ChartJets) -> JetScalar:
            return exprmod.eval_jet(exprmod.parse(g_src, cj.n), cj.u, cj.order)

        def h_fn(cj: ChartJets) -> JetScalar:
            return exprmod.eval_jet(exprmod.parse(h_src, cj.n), cj.u, cj.order)

        return GHPairData(g_fn, h_fn, label="scalar pair")
    if isinstance(source, Explicit):
        return None
    raise TypeError(f"unknown deformation source {source!r}")


def _pair_jets(cj: ChartJets, pair: GHPairData) -> Tuple[JetScalar, JetScalar]:
    s = pair.g_fn(cj)
    h = pair.h_fn(cj)
    if h.space.order > cj.order - 1:
        h = h.truncated(cj.order - 1)
    return s, h


# ------------------------------------------------------- closed-form F


def immersion_jets(cj: ChartJets, s: JetScalar, h: JetScalar) -> np.ndarray:
    """Component jets of F = df(grad s) + h N, at order K-1."""
    grad = cj.scalar_grad_jets(s)
    ht = h if h.space.order == cj.order - 1 else h.truncated(cj.order - 1)
    J = cj.Jjet
    N = cj.Njet
    dim = len(cj.comps)
    F = np.empty(dim, dtype=object)
    for p in range(dim):
        acc = ht * N[p]
        for k in range(cj.n):
            acc = acc + J[p, k] * grad[k]
        F[p] = acc
    return F


def deformed_chart_jets(cj: ChartJets, source: PairSource) -> ChartJets:
    """Re-enter the frame pipeline with F's component jets."""
    pair = as_pair(source)
    if pair is None:
        raise ValueError(
            "closed-form deformation needs a scalar pair; integrate the "
            "1-form df o Q along paths for explicit operators"
        )
    s, h = _pair_jets(cj, pair)
    return ChartJets(list(immersion_jets(cj, s, h)), cj.u)


def closed_form_immersion(
    chart: Chart, source: PairSource
) -> Callable[[np.ndarray], np.ndarray]:
    """Pointwise evaluator u -> F(u) for a pair-backed deformation."""
    pair = as_pair(source)
    if pair is None:
        raise ValueError("closed-form evaluation needs a scalar pair source")

    def F_fn(pts: np.ndarray) -> np.ndarray:
        cj = chart_jets(chart, pts, order=2)
        s, h = _pair_jets(cj, pair)
        Fj = immersion_jets(cj, s, h)
        vals = values(Fj)  # (dim, *batch)
        return np.moveaxis(vals, 0, -1)

    return F_fn


# ------------------------------------------------------------ verification


@dataclass
class DeformationCheck:
    """Pointwise residual fields for every claim about F, plus the sign.

    All ``*_field`` members have one entry per sample point; ``sign`` is
    the global orientation factor sign(det Q) relating the two Gauss maps
    and shape operators.
    """

    sign: int
    pair_q_residual: float
    dF_field: np.ndarray
    metric_field: np.ndarray
    shape_field: np.ndarray
    selfadjoint_field: np.ndarray
    codazzi_At_field: np.ndarray
    gauss_field: np.ndarray
    wedge_field: np.ndarray
    kernel_angle_field: np.ndarray
    frame: Frame
    frameF: Frame
    cf: CodazziFrame

    @property
    def dF_residual(self) -> float:
        return float(self.dF_field.max())

    @property
    def metric_residual(self) -> float:
        return float(self.metric_field.max())

    @property
    def shape_residual(self) -> float:
        return float(self.shape_field.max())

    @property
    def selfadjoint_residual(self) -> float:
        return float(self.selfadjoint_field.max())

    @property
    def codazzi_At_residual(self) -> float:
        return float(self.codazzi_At_field.max())

    @property
    def gauss_residual(self) -> float:
        return float(self.gauss_field.max())

    @property
    def wedge_residual(self) -> float:
        return float(self.wedge_field.max())

    @property
    def kernel_angle(self) -> float:
        return float(self.kernel_angle_field.max())


def _det_signs(Q: np.ndarray) -> np.ndarray:
    n = Q.shape[-1]
    flat = Q.reshape(-1, n, n)
    out = np.empty(flat.shape[0])
    for m in range(flat.shape[0]):
        out[m] = np.sign(det(flat[m]))
    return out.reshape(Q.shape[:-2])


def _ortho_operator(L: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Conjugate operator T into g-orthonormal coordinates: L^T T L^{-T}."""
    n = L.shape[-1]
    Lf = L.reshape(-1, n, n)
    Tf = T.reshape(-1, n, n)
    out = np.empty_like(Tf)
    for m in range(Tf.shape[0]):
        Linv_T = solve(Lf[m].T, np.eye(n))
        out[m] = Lf[m].T @ Tf[m] @ Linv_T
    return out.reshape(T.shape)


def _pair_minors(M: np.ndarray) -> np.ndarray:
    """All 2x2 minors det M[[p,q],[i,j]] for p<q, i<j: shape (*b, P, P)."""
    n = M.shape[-1]
    pairs = [(p, q) for p in range(n) for q in range(p + 1, n)]
    P = len(pairs)
    out = np.empty(M.shape[:-2] + (P, P))
    for a, (p, q) in enumerate(pairs):
        for b_, (i, j) in enumerate(pairs):
            out[..., a, b_] = (
                M[..., p, i] * M[..., q, j] - M[..., p, j] * M[..., q, i]
            )
    return out


def wedge_identity_field(
    frame: Frame, cf: CodazziFrame, Atilde: np.ndarray
) -> np.ndarray:
    """max |(Q A~ X)^(Q A~ Y) - (A X)^(A Y)| over basis 2-planes, per point.

    Wedges are taken in g-orthonormal coordinates so the numbers are frame
    independent.
    """
    L = cholesky_spd(frame.g)
    QAt = np.einsum("...km,...mj->...kj", cf.Q, Atilde)
    M1 = _pair_minors(_ortho_operator(L, QAt))
    M2 = _pair_minors(_ortho_operator(L, frame.A))
    return np.abs(M1 - M2).max(axis=(-1, -2))


def kernel_angle_field(
    frame: Frame, Atilde: np.ndarray, tol: float = 1e-9
) -> np.ndarray:
    """Largest principal angle between ker A and ker A~ per point.

    Raises KernelMismatchError when the numerical ranks disagree anywhere.
    """
    n = frame.n
    A = frame.A.reshape(-1, n, n)
    At = Atilde.reshape(-1, n, n)
    out = np.empty(A.shape[0])
    for m in range(A.shape[0]):
        r1, k1, _ = svd_rank_kernel(A[m], tol)
        r2, k2, _ = svd_rank_kernel(At[m], tol)
        if r1 != r2:
            raise KernelMismatchError(r1, r2, m)
        out[m] = max_principal_angle(k1, k2)
    return out.reshape(frame.A.shape[:-2])


def verify_deformation(
    chart: Chart, pts: np.ndarray, source: PairSource, order: int = 4
) -> DeformationCheck:
    """Build F in closed form and check every pointwise claim about it."""
    cj = chart_jets(chart, pts, order)
    frame = frame_from_jets(cj)
    pair = as_pair(source)
    if pair is None:
        raise ValueError("verify_deformation needs a scalar pair source")
    s, h = _pair_jets(cj, pair)
    qj_pair = q_from_scalar_jets(cj, s, h)
    if isinstance(source, (Parallel, MinusA)):
        qj = q_jets(cj, source)
        q_dir = np.moveaxis(values(qj).astype(float), (0, 1), (-2, -1))
        q_par = np.moveaxis(values(qj_pair).astype(float), (0, 1), (-2, -1))
        pair_q_residual = float(np.abs(q_dir - q_par).max())
    else:
        qj = qj_pair
        pair_q_residual = 0.0
    cf = codazzi_frame_from_jets(qj, frame)

    cjF = ChartJets(list(immersion_jets(cj, s, h)), cj.u)
    frameF = frame_from_jets(cjF)

    signs = _det_signs(cf.Q)
    if signs.min() != signs.max():
        raise HypothesisError(
            "sign(det Q) changes over the sample; the deformation sign "
            "is not globally defined"
        )
    sign = int(signs.max())

    JQ = np.einsum("...pk,...kj->...pj", frame.J, cf.Q)
    dF_field = np.abs(frameF.J - JQ).max(axis=(-1, -2))
    gt = deformed_metric(frame, cf)
    metric_field = np.abs(frameF.g - gt).max(axis=(-1, -2))
    Atilde = frameF.A
    QinvA = np.einsum("...km,...mj->...kj", cf.Q_inv, frame.A)
    shape_field = np.abs(Atilde - sign * QinvA).max(axis=(-1, -2))
    # A~ must be self-adjoint for the induced metric and Codazzi for the
    # induced connection; both come straight out of the F frame
    gAt = np.einsum("...ik,...kj->...ij", frameF.g, Atilde)
    selfadj_field = np.abs(gAt - np.swapaxes(gAt, -1, -2)).max(axis=(-1, -2))
    if frameF.nablaA is not None:
        codazzi_At_field = codazzi_A_residual_field(frameF)
    else:
        codazzi_At_field = np.zeros(shape_field.shape)
    gauss_field = np.abs(frameF.N - sign * frame.N).max(axis=-1)
    wedge_field = wedge_identity_field(frame, cf, Atilde)
    kernel_field = kernel_angle_field(frame, Atilde)
    return DeformationCheck(
        sign=sign,
        pair_q_residual=pair_q_residual,
        dF_field=dF_field,
        metric_field=metric_field,
        shape_field=shape_field,
        selfadjoint_field=selfadj_field,
        codazzi_At_field=codazzi_At_field,
        gauss_field=gauss_field,
        wedge_field=wedge_field,
        kernel_angle_field=kernel_field,
        frame=frame,
        frameF=frameF,
        cf=cf,
    )


# ----------------------------------------------------- path integration


def _omega_values(
    chart: Chart, source: PairSource, pts: np.ndarray
) -> np.ndarray:
    """Values of the 1-form omega = df o Q: shape (*batch, dim, n)."""
    cj = chart_jets(chart, pts, order=2)
    if isinstance(source, GHPairData):
        s, h = _pair_jets(cj, source)
        qj = q_from_scalar_jets(cj, s, h)
    else:
        qj = q_jets(cj, source)
    Jv = np.moveaxis(values(cj.Jjet).astype(float), (0, 1), (-2, -1))
    Qv = np.moveaxis(values(qj).astype(float), (0, 1), (-2, -1))
    return np.einsum("...pk,...kj->...pj", Jv, Qv)


@dataclass(frozen=True)
class LoopRect:
    """An axis-aligned rectangle loop inside the chart domain.

    The loop runs through the 2-plane of axes (axis_a, axis_b) at the
    remaining coordinates of ``base``, clockwise in the (a, b) plane:
    the b-first staircase minus the a-first staircase between the corners
    (a0, b0) and (a1, b1).
    """

    axis_a: int
    axis_b: int
    a0: float
    a1: float
    b0: float
    b1: float
    base: Tuple[float, ...]


def _segment_points(
    rect_base: np.ndarray, axis: int, t: np.ndarray
) -> np.ndarray:
    pts = np.broadcast_to(rect_base, (len(t), len(rect_base))).copy()
    pts[:, axis] = t
    return pts


def _staircase_segments(
    rect: LoopRect, order: Sequence[int]
) -> List[Tuple[int, float, float, np.ndarray]]:
    """(axis, t0, t1, fixed-point) legs from (a0,b0) to (a1,b1)."""
    start = {rect.axis_a: rect.a0, rect.axis_b: rect.b0}
    end = {rect.axis_a: rect.a1, rect.axis_b: rect.b1}
    cur = dict(start)
    legs = []
    for ax in order:
        base = np.array(rect.base, dtype=float)
        for k, v in cur.items():
            base[k] = v
        legs.append((ax, cur[ax], end[ax], base))
        cur[ax] = end[ax]
    return legs


def omega_loop_integral(
    chart: Chart, source: PairSource, rect: LoopRect, tol: float = 1e-10
) -> np.ndarray:
    """Clockwise circulation of omega around the rectangle, in R^dim."""
    dim = chart.ambient_dim

    def path_integral(order: Sequence[int]) -> np.ndarray:
        total = np.zeros(dim)
        for ax, t0, t1, base in _staircase_segments(rect, order):
            def fn(t: np.ndarray) -> np.ndarray:
                pts = _segment_points(base, ax, t)
                return _omega_values(chart, source, pts)[..., ax]

            total = total + integrate_segment(fn, t0, t1, tol=tol)
        return total

    b_first = path_integral([rect.axis_b, rect.axis_a])
    a_first = path_integral([rect.axis_a, rect.axis_b])
    return b_first - a_first


def default_loop_rects(chart: Chart, margin: float = 0.02) -> List[LoopRect]:
    """One spanning rectangle per adjacent axis pair, through the center."""
    rects = []
    center = chart.center()
    for k in range(chart.n - 1):
        a, b = k, k + 1
        pad_a = margin * (chart.hi[a] - chart.lo[a])
        pad_b = margin * (chart.hi[b] - chart.lo[b])
        a0, a1 = chart.lo[a] + pad_a, chart.hi[a] - pad_a
        b0, b1 = chart.lo[b] + pad_b, chart.hi[b] - pad_b
        rects.append(
            LoopRect(
                axis_a=a, axis_b=b, a0=a0, a1=a1, b0=b0, b1=b1,
                base=tuple(center),
            )
        )
        # an off-center quarter rectangle as well: symmetric integrands can
        # cancel exactly over the centered spanning rectangle
        rects.append(
            LoopRect(
                axis_a=a, axis_b=b,
                a0=0.5 * (a0 + a1), a1=a1,
                b0=0.5 * (b0 + b1), b1=b1,
                base=tuple(center),
            )
        )
    return rects


def omega_loop_residual(
    chart: Chart,
    source: PairSource,
    rects: Optional[Sequence[LoopRect]] = None,
    tol: float = 1e-10,
) -> Tuple[float, List[np.ndarray]]:
    """Worst loop-integral magnitude over the rectangles, plus each loop."""
    if rects is None:
        rects = default_loop_rects(chart)
    loops = [omega_loop_integral(chart, source, r, tol) for r in rects]
    worst = max(float(np.abs(v).max()) for v in loops)
    return worst, loops


def path_integral_immersion(
    chart: Chart,
    source: PairSource,
    base: Sequence[float],
    target: Sequence[float],
    F0: Optional[Sequence[float]] = None,
    axis_order: Optional[Sequence[int]] = None,
    tol: float = 1e-10,
) -> np.ndarray:
    """F(target) by integrating omega along the axis-ordered staircase."""
    base = np.asarray(base, dtype=float)
    target = np.asarray(target, dtype=float)
    dim = chart.ambient_dim
    F = np.zeros(dim) if F0 is None else np.asarray(F0, dtype=float).copy()
    order = list(range(chart.n)) if axis_order is None else list(axis_order)
    cur = base.copy()
    for ax in order:
        t0, t1 = cur[ax], target[ax]
        if t0 != t1:
            fixed = cur.copy()

            def fn(t: np.ndarray) -> np.ndarray:
                pts = _segment_points(fixed, ax, t)
                return _omega_values(chart, source, pts)[..., ax]

            F = F + integrate_segment(fn, t0, t1, tol=tol)
        cur[ax] = target[ax]
    return F


def path_integral_on_grid(
    chart: Chart,
    source: PairSource,
    res,
    F0: Optional[Sequence[float]] = None,
    axis_order: Optional[Sequence[int]] = None,
    tol: float = 1e-10,
) -> Tuple[np.ndarray, np.ndarray]:
    """F on the whole sample grid by shared-prefix staircase integration.

    Returns (mesh points with shape (*res, n), F values with shape
    (*res, dim)).  All grid lines at the same depth share one adaptive
    quadrature call, so the cost scales with the number of grid steps, not
    the number of points.
    """
    axes = grid_axes(chart, res)
    shape = tuple(len(ax) for ax in axes)
    n = chart.n
    dim = chart.ambient_dim
    order = list(range(n)) if axis_order is None else list(axis_order)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    F = np.zeros(shape + (dim,))
    if F0 is not None:
        F[(0,) * n] = np.asarray(F0, dtype=float)

    done: List[int] = []
    for ax in order:
        # lines fan out over the axes already filled; untouched axes sit at
        # their first sample
        line_axes = [axes[j] if j in done else axes[j][:1] for j in range(n)]
        lines = np.stack(np.meshgrid(*line_axes, indexing="ij"), axis=-1)
        lines = lines.reshape(-1, n)
        for ik in range(1, shape[ax]):
            t0, t1 = axes[ax][ik - 1], axes[ax][ik]

            def fn(t: np.ndarray) -> np.ndarray:
                m = len(t)
                pts = np.repeat(lines[None, :, :], m, axis=0)
                pts[:, :, ax] = t[:, None]
                om = _omega_values(chart, source, pts.reshape(-1, n))
                return om[..., ax].reshape(m, -1)

            seg = integrate_segment(fn, t0, t1, tol=tol)
            seg = seg.reshape([len(la) for la in line_axes] + [dim])
            src = _line_index(done, ax, ik - 1, n)
            dst = _line_index(done, ax, ik, n)
            F[dst] = F[src] + seg[_line_index(done, ax, 0, n, collapse=True)]
        done.append(ax)
    return mesh, F


def _line_index(done, ax, ik, n, collapse=False):
    idx = []
    for j in range(n):
        if j == ax:
            idx.append(0 if collapse else ik)
        elif j in done:
            idx.append(slice(None))
        else:
            idx.append(0)
    return tuple(idx)


def path_dependence_residual(
    chart: Chart, source: PairSource, res, tol: float = 1e-10
) -> float:
    """max |F_forward - F_reversed| over the grid; zero iff omega is exact."""
    _, F1 = path_integral_on_grid(chart, source, res, tol=tol)
    _, F2 = path_integral_on_grid(
        chart, source, res, axis_order=list(reversed(range(chart.n))), tol=tol
    )
    return float(np.abs(F1 - F2).max())


@dataclass
class FDFrame:
    """First and second order data of a path-integral immersion, by FD.

    Used for operators with no scalar pair, where F exists only through
    quadrature.  Accuracy is limited by the difference step; expect ~1e-9
    on first derivatives and ~1e-6 on second derivatives.
    """

    f: np.ndarray
    J: np.ndarray
    N: np.ndarray
    g: np.ndarray
    b: np.ndarray
    A: np.ndarray


def fd_deformed_frame(
    chart: Chart,
    source: PairSource,
    u: Sequence[float],
    step: float = 1e-3,
    tol: float = 1e-12,
    base: Optional[Sequence[float]] = None,
) -> FDFrame:
    """Finite-difference frame of the staircase-integrated immersion."""
    from .geometry import GRID_SHRINK, DomainError
    from .linalg import unit_normal

    u = np.asarray(u, dtype=float)
    n = chart.n
    lo = np.asarray(chart.lo)
    hi = np.asarray(chart.hi)
    if base is None:
        base = lo + GRID_SHRINK * (hi - lo)
    h2 = 10 * step
    if np.any(u - lo < 2 * h2) or np.any(hi - u < 2 * h2):
        raise DomainError(f"point too close to the boundary for step {step}")

    cache = {}

    def F(x: np.ndarray) -> np.ndarray:
        key = tuple(np.round(x, 12))
        if key not in cache:
            cache[key] = path_integral_immersion(
                chart, source, base, x, tol=tol
            )
        return cache[key]

    dim = chart.ambient_dim
    f = F(u)
    J = np.empty((dim, n))
    d2 = np.empty((dim, n, n))

    def central1(i, h):
        xp, xm = u.copy(), u.copy()
        xp[i] += h
        xm[i] -= h
        return (F(xp) - F(xm)) / (2 * h)

    def second_same(i, h):
        xp, xm = u.copy(), u.copy()
        xp[i] += h
        xm[i] -= h
        return (F(xp) - 2 * f + F(xm)) / h**2

    def second_mixed(i, j, h):
        out = np.zeros(dim)
        for si in (+1, -1):
            for sj in (+1, -1):
                x = u.copy()
                x[i] += si * h
                x[j] += sj * h
                out += si * sj * F(x)
        return out / (4 * h**2)

    for i in range(n):
        J[:, i] = (4 * central1(i, step / 2) - central1(i, step)) / 3
        d2[:, i, i] = (4 * second_same(i, h2 / 2) - second_same(i, h2)) / 3
        for j in range(i + 1, n):
            v = (4 * second_mixed(i, j, h2 / 2) - second_mixed(i, j, h2)) / 3
            d2[:, i, j] = d2[:, j, i] = v

    N = unit_normal(J)
    g = J.T @ J
    b = np.einsum("p,pij->ij", N, d2)
    A = solve(g, b)
    return FDFrame(f=f, J=J, N=N, g=g, b=b, A=A)


# ------------------------------------------------------------- extraction


@dataclass
class GridPair:
    """Scalar pair sampled on a mesh grid, as produced by ``extract_gh``."""

    points: np.ndarray  # (*res, n)
    g: np.ndarray       # (*res,)
    h: np.ndarray       # (*res,)
    grad_g: np.ndarray  # (*res, n) contravariant components
    closed_residual: float


def extract_gh(
    chart: Chart,
    F_fn: Callable[[np.ndarray], np.ndarray],
    res,
    tol: float = 1e-10,
) -> GridPair:
    """Recover the scalar pair of an immersion with dF = df o Q.

    Decomposes F pointwise into df(Z) + h N, checks that the covector
    field g(Z, .) is closed via rectangle loop integrals, and integrates
    it along staircase paths to produce g with g(base corner) = 0.
    """
    axes = grid_axes(chart, res)
    shape = tuple(len(ax) for ax in axes)
    n = chart.n
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    flat = mesh.reshape(-1, n)
    frame = frame_from_jets(chart_jets(chart, flat, order=2))
    Fv = F_fn(flat)
    Z, h = decompose_ambient(frame, Fv)

    def zeta_at(pts: np.ndarray) -> np.ndarray:
        fr = frame_from_jets(chart_jets(chart, pts, order=2))
        Zp, _ = decompose_ambient(fr, F_fn(pts))
        return np.einsum("...ij,...j->...i", fr.g, Zp)

    closed = _covector_loop_residual(chart, zeta_at, tol)
    g_grid = _prefix_integrate(chart, zeta_at, axes, tol)
    return GridPair(
        points=mesh,
        g=g_grid,
        h=h.reshape(shape),
        grad_g=Z.reshape(shape + (n,)),
        closed_residual=closed,
    )


def _covector_loop_residual(chart, zeta_at, tol):
    worst = 0.0
    for rect in default_loop_rects(chart):
        total = np.zeros(1)
        legs_b = _staircase_segments(rect, [rect.axis_b, rect.axis_a])
        legs_a = _staircase_segments(rect, [rect.axis_a, rect.axis_b])
        for sgn, legs in ((1.0, legs_b), (-1.0, legs_a)):
            for ax, t0, t1, base in legs:
                def fn(t):
                    pts = _segment_points(base, ax, t)
                    return zeta_at(pts)[..., ax]

                total = total + sgn * integrate_segment(fn, t0, t1, tol=tol)
        worst = max(worst, float(np.abs(total).max()))
    return worst


def _prefix_integrate(chart, zeta_at, axes, tol):
    n = chart.n
    shape = tuple(len(ax) for ax in axes)
    g = np.zeros(shape)
    done: List[int] = []
    for ax in range(n):
        line_axes = [axes[j] if j in done else axes[j][:1] for j in range(n)]
        lines = np.stack(np.meshgrid(*line_axes, indexing="ij"), axis=-1)
        lines = lines.reshape(-1, n)
        for ik in range(1, shape[ax]):
            t0, t1 = axes[ax][ik - 1], axes[ax][ik]

            def fn(t):
                m = len(t)
                pts = np.repeat(lines[None, :, :], m, axis=0)
                pts[:, :, ax] = t[:, None]
                z = zeta_at(pts.reshape(-1, n))[..., ax]
                return z.reshape(m, -1)

            seg = integrate_segment(fn, t0, t1, tol=tol)
            seg = seg.reshape([len(la) for la in line_axes])
            src = _line_index(done, ax, ik - 1, n)
            dst = _line_index(done, ax, ik, n)
            g[dst] = g[src] + seg[_line_index(done, ax, 0, n, collapse=True)]
        done.append(ax)
    return g


def pair_on_grid(chart: Chart, pair: GHPairData, res) -> GridPair:
    """Sample a pair's (g, h, grad g) on the grid, for gauge comparison."""
    axes = grid_axes(chart, res)
    shape = tuple(len(ax) for ax in axes)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    flat = mesh.reshape(-1, chart.n)
    cj = chart_jets(chart, flat, order=2)
    s, h = _pair_jets(cj, pair)
    grad = values(cj.scalar_grad_jets(s)).astype(float)  # (n, m)
    return GridPair(
        points=mesh,
        g=np.asarray(s.value, dtype=float).reshape(shape),
        h=np.asarray(h.value, dtype=float).reshape(shape),
        grad_g=np.moveaxis(grad, 0, -1).reshape(shape + (chart.n,)),
        closed_residual=0.0,
    )


@dataclass
class GaugeFit:
    """Best affine gauge (a, c) matching pair2 = pair1 + gauge."""

    a: np.ndarray
    c: float
    residual: float
    cond: float


def gauge_fit(chart: Chart, pair1: GridPair, pair2: GridPair) -> GaugeFit:
    """Least-squares gauge between two sampled pairs on the same grid.

    Solves for (a, c) minimizing the joint residual of
    g2 = g1 + <f, a> + c and h2 = h1 + <N, a> over all sample points.
    """
    if pair1.points.shape != pair2.points.shape:
        raise ValueError("pairs sampled on different grids")
    n = chart.n
    flat = pair1.points.reshape(-1, n)
    frame = frame_from_jets(chart_jets(chart, flat, order=2))
    dim = chart.ambient_dim
    m = flat.shape[0]
    D = np.zeros((2 * m, dim + 1))
    D[:m, :dim] = frame.f
    D[:m, dim] = 1.0
    D[m:, :dim] = frame.N
    rhs = np.concatenate(
        [
            (pair2.g - pair1.g).reshape(-1),
            (pair2.h - pair1.h).reshape(-1),
        ]
    )
    x = solve(D.T @ D, D.T @ rhs)
    _, s, _ = jacobi_svd(D)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else np.inf
    residual = float(np.abs(D @ x - rhs).max())
    return GaugeFit(a=x[:dim], c=float(x[dim]), residual=residual, cond=cond)
