"""Deformation-operator tests against closed forms and negative controls."""

import numpy as np
import pytest

from isodeform import catalog, codazzi, expr as exprmod, geometry
from isodeform.codazzi import (
    Explicit,
    GHPair,
    MinusA,
    Parallel,
    codazzi_Q_residual_field,
    codazzi_frame,
    commutator_residual_field,
    deformed_connection_residual_field,
    deformed_curvature_residual_field,
    deformed_metric,
    deformed_metric_jets,
    q_jets,
)
from isodeform.errors import HypothesisError
from isodeform.geometry import FrameError, chart_jets, frame_from_jets, grid_points
from isodeform.jet import values


def setup_case(chart, u, spec, order=3):
    cj = chart_jets(chart, u, order)
    frame = frame_from_jets(cj)
    qj = q_jets(cj, spec)
    cf = codazzi.codazzi_frame_from_jets(qj, frame)
    return cj, frame, qj, cf


def test_parallel_on_sphere_is_scalar():
    # A = -Id/r, so Q = Id - tA = (1 + t/r) Id
    ch = catalog.sphere3(2.0)
    cj, frame, qj, cf = setup_case(ch, [0.7, 0.8, 0.9], Parallel(1.0), order=4)
    assert np.allclose(cf.Q, 1.5 * np.eye(3), atol=1e-12)
    assert np.allclose(cf.Q_inv, np.eye(3) / 1.5, atol=1e-12)
    assert commutator_residual_field(frame, cf).max() < 1e-13
    assert codazzi_Q_residual_field(frame, cf).max() < 1e-10
    gt = deformed_metric(frame, cf)
    assert np.allclose(gt, 2.25 * frame.g, atol=1e-12)
    # scalar constant Q leaves the connection and curvature unchanged
    assert deformed_connection_residual_field(cj, frame, cf, qj).max() < 1e-10
    assert deformed_curvature_residual_field(cj, frame, cf, qj).max() < 1e-9
    G1 = geometry._move(values(codazzi.deformed_christoffel_jets(cj, qj)), 3)
    assert np.abs(G1 - frame.Gamma).max() < 1e-10


def test_gauss_translation_pair_gives_minus_A():
    # g = <f, a>, h = <N, a> + 1 yields Q = -A for any constant a;
    # on the sphere N = f/r makes h expressible from g
    ch = catalog.sphere3(2.0)
    a = [0.3, -0.2, 0.5, 0.1]
    g_src = " + ".join(
        f"{ai!r}*({exprmod.to_string(c)})" for ai, c in zip(a, ch.components)
    )
    h_src = f"0.5*({g_src}) + 1"
    u = np.array([0.7, 0.8, 0.9])
    cj = chart_jets(ch, u, 3)
    frame = frame_from_jets(cj)
    qj = q_jets(cj, GHPair(g_src, h_src))
    assert np.allclose(geometry._move(values(qj), 2), -frame.A, atol=1e-10)
    qj2 = q_jets(cj, MinusA())
    assert np.allclose(
        geometry._move(values(qj), 2), geometry._move(values(qj2), 2), atol=1e-10
    )


def test_constant_pair_matches_parallel_on_sphere():
    # |f|^2/2 and <f,N> are constant on the sphere, so the parallel pair
    # (g, h) = (r^2/2, r + t) has hess(g) = 0 and Q = -(r + t) A
    ch = catalog.sphere3(2.0)
    u = np.array([0.7, 0.8, 0.9])
    cj = chart_jets(ch, u, 3)
    q_gh = geometry._move(values(q_jets(cj, GHPair("2", "3"))), 2)
    q_par = geometry._move(values(q_jets(cj, Parallel(1.0))), 2)
    assert np.allclose(q_gh, q_par, atol=1e-12)
    assert np.allclose(q_gh, 1.5 * np.eye(3), atol=1e-12)


def test_graph_parallel_pair_from_dsl_fields():
    # Monge graph: |f|^2/2 and <f,N> + t have closed DSL forms; the induced
    # Q must equal Id - t A
    ch = catalog.graph3()
    phi = "u1^2 + 2*u2^2 + 3*u3^2"
    w2 = "(1 + 4*u1^2 + 16*u2^2 + 36*u3^2)"
    g_src = f"0.5*(u1^2 + u2^2 + u3^2 + ({phi})^2)"
    h_src = f"(2*u1^2 + 4*u2^2 + 6*u3^2 - ({phi}))/sqrt({w2}) + 0.05"
    pts = grid_points(ch, 3)
    cj = chart_jets(ch, pts, 3)
    frame = frame_from_jets(cj)
    qv = geometry._move(values(q_jets(cj, GHPair(g_src, h_src))), 2)
    expected = np.eye(3) - 0.05 * frame.A
    assert np.abs(qv - expected).max() < 1e-11


def test_gh_gradient_constraint_violation_raises():
    ch = catalog.sphere3(2.0)
    cj = chart_jets(ch, [0.7, 0.8, 0.9], 3)
    with pytest.raises(HypothesisError, match="gradient constraint"):
        q_jets(cj, GHPair("u1", "u2"))


@pytest.mark.parametrize(
    "chart,spec,order",
    [
        (catalog.torus2(), Parallel(0.1), 4),
        (catalog.graph3(), Parallel(0.05), 4),
        (catalog.ellipsoid3(), MinusA(), 4),
    ],
    ids=["torus-parallel", "graph-parallel", "ellipsoid-minusA"],
)
def test_deformed_geometry_identities_on_grid(chart, spec, order):
    pts = grid_points(chart, 3)
    cj = chart_jets(chart, pts, order)
    frame = frame_from_jets(cj)
    qj = q_jets(cj, spec)
    cf = codazzi.codazzi_frame_from_jets(qj, frame)
    assert commutator_residual_field(frame, cf).max() < 1e-12
    assert codazzi_Q_residual_field(frame, cf).max() < 1e-9
    assert deformed_connection_residual_field(cj, frame, cf, qj).max() < 1e-9
    assert deformed_curvature_residual_field(cj, frame, cf, qj).max() < 1e-7
    gt = deformed_metric(frame, cf)
    gt_jets = geometry._move(values(deformed_metric_jets(cj, qj)), 2)
    assert np.abs(gt - gt_jets).max() < 1e-13


def test_singular_q_raises():
    ch = catalog.sphere3(2.0)
    cj = chart_jets(ch, [0.7, 0.8, 0.9], 3)
    frame = frame_from_jets(cj)
    qj = q_jets(cj, Parallel(-2.0))  # Id + 2A = 0 on the r=2 sphere
    with pytest.raises(HypothesisError, match="singular"):
        codazzi.codazzi_frame_from_jets(qj, frame)


def test_explicit_rejects_non_self_adjoint():
    ch = catalog.plane2()
    cj = chart_jets(ch, [0.3, 0.4], 3)
    with pytest.raises(HypothesisError, match="self-adjoint"):
        q_jets(cj, Explicit((("1", "u1"), ("0", "1"))))


def test_explicit_diagonal_plane_breaks_codazzi():
    # Q = diag(1, 1 + u1) on the flat plane is self-adjoint and commutes
    # with A = 0 but is not a Codazzi tensor
    ch = catalog.plane2()
    cj = chart_jets(ch, [0.3, 0.4], 3)
    frame = frame_from_jets(cj)
    qj = q_jets(cj, Explicit((("1", "0"), ("0", "1 + u1"))))
    cf = codazzi.codazzi_frame_from_jets(qj, frame)
    assert commutator_residual_field(frame, cf).max() < 1e-15
    assert codazzi_Q_residual_field(frame, cf).max() == pytest.approx(1.0)


def test_noncommuting_control_detected():
    # Q = g^{-1} S with constant diagonal S: g-self-adjoint by construction
    # (gQ = S) yet [Q, A] != 0 away from the critical point of phi.  S must
    # not be proportional to Hess(phi) or Q would commute after all.
    ch = catalog.graph3()
    dphi = ["2*u1", "4*u2", "6*u3"]
    w2 = "(1 + 4*u1^2 + 16*u2^2 + 36*u3^2)"
    S = [3.0, 1.0, 2.0]
    entries = tuple(
        tuple(
            f"{S[j]} - {S[j]}*{dphi[i]}*{dphi[j]}/{w2}"
            if i == j
            else f"-({S[j]}*{dphi[i]}*{dphi[j]}/{w2})"
            for j in range(3)
        )
        for i in range(3)
    )
    pts = grid_points(ch, 3)
    cj = chart_jets(ch, pts, 3)
    frame = frame_from_jets(cj)
    qj = q_jets(cj, Explicit(entries))  # self-adjointness check passes
    cf = codazzi.codazzi_frame_from_jets(qj, frame)
    gv = geometry._move(values(cj.gjet), 2)
    gQ = np.einsum("...ik,...kj->...ij", gv, cf.Q)
    assert np.abs(gQ - np.diag(S)).max() < 1e-12
    assert commutator_residual_field(frame, cf).max() > 1e-3


def test_curvature_needs_order_four():
    ch = catalog.torus2()
    cj, frame, qj, cf = setup_case(ch, [1.0, 1.2], Parallel(0.1), order=3)
    assert deformed_connection_residual_field(cj, frame, cf, qj).max() < 1e-9
    with pytest.raises(FrameError, match="order 4"):
        deformed_curvature_residual_field(cj, frame, cf, qj)


def test_explicit_entry_shape_checked():
    ch = catalog.plane2()
    cj = chart_jets(ch, [0.3, 0.4], 3)
    with pytest.raises(ValueError, match="entries"):
        q_jets(cj, Explicit((("1",),)))
