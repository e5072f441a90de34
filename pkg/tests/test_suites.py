"""Suite orchestration: reports, determinism, rank gate, skip logic."""

import numpy as np
import pytest

from isodeform.errors import HypothesisError, SceneError
from isodeform.report import FAIL, PASS, SKIP
from isodeform.scene import parse_scene
from isodeform.suites import DEFAULT_TOL, resolve_tolerances, run_suites

SPHERE = """
[chart]
catalog = sphere3
r = 2
[codazzi]
variant = parallel
t = 1
[run]
grid = 4
"""


@pytest.fixture(scope="module")
def sphere_report():
    return run_suites(parse_scene(SPHERE))


def test_full_pass_report(sphere_report):
    rep = sphere_report
    assert not rep.failed
    assert rep.sign == 1
    assert rep.rank_min == 3 and rep.rank_max == 3
    assert rep.suites == ("geometry", "codazzi", "deformation", "roundtrip")
    names = [c.name for c in rep.checks]
    # every suite contributed
    for expected in ("gauss", "commutator", "metric", "roundtrip_gauge"):
        assert expected in names
    assert all(c.verdict == PASS for c in rep.checks)
    assert rep.wall_time > 0


def test_report_text_is_stable_modulo_wall_time(sphere_report):
    rep2 = run_suites(parse_scene(SPHERE))

    def strip(text):
        return "\n".join(
            ln for ln in text.splitlines() if not ln.startswith("wall_time_s:")
        )

    assert strip(sphere_report.to_text()) == strip(rep2.to_text())


def test_json_dict_roundtrips_through_json(sphere_report):
    import json

    blob = json.dumps(sphere_report.to_json_dict(), sort_keys=True)
    back = json.loads(blob)
    assert back["result"] == "pass"
    assert len(back["checks"]) == len(sphere_report.checks)


def test_single_point_mode_skips_grid_checks():
    rep = run_suites(parse_scene(SPHERE), point=(0.6, 0.7, 0.8))
    assert not rep.failed
    assert any("single-point rerun" in w for w in rep.warnings)
    skipped = {c.name for c in rep.checks if c.verdict == SKIP}
    assert {"loop", "path_vs_closed", "path_order_swap"} <= skipped


def test_single_point_outside_domain():
    with pytest.raises(SceneError) as exc:
        run_suites(parse_scene(SPHERE), point=(9.0, 9.0, 9.0))
    assert "outside the chart domain" in str(exc.value)


def test_single_point_wrong_arity():
    with pytest.raises(SceneError):
        run_suites(parse_scene(SPHERE), point=(0.5, 0.5))


def test_rank_gate_refuses_flat_plane():
    scene = parse_scene(
        "[chart]\ncatalog = plane2\n[codazzi]\nvariant = parallel\nt = 0.5\n"
        "[run]\ngrid = 4\nsuites = deformation\n"
    )
    with pytest.raises(HypothesisError) as exc:
        run_suites(scene)
    msg = str(exc.value)
    assert "rank A >= 3 violated" in msg
    assert "certified rank 0" in msg


def test_low_dimension_full_rank_warns_but_runs():
    scene = parse_scene(
        "[chart]\ncatalog = torus2\n[codazzi]\nvariant = parallel\nt = 0.1\n"
        "[run]\ngrid = 4\nsuites = deformation\n"
    )
    rep = run_suites(scene)
    assert not rep.failed
    assert any("n=2 chart" in w for w in rep.warnings)
    assert rep.rank_min == 2


def test_geometry_order2_skips_curvature_checks():
    scene = parse_scene(
        "[chart]\ncatalog = sphere3\nr = 2\n[run]\ngrid = 3\norder = 2\n"
        "suites = geometry\n"
    )
    rep = run_suites(scene)
    skipped = {c.name for c in rep.checks if c.verdict == SKIP}
    assert {"gauss", "codazzi_A", "bianchi1"} <= skipped
    assert rep.find("weingarten").verdict == PASS


def test_tolerance_override_changes_verdict():
    scene = parse_scene(
        SPHERE.replace("[run]", "[run]\ntol_metric = 1e-18")
    )
    rep = run_suites(scene)
    assert rep.find("metric").verdict == FAIL
    assert rep.failed


def test_resolve_tolerances_rejects_unknown():
    with pytest.raises(SceneError) as exc:
        resolve_tolerances({"warp": 1e-6})
    assert "unknown tolerance: warp" in str(exc.value)
    merged = resolve_tolerances({"metric": 1e-3})
    assert merged["metric"] == 1e-3
    assert merged["loop"] == DEFAULT_TOL["loop"]


def test_noncommuting_explicit_fails_and_skips_roundtrip():
    scene = parse_scene(
        """
[chart]
catalog = graph3
[codazzi]
variant = explicit
q11 = 3.0 - (2*u1)*(2*u1)*3.0/(1 + 4*u1^2 + 16*u2^2 + 36*u3^2)
q12 = 0 - (2*u1)*(4*u2)*1.0/(1 + 4*u1^2 + 16*u2^2 + 36*u3^2)
q13 = 0 - (2*u1)*(6*u3)*2.0/(1 + 4*u1^2 + 16*u2^2 + 36*u3^2)
q21 = 0 - (4*u2)*(2*u1)*3.0/(1 + 4*u1^2 + 16*u2^2 + 36*u3^2)
q22 = 1.0 - (4*u2)*(4*u2)*1.0/(1 + 4*u1^2 + 16*u2^2 + 36*u3^2)
q23 = 0 - (4*u2)*(6*u3)*2.0/(1 + 4*u1^2 + 16*u2^2 + 36*u3^2)
q31 = 0 - (6*u3)*(2*u1)*3.0/(1 + 4*u1^2 + 16*u2^2 + 36*u3^2)
q32 = 0 - (6*u3)*(4*u2)*1.0/(1 + 4*u1^2 + 16*u2^2 + 36*u3^2)
q33 = 2.0 - (6*u3)*(6*u3)*2.0/(1 + 4*u1^2 + 16*u2^2 + 36*u3^2)
[run]
grid = 3
"""
    )
    rep = run_suites(scene)
    assert rep.find("commutator").max_residual > 1e-3
    assert rep.find("fd_metric").max_residual > 1e-3
    assert {c.name for c in rep.failed} >= {"commutator", "fd_metric"}
    # explicit operators carry no scalar pair, so roundtrip is skipped
    assert rep.find("roundtrip_gauge").verdict == SKIP


def test_worst_point_is_reproducible(sphere_report):
    # rerunning at the reported worst point reproduces the residual scale
    chk = sphere_report.find("metric")
    rep = run_suites(parse_scene(SPHERE), point=chk.worst_point)
    again = rep.find("metric")
    assert again.max_residual <= 10 * max(chk.max_residual, 1e-15)
