"""End-to-end CLI runs: exit-code contract, report output, JSON, mesh."""

import json
import subprocess
import sys

import pytest

GOOD = """
[chart]
catalog = sphere3
r = 2
[codazzi]
variant = parallel
t = 1
[run]
grid = 4
suites = geometry, deformation
"""

PLANE = """
[chart]
catalog = plane2
[codazzi]
variant = parallel
t = 0.5
[run]
suites = deformation
"""

TORUS = """
[chart]
catalog = torus2
[codazzi]
variant = parallel
t = 0.1
[run]
grid = 3
"""


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "isodeform.cli", *args],
        capture_output=True,
        text=True,
        timeout=300,
    )


@pytest.fixture()
def good_scene(tmp_path):
    p = tmp_path / "good.scene"
    p.write_text(GOOD)
    return str(p)


def test_verify_pass_exit_zero(good_scene):
    res = run_cli("verify", good_scene)
    assert res.returncode == 0, res.stderr
    assert res.stdout.startswith("report: isodeform\n")
    assert "result: pass" in res.stdout
    assert "check: metric" in res.stdout
    assert "sign: +1" in res.stdout


def test_verify_json_output(good_scene, tmp_path):
    out = tmp_path / "report.json"
    res = run_cli("verify", good_scene, "--json", str(out))
    assert res.returncode == 0
    blob = json.loads(out.read_text())
    assert blob["result"] == "pass"
    assert blob["chart"] == "sphere3"
    assert any(c["name"] == "wedge" for c in blob["checks"])


def test_report_determinism_modulo_wall_time(good_scene):
    def strip(text):
        return "\n".join(
            ln for ln in text.splitlines() if not ln.startswith("wall_time_s:")
        )

    a = run_cli("verify", good_scene)
    b = run_cli("verify", good_scene)
    assert strip(a.stdout) == strip(b.stdout)


def test_rank_gate_exit_three(tmp_path):
    p = tmp_path / "plane.scene"
    p.write_text(PLANE)
    res = run_cli("verify", str(p))
    assert res.returncode == 3
    assert "rank A >= 3 violated" in res.stderr


def test_parse_error_exit_four(tmp_path):
    p = tmp_path / "bad.scene"
    p.write_text("[chart]\ncatalog = sphere3\nr = two\n")
    res = run_cli("verify", str(p))
    assert res.returncode == 4
    assert "scene error" in res.stderr


def test_missing_file_exit_four():
    res = run_cli("verify", "/nonexistent/path.scene")
    assert res.returncode == 4


def test_verification_failure_exit_two(good_scene):
    res = run_cli("verify", good_scene, "--tol", "metric=1e-18")
    assert res.returncode == 2
    assert "result: FAIL" in res.stdout


def test_unknown_tolerance_exit_four(good_scene):
    res = run_cli("verify", good_scene, "--tol", "warp=1e-6")
    assert res.returncode == 4
    assert "unknown tolerance" in res.stderr


def test_point_mode(good_scene):
    res = run_cli("verify", good_scene, "--point", "0.6,0.7,0.8")
    assert res.returncode == 0, res.stderr
    assert "single-point rerun" in res.stdout
    bad = run_cli("verify", good_scene, "--point", "0.6,0.7")
    assert bad.returncode == 4
    outside = run_cli("verify", good_scene, "--point", "9,9,9")
    assert outside.returncode == 4


def test_grid_override(good_scene):
    res = run_cli("verify", good_scene, "--grid", "3")
    assert res.returncode == 0
    assert "grid: 3,3,3" in res.stdout
    bad = run_cli("verify", good_scene, "--grid", "2")
    assert bad.returncode == 4


def test_mesh_subcommand(tmp_path):
    p = tmp_path / "torus.scene"
    p.write_text(TORUS)
    out = tmp_path / "torus.obj"
    res = run_cli("mesh", str(p), "--out", str(out))
    assert res.returncode == 0, res.stderr
    assert "9 vertices" in res.stdout
    text = out.read_text()
    assert "o f" in text and "o F" in text

    res2 = run_cli("mesh", str(p), "--out", str(out), "--slice", "u1=99")
    assert res2.returncode == 4

    res3 = run_cli("mesh", str(p), "--out", str(out), "--project", "1,1,2")
    assert res3.returncode == 4


def test_help_lists_subcommands():
    res = run_cli("--help")
    assert res.returncode == 0
    for sub in ("verify", "mesh", "selftest"):
        assert sub in res.stdout
