"""Built-in example charts.

Each builder returns a validated ``Chart``. Domains are closed boxes chosen
so the immersion is embedded and the coordinate frame is nondegenerate on
the whole box. The unit normal produced by the generalized cross product of
the coordinate tangents points *outward* for every curved catalog surface
(checked numerically in the test suite):

================  ==========================  ============================
name              shape                       normal / shape operator
================  ==========================  ============================
plane2            flat plane in R^3           A = 0
torus2(R, r)      torus of revolution in R^3  outward from the tube
sphere3(r)        round 3-sphere in R^4       outward, A = -(1/r) Id
ellipsoid3        ellipsoid in R^4            outward
graph3(phi)       Monge graph in R^4          below the graph, A = -Hess(phi)
                                              at critical points of phi
sphcyl4(r)        sphere3(r) x line in R^5    radial, A = diag(-1/r,..,0)
================  ==========================  ============================

``plane2`` and ``sphcyl4`` are degenerate on purpose: the plane has rank-0
shape operator and the cylinder has a one dimensional kernel (the axis
direction), which the rank gate and kernel checks exercise.
"""

from __future__ import annotations

from typing import Callable, Dict, Sequence, Tuple

from .geometry import Chart, make_chart

Interval = Tuple[float, float]


def plane2() -> Chart:
    # contains the unit square used by the loop-integral control
    return make_chart(
        ["u1", "u2", "0"],
        [(-0.25, 1.25), (-0.25, 1.25)],
        label="plane2",
    )


def torus2(R: float = 2.0, r: float = 0.5) -> Chart:
    if not (R > r > 0.0):
        raise ValueError(f"torus2 needs R > r > 0, got R={R}, r={r}")
    tube = f"({R!r} + {r!r}*cos(u2))"
    return make_chart(
        [f"{tube}*cos(u1)", f"{tube}*sin(u1)", f"{r!r}*sin(u2)"],
        [(0.2, 6.0), (0.2, 6.0)],
        label="torus2",
    )


def _polar_sphere(r: float) -> Sequence[str]:
    # iterated polar coordinates on S^3; index-order cross normal is outward
    return [
        f"{r!r}*cos(u1)",
        f"{r!r}*sin(u1)*cos(u2)",
        f"{r!r}*sin(u1)*sin(u2)*cos(u3)",
        f"{r!r}*sin(u1)*sin(u2)*sin(u3)",
    ]


def sphere3(r: float = 2.0) -> Chart:
    if r <= 0.0:
        raise ValueError(f"sphere3 needs r > 0, got {r}")
    return make_chart(_polar_sphere(r), [(0.4, 1.1)] * 3, label="sphere3")


def ellipsoid3(
    a: float = 1.0, b: float = 1.2, c: float = 0.9, d: float = 1.1
) -> Chart:
    for name, val in (("a", a), ("b", b), ("c", c), ("d", d)):
        if val <= 0.0:
            raise ValueError(f"ellipsoid3 needs {name} > 0, got {val}")
    comps = [
        f"{a!r}*cos(u1)",
        f"{b!r}*sin(u1)*cos(u2)",
        f"{c!r}*sin(u1)*sin(u2)*cos(u3)",
        f"{d!r}*sin(u1)*sin(u2)*sin(u3)",
    ]
    return make_chart(comps, [(0.4, 1.1)] * 3, label="ellipsoid3")


DEFAULT_GRAPH_PHI = "u1^2 + 2*u2^2 + 3*u3^2"


def graph3(phi: str = DEFAULT_GRAPH_PHI) -> Chart:
    return make_chart(
        ["u1", "u2", "u3", phi],
        [(-0.5, 0.5)] * 3,
        label="graph3",
    )


def sphcyl4(r: float = 1.0) -> Chart:
    if r <= 0.0:
        raise ValueError(f"sphcyl4 needs r > 0, got {r}")
    comps = list(_polar_sphere(r)) + ["u4"]
    return make_chart(
        comps, [(0.4, 1.1)] * 3 + [(-0.5, 0.5)], label="sphcyl4"
    )


CATALOG: Dict[str, Callable[..., Chart]] = {
    "plane2": plane2,
    "torus2": torus2,
    "sphere3": sphere3,
    "ellipsoid3": ellipsoid3,
    "graph3": graph3,
    "sphcyl4": sphcyl4,
}


def build(name: str, **params: object) -> Chart:
    """Look up a catalog chart by name and build it with keyword params."""
    try:
        builder = CATALOG[name]
    except KeyError:
        known = ", ".join(sorted(CATALOG))
        raise KeyError(f"unknown catalog chart {name!r} (known: {known})")
    return builder(**params)
