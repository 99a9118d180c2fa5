"""Parallel transport, holonomy, and developing maps.

Transport integrates v' = -M(t) v along a chart curve with classical RK4 at
a fixed number of steps per parameter unit, where M is the action of the
chosen connection on component columns:

    "lc"      Levi-Civita on TM:        M[a][c] = Gamma^a_{kc} cdot^k
    "h", "s"  the bundle connections:   TM block as above, plus
              M[a][n] = cdot^a,  M[n][c] = +-(g cdot)_c,  M[n][n] = 0.

The developing map runs the inverse transport U' = +U M from the start of a
path and pushes the distinguished section through it: Phi = B U e_hat, with
B = blockdiag(coframe(base), 1) normalizing the base fiber so the pairing
becomes exactly diag(1,..,1,-1) ("h") or the Euclidean dot ("s").  Where the
chosen connection is flat, Phi lands on the quadric <v,v> = -1 (hyperboloid
upper sheet) or <v,v> = +1 (sphere) and is independent of the path; the
quadric residual and path_dependence() quantify both claims numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .cartan import FrameField, orthonormal_frame
from .errors import DimensionError, NonClosedLoopError
from .exprlang import (
    Const,
    Var,
    add,
    call,
    compile_expressions,
    differentiate,
    mul,
    variables_of,
)
from .metricspace import Chart, ChartMetric
from .sasaki import variant_sign

__all__ = [
    "ChartCurve",
    "line_curve",
    "circle_curve",
    "CONNECTIONS",
    "transport_matrix",
    "transport_trace",
    "parallel_transport",
    "holonomy",
    "DevelopedPath",
    "develop",
    "develop_cloud",
    "path_dependence",
    "quadric_pairing",
    "quadric_residual_of",
]

CONNECTIONS = ("h", "s", "lc")

_PARAM = "t"


@dataclass(frozen=True)
class ChartCurve:
    """A smooth curve given by expressions in the parameter t."""

    chart: Chart
    comps: tuple
    t0: float = 0.0
    t1: float = 1.0
    steps_per_unit: int = 256

    def __post_init__(self):
        object.__setattr__(self, "comps", tuple(self.comps))
        if len(self.comps) != self.chart.dim:
            raise DimensionError("one curve component per coordinate required")
        for component in self.comps:
            stray = variables_of(component) - {_PARAM}
            if stray:
                raise ValueError(f"curve components may only use 't', got {sorted(stray)}")
        if not self.t1 > self.t0:
            raise ValueError("curve needs t1 > t0")
        if self.steps_per_unit < 1:
            raise ValueError("steps_per_unit must be positive")

    @cached_property
    def _fn(self):
        velocity = tuple(differentiate(c, _PARAM) for c in self.comps)
        return compile_expressions((*self.comps, *velocity), (_PARAM,))

    def point_at(self, t: float) -> tuple:
        values = self._fn((float(t),))
        return self.chart.require(values[: self.chart.dim])

    def velocity_at(self, t: float) -> np.ndarray:
        values = self._fn((float(t),))
        return np.array(values[self.chart.dim :], dtype=float)

    @property
    def steps(self) -> int:
        return max(1, math.ceil(self.steps_per_unit * (self.t1 - self.t0)))


def line_curve(chart: Chart, start, end, steps_per_unit: int = 256) -> ChartCurve:
    """The straight chart segment from start to end, t in [0, 1]."""
    start = chart.require(start)
    end = chart.require(end)
    comps = tuple(
        add(Const(a), mul(Const(b - a), Var(_PARAM))) for a, b in zip(start, end)
    )
    return ChartCurve(chart, comps, 0.0, 1.0, steps_per_unit)


def circle_curve(chart: Chart, center, radius: float, steps_per_unit: int = 256) -> ChartCurve:
    """The counterclockwise chart circle of given center and radius, t in [0, 1]."""
    if chart.dim != 2:
        raise DimensionError("circle_curve is 2D-only")
    cx, cy = (float(v) for v in center)
    r = float(radius)
    if r <= 0:
        raise ValueError("radius must be positive")
    angle = mul(Const(2.0 * math.pi), Var(_PARAM))
    comps = (
        add(Const(cx), mul(Const(r), call("cos", angle))),
        add(Const(cy), mul(Const(r), call("sin", angle))),
    )
    return ChartCurve(chart, comps, 0.0, 1.0, steps_per_unit)


def _action_matrix(
    connection: str, metric: ChartMetric, point, velocity: np.ndarray
) -> np.ndarray:
    n = metric.dim
    gamma = metric.christoffel(point)
    tangent_block = np.tensordot(velocity, gamma, axes=(0, 1))
    if connection == "lc":
        return tangent_block
    sign = variant_sign(connection)
    out = np.zeros((n + 1, n + 1))
    out[:n, :n] = tangent_block
    out[:n, n] = velocity
    out[n, :n] = sign * (metric.metric_at(point) @ velocity)
    return out


def _fiber_size(connection: str, dim: int) -> int:
    if connection == "lc":
        return dim
    variant_sign(connection)
    return dim + 1


def _rk4_transport(
    connection: str,
    metric: ChartMetric,
    curve: ChartCurve,
    initial: np.ndarray,
    forward: bool,
    record: list | None = None,
) -> np.ndarray:
    """Integrate Y' = -M(t) Y (forward=True, transport) or Y' = +Y M(t)
    (forward=False, inverse transport used by the developing map)."""

    def slope(t: float, y: np.ndarray) -> np.ndarray:
        m = _action_matrix(connection, metric, curve.point_at(t), curve.velocity_at(t))
        return -(m @ y) if forward else y @ m

    steps = curve.steps
    h = (curve.t1 - curve.t0) / steps
    y = np.array(initial, dtype=float)
    if record is not None:
        record.append(y.copy())
    for k in range(steps):
        t = curve.t0 + k * h
        k1 = slope(t, y)
        k2 = slope(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = slope(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = slope(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if record is not None:
            record.append(y.copy())
    return y


def transport_matrix(connection: str, metric: ChartMetric, curve: ChartCurve) -> np.ndarray:
    """Columns are the transported fiber basis vectors, in coordinate
    components at the curve end (the tangent block) plus the e coefficient."""
    size = _fiber_size(connection, metric.dim)
    return _rk4_transport(connection, metric, curve, np.eye(size), forward=True)


def transport_trace(
    connection: str, metric: ChartMetric, curve: ChartCurve
) -> tuple[np.ndarray, np.ndarray]:
    """Node times and the running transport matrix at every integration
    node, shapes (steps+1,) and (steps+1, size, size)."""
    size = _fiber_size(connection, metric.dim)
    record: list = []
    _rk4_transport(connection, metric, curve, np.eye(size), forward=True, record=record)
    times = np.linspace(curve.t0, curve.t1, curve.steps + 1)
    return times, np.array(record)


def parallel_transport(
    connection: str, metric: ChartMetric, curve: ChartCurve, initial: Sequence[float]
) -> np.ndarray:
    size = _fiber_size(connection, metric.dim)
    vector = np.asarray(initial, dtype=float)
    if vector.shape != (size,):
        raise DimensionError(f"initial vector must have {size} components for {connection!r}")
    return _rk4_transport(connection, metric, curve, vector, forward=True)


def holonomy(
    connection: str,
    metric: ChartMetric,
    curve: ChartCurve,
    closure_tol: float = 1e-12,
) -> np.ndarray:
    """transport_matrix for a loop.  The curve must return to its start in
    chart coordinates; a latitude-style path whose endpoints are identified
    by the geometry but differ in the chart should go through
    transport_matrix directly."""
    start = np.array(curve.point_at(curve.t0))
    end = np.array(curve.point_at(curve.t1))
    gap = float(np.max(np.abs(end - start)))
    if gap > closure_tol:
        raise NonClosedLoopError(
            f"curve endpoints differ by {gap:.3e} in chart coordinates (tol {closure_tol:g})"
        )
    return transport_matrix(connection, metric, curve)


def quadric_pairing(variant: str, u: Sequence[float], v: Sequence[float]) -> float:
    """The ambient pairing on developed vectors: Minkowski (last component
    negative) for "h", Euclidean for "s"."""
    sign = variant_sign(variant)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    tangent = float(u[:-1] @ v[:-1])
    fiber = float(u[-1] * v[-1])
    return tangent - fiber if sign > 0 else tangent + fiber


def quadric_residual_of(variant: str, points: np.ndarray) -> float:
    """Max deviation of <v, v> from -1 ("h") or +1 ("s") over the rows."""
    target = -1.0 if variant_sign(variant) > 0 else 1.0
    worst = 0.0
    for row in np.atleast_2d(np.asarray(points, dtype=float)):
        worst = max(worst, abs(quadric_pairing(variant, row, row) - target))
    return worst


@dataclass(frozen=True)
class DevelopedPath:
    """The developing-map image of a path, one row per integration node."""

    variant: str
    points: np.ndarray

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    @property
    def quadric_residual(self) -> float:
        return quadric_residual_of(self.variant, self.points)


def _as_segments(path) -> tuple:
    segments = (path,) if isinstance(path, ChartCurve) else tuple(path)
    if not segments:
        raise ValueError("develop needs at least one curve segment")
    for previous, current in zip(segments, segments[1:]):
        gap = np.max(
            np.abs(
                np.array(previous.point_at(previous.t1))
                - np.array(current.point_at(current.t0))
            )
        )
        if gap > 1e-9:
            raise ValueError(f"path segments do not join (gap {gap:.3e})")
    return segments


def develop(
    variant: str,
    metric: ChartMetric,
    path,
    frame: FrameField | None = None,
) -> DevelopedPath:
    """Develop a path (a ChartCurve or a joined sequence of them) into the
    ambient space of the quadric, starting at (0,..,0,1) for the path start."""
    sign = variant_sign(variant)
    del sign  # validation only
    segments = _as_segments(path)
    if frame is None:
        frame = orthonormal_frame(metric)
    n = metric.dim
    base = segments[0].point_at(segments[0].t0)
    normalizer = np.eye(n + 1)
    normalizer[:n, :n] = frame.coframe_at(base)
    rows: list[np.ndarray] = []
    u = np.eye(n + 1)
    for index, segment in enumerate(segments):
        record: list = []
        u = _rk4_transport(variant, metric, segment, u, forward=False, record=record)
        if index > 0:
            record = record[1:]  # the join node is already recorded
        rows.extend(normalizer @ step[:, n] for step in record)
    return DevelopedPath(variant, np.array(rows))


def develop_cloud(
    variant: str,
    metric: ChartMetric,
    base: Sequence[float],
    targets: Sequence[Sequence[float]],
    frame: FrameField | None = None,
    steps_per_unit: int = 256,
) -> np.ndarray:
    """Developed images of many chart points, each reached from the base
    along the straight chart segment; one row per target."""
    if frame is None:
        frame = orthonormal_frame(metric)
    base = metric.chart.require(base)
    rows = []
    for target in targets:
        segment = line_curve(metric.chart, base, target, steps_per_unit)
        rows.append(develop(variant, metric, segment, frame=frame).end)
    return np.array(rows)


def path_dependence(
    variant: str,
    metric: ChartMetric,
    base: Sequence[float],
    target: Sequence[float],
    via: Sequence[float],
    frame: FrameField | None = None,
) -> float:
    """Max-abs gap between developing straight to the target and via a
    waypoint.  Near zero exactly when the variant's connection is flat."""
    if frame is None:
        frame = orthonormal_frame(metric)
    chart = metric.chart
    direct = develop(variant, metric, line_curve(chart, base, target), frame=frame)
    detour = develop(
        variant,
        metric,
        (line_curve(chart, base, via), line_curve(chart, via, target)),
        frame=frame,
    )
    return float(np.max(np.abs(direct.end - detour.end)))
