"""Sections of TM + (trivial line bundle) and the two covariant derivatives,
in coordinate components.

A section is xi + f e with xi a tangent field and e the distinguished unit
section.  The derivatives along a coordinate direction d_k are

    variant "h":  nabla_k (xi + f e) = (nabla^g_k xi + f d_k) + (d_k f + g(d_k, xi)) e
    variant "s":  nabla_k (xi + f e) = (nabla^g_k xi + f d_k) + (d_k f - g(d_k, xi)) e

where nabla^g is the Levi-Civita derivative.  Both preserve the fiber pairing

    <xi + f e, eta + k e> = g(xi, eta) -+ f k     ("h": minus, "s": plus).

Curvature here is computed by finite differences of the exact (symbolic)
first derivative: the inner nabla_j s is exact, the outer d_i is a central
difference with one Richardson extrapolation step.  This keeps the route
independent of the symbolic curvature machinery it is checked against,
which predicts

    R^bundle(d_i, d_j)(xi + f e) = (R - R_K)(d_i, d_j) xi,   K = -1 ("h") / +1 ("s")

with no e-component, where R_K(X, Y)Z = K (g(Y,Z) X - g(X,Z) Y).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .cartan import FrameField
from .errors import DimensionError, StepSizeError
from .exprlang import (
    Const,
    Expression,
    Var,
    add,
    compile_expressions,
    differentiate,
    mul,
    sub,
    variables_of,
)
from .metricspace import Chart, ChartMetric, constant_curvature_tensor
from .sasaki import connection_matrix, variant_sign

__all__ = [
    "BundleSection",
    "random_section",
    "covariant_derivative",
    "BundleCurvatureValue",
    "bundle_curvature",
    "reference_curvature_action",
    "IdentityResidual",
    "identity_residual",
    "bundle_pairing",
    "metric_compatibility_residual",
    "bundle_connection_matrix",
]


@dataclass(frozen=True)
class BundleSection:
    """xi + f e with xi in coordinate components: vector[a] is the d_a
    component, scalar is f."""

    chart: Chart
    vector: tuple
    scalar: Expression

    def __post_init__(self):
        object.__setattr__(self, "vector", tuple(self.vector))
        if len(self.vector) != self.chart.dim:
            raise DimensionError("one vector component per coordinate required")
        allowed = set(self.chart.names)
        for component in (*self.vector, self.scalar):
            stray = variables_of(component) - allowed
            if stray:
                raise ValueError(f"section uses undeclared variables: {sorted(stray)}")

    def at(self, point: Sequence[float]) -> np.ndarray:
        """Components (xi^1, .., xi^n, f) at a point."""
        point = self.chart.require(point)
        fn = getattr(self, "_fn", None)
        if fn is None:
            fn = compile_expressions((*self.vector, self.scalar), self.chart.names)
            object.__setattr__(self, "_fn", fn)
        return np.array(fn(point), dtype=float)


def _normalized_axis(chart: Chart, axis: int) -> Expression:
    lo, hi = chart.box[axis]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return mul(Const(1.0 / half), sub(Var(chart.names[axis]), Const(mid)))


def random_section(chart: Chart, rng: np.random.Generator) -> BundleSection:
    """A section with degree <= 2 polynomial components in the normalized
    chart coordinates, so the values stay O(1) on any box."""
    n = chart.dim
    axes = [_normalized_axis(chart, a) for a in range(n)]
    components = []
    for _ in range(n + 1):
        total: Expression = Const(float(rng.normal()) * 0.5)
        for a in range(n):
            total = add(total, mul(Const(float(rng.normal()) * 0.5), axes[a]))
        for a in range(n):
            for b in range(a, n):
                total = add(
                    total, mul(Const(float(rng.normal()) * 0.25), mul(axes[a], axes[b]))
                )
        components.append(total)
    return BundleSection(chart, tuple(components[:n]), components[n])


@functools.lru_cache(maxsize=512)
def covariant_derivative(
    variant: str, metric: ChartMetric, section: BundleSection, direction: int
) -> BundleSection:
    """The exact derivative of a section along the coordinate direction d_k,
    as a new section (see the module docstring for the two formulas)."""
    sign = variant_sign(variant)
    n = metric.dim
    if not 0 <= direction < n:
        raise DimensionError(f"direction must index a coordinate axis, got {direction}")
    name = metric.chart.names[direction]
    gamma = metric.christoffel_entries
    g = metric.entries
    new_vector = []
    for a in range(n):
        total = differentiate(section.vector[a], name)
        for c in range(n):
            total = add(total, mul(gamma[a][direction][c], section.vector[c]))
        if a == direction:
            total = add(total, section.scalar)
        new_vector.append(total)
    new_scalar = differentiate(section.scalar, name)
    for c in range(n):
        new_scalar = add(new_scalar, mul(Const(sign), mul(g[direction][c], section.vector[c])))
    return BundleSection(metric.chart, tuple(new_vector), new_scalar)


_MIN_RELATIVE_STEP = 1e-8


def _partial_by_differences(
    values_at: Callable[[Sequence[float]], np.ndarray],
    chart: Chart,
    point: tuple,
    axis: int,
    step: float | None,
) -> np.ndarray:
    """Central difference with one Richardson step for d_axis of a compiled
    section, error O(h^4)."""
    lo, hi = chart.box[axis]
    extent = hi - lo
    h = 1e-4 * extent if step is None else float(step)
    if h < _MIN_RELATIVE_STEP * extent:
        raise StepSizeError(
            f"step {h:.3e} is below {_MIN_RELATIVE_STEP:g} of the axis extent {extent:.3e}"
        )
    offsets = (h, -h, 0.5 * h, -0.5 * h)
    shifted = []
    for offset in offsets:
        q = list(point)
        q[axis] += offset
        if not chart.contains(q):
            raise StepSizeError(
                f"difference stencil leaves the chart at {tuple(q)}; "
                "move the point inward or pass a smaller step"
            )
        shifted.append(tuple(q))
    wide = (values_at(shifted[0]) - values_at(shifted[1])) / (2.0 * h)
    narrow = (values_at(shifted[2]) - values_at(shifted[3])) / h
    return (4.0 * narrow - wide) / 3.0


def _outer_derivative(
    variant: str,
    metric: ChartMetric,
    section: BundleSection,
    direction: int,
    point: tuple,
    step: float | None,
) -> np.ndarray:
    """nabla_direction of a section at a point, with the d-part taken by
    finite differences and the connection terms exact."""
    n = metric.dim
    deriv = _partial_by_differences(section.at, metric.chart, point, direction, step)
    values = section.at(point)
    gamma = metric.christoffel(point)
    g = metric.metric_at(point)
    out = np.empty(n + 1)
    out[:n] = deriv[:n] + gamma[:, direction, :] @ values[:n]
    out[direction] += values[n]
    out[n] = deriv[n] + variant_sign(variant) * float(g[direction] @ values[:n])
    return out


@dataclass(frozen=True)
class BundleCurvatureValue:
    """R(d_i, d_j) applied to a section at a point: a tangent part (in
    coordinate components) and the coefficient of e."""

    vector: np.ndarray
    e_component: float


def bundle_curvature(
    variant: str,
    metric: ChartMetric,
    section: BundleSection,
    i: int,
    j: int,
    point: Sequence[float],
    step: float | None = None,
) -> BundleCurvatureValue:
    """R(d_i, d_j) s = nabla_i (nabla_j s) - nabla_j (nabla_i s) at a point,
    outer derivatives by finite differences of the exact inner ones."""
    point = metric.chart.require(point)
    inner_j = covariant_derivative(variant, metric, section, j)
    inner_i = covariant_derivative(variant, metric, section, i)
    forward = _outer_derivative(variant, metric, inner_j, i, point, step)
    backward = _outer_derivative(variant, metric, inner_i, j, point, step)
    difference = forward - backward
    n = metric.dim
    return BundleCurvatureValue(vector=difference[:n], e_component=float(difference[n]))


def reference_curvature_action(
    variant: str, metric: ChartMetric, xi: np.ndarray, i: int, j: int, point: Sequence[float]
) -> np.ndarray:
    """(R - R_K)(d_i, d_j) xi from the Riemann tensor, the symbolic route the
    finite-difference curvature is compared against."""
    point = metric.chart.require(point)
    n = metric.dim
    riemann = metric.riemann(point)
    tangent = riemann[:, :, i, j] @ np.asarray(xi, dtype=float)
    shift = constant_curvature_tensor(
        metric, -variant_sign(variant), np.eye(n)[i], np.eye(n)[j], xi, point
    )
    return tangent - shift


@functools.lru_cache(maxsize=128)
def _seeded_sections(chart: Chart, count: int, seed: int) -> tuple:
    rng = np.random.default_rng([2208, seed, count, chart.dim])
    return tuple(random_section(chart, rng) for _ in range(count))


@dataclass(frozen=True)
class IdentityResidual:
    """Worst deviation of the finite-difference curvature from (R - R_K) xi
    over the sampled sections and all coordinate pairs."""

    vector: float
    e_component: float

    @property
    def worst(self) -> float:
        return max(self.vector, self.e_component)

    def as_dict(self) -> dict:
        return {"vector": self.vector, "e_component": self.e_component}


def identity_residual(
    variant: str,
    metric: ChartMetric,
    point: Sequence[float],
    trials: int = 10,
    seed: int = 0,
) -> IdentityResidual:
    point = metric.chart.require(point)
    n = metric.dim
    worst_vector = 0.0
    worst_e = 0.0
    for section in _seeded_sections(metric.chart, trials, seed):
        xi = section.at(point)[:n]
        for i in range(n):
            for j in range(i + 1, n):
                measured = bundle_curvature(variant, metric, section, i, j, point)
                expected = reference_curvature_action(variant, metric, xi, i, j, point)
                worst_vector = max(worst_vector, float(np.max(np.abs(measured.vector - expected))))
                worst_e = max(worst_e, abs(measured.e_component))
    return IdentityResidual(worst_vector, worst_e)


def _pairing_expression(
    variant: str, metric: ChartMetric, s: BundleSection, t: BundleSection
) -> Expression:
    sign = variant_sign(variant)
    n = metric.dim
    total: Expression = Const(0.0)
    for a in range(n):
        for b in range(n):
            total = add(total, mul(mul(metric.entries[a][b], s.vector[a]), t.vector[b]))
    fiber = mul(s.scalar, t.scalar)
    return sub(total, fiber) if sign > 0 else add(total, fiber)


def bundle_pairing(
    variant: str,
    metric: ChartMetric,
    s_value: np.ndarray,
    t_value: np.ndarray,
    point: Sequence[float],
) -> float:
    """<s, t> at a point from component values (xi^1..xi^n, f)."""
    n = metric.dim
    g = metric.metric_at(point)
    s_value = np.asarray(s_value, dtype=float)
    t_value = np.asarray(t_value, dtype=float)
    tangent = float(s_value[:n] @ g @ t_value[:n])
    fiber = float(s_value[n] * t_value[n])
    return tangent - fiber if variant_sign(variant) > 0 else tangent + fiber


@functools.lru_cache(maxsize=128)
def _compatibility_fn(variant: str, metric: ChartMetric, trials: int, seed: int):
    """Compiled residuals d_k <s,t> - <nabla_k s, t> - <s, nabla_k t> for
    seeded section pairs, one expression per (trial, direction)."""
    n = metric.dim
    sections = _seeded_sections(metric.chart, 2 * trials, seed)
    residuals = []
    for m in range(trials):
        s, t = sections[2 * m], sections[2 * m + 1]
        pairing = _pairing_expression(variant, metric, s, t)
        for k in range(n):
            lhs = differentiate(pairing, metric.chart.names[k])
            ds = covariant_derivative(variant, metric, s, k)
            dt = covariant_derivative(variant, metric, t, k)
            rhs = add(
                _pairing_expression(variant, metric, ds, t),
                _pairing_expression(variant, metric, s, dt),
            )
            residuals.append(sub(lhs, rhs))
    return compile_expressions(residuals, metric.chart.names)


def metric_compatibility_residual(
    variant: str,
    metric: ChartMetric,
    point: Sequence[float],
    trials: int = 10,
    seed: int = 0,
) -> float:
    """Max violation of d_k <s,t> = <nabla_k s, t> + <s, nabla_k t> at a point
    over seeded section pairs and all directions.  Exact symbolic on both
    sides, so this should sit at rounding level."""
    point = metric.chart.require(point)
    fn = _compatibility_fn(variant, metric, trials, seed)
    return float(np.max(np.abs(fn(point))))


def bundle_connection_matrix(variant: str, frame: FrameField, point: Sequence[float] | None = None):
    """The frame-gauge connection matrix (see sasaki.connection_matrix);
    with a point, its stack of coefficient matrices there, shape
    (dim, n+1, n+1)."""
    matrix_form = connection_matrix(frame, variant)
    if point is None:
        return matrix_form
    return matrix_form.at(point)
