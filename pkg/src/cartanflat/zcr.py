"""Zero-curvature representation of the sine-Gordon equation.

For any C^2 function u(x1, x2) on a 2-d chart, define the triple of
one-forms

    omega1 = cos(u/2) (dx1 + dx2)
    omega2 = sin(u/2) (dx1 - dx2)
    phi    = (d2 u dx2 - d1 u dx1) / 2

The first two structure equations hold identically in u,

    d omega1 = omega2 ^ phi        d omega2 = -omega1 ^ phi,

so when the triple is packed into the so(2,1)-valued matrix
A = m1 omega1 + m2 omega2 + m3 phi (same layout as the hyperbolic
connection matrix over a surface) the curvature collapses to a single
coefficient:

    dA + A ^ A = (d1 d2 u - sin u) dx1 ^ dx2  m3

That is, A is flat exactly when u solves the sine-Gordon equation
d1 d2 u = sin u.  Because m3 has unit entries, the coordinate-gauge
residual max|Omega(d_1, d_2)| equals |d1 d2 u - sin u| on the nose.
This gauge is deliberate: it stays meaningful where sin u = 0, where
the associated surface geometry breaks down.

The geometric side of the same computation: where sin u != 0 the metric

    [[1, cos u], [cos u, 1]]

is positive definite with orthonormal coframe (omega1, omega2) and
connection form phi, and its Gauss curvature is -d1 d2 u / sin u.  So
the metric has constant curvature -1 exactly on sine-Gordon solutions.
induced_metric builds that metric on a caller-supplied chart; the chart
must avoid the degenerate locus or construction fails with
SingularMetricError.

Residual scans default to a [-2, 2]^2 chart, which for the standard
kink preset crosses the degenerate line x1 + x2 = 0; only the
metric-free checks run there, which is the point of keeping them
metric-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from .cartan import ScalarOneForm, ScalarTwoForm, exterior_derivative, wedge
from .errors import DimensionError
from .exprlang import (
    Const,
    Expression,
    add,
    call,
    compile_expressions,
    differentiate,
    mul,
    neg,
    parse,
    simplify,
    sub,
    variables_of,
)
from .metricspace import Chart, ChartMetric
from .sasaki import MatrixOneForm, MatrixTwoForm, curvature_form, so21_basis

__all__ = [
    "DEFAULT_BOX",
    "default_chart",
    "SineGordonRep",
    "representation",
    "pseudospherical_triple",
    "zcr_form",
    "zcr_residual",
    "pde_residual",
    "structure_residual",
    "induced_metric",
    "EquivalenceReport",
    "equivalence_scan",
]

DEFAULT_BOX = ((-2.0, 2.0), (-2.0, 2.0))


def default_chart(names: tuple[str, str] = ("x1", "x2")) -> Chart:
    return Chart(names, DEFAULT_BOX)


def _as_field(u, chart: Chart) -> Expression:
    if isinstance(u, str):
        return parse(u, chart.names)
    extra = variables_of(u) - set(chart.names)
    if extra:
        raise ValueError(f"field uses undeclared variables: {sorted(extra)}")
    return u


@dataclass(frozen=True)
class SineGordonRep:
    """Everything derived from one scalar field u: the one-form triple,
    the so(2,1) matrix form, its curvature, and the PDE residual."""

    chart: Chart
    u: Expression

    def __post_init__(self):
        if self.chart.dim != 2:
            raise DimensionError("the sine-Gordon representation needs a 2-d chart")
        object.__setattr__(self, "u", _as_field(self.u, self.chart))

    @classmethod
    def from_text(cls, text: str, chart: Chart | None = None) -> "SineGordonRep":
        chart = default_chart() if chart is None else chart
        return cls(chart, parse(text, chart.names))

    @cached_property
    def triple(self) -> tuple[ScalarOneForm, ScalarOneForm, ScalarOneForm]:
        half = mul(Const(0.5), self.u)
        cos_half = call("cos", half)
        sin_half = call("sin", half)
        d1, d2 = (differentiate(self.u, name) for name in self.chart.names)
        omega1 = ScalarOneForm(self.chart, (cos_half, cos_half))
        omega2 = ScalarOneForm(self.chart, (sin_half, simplify(neg(sin_half))))
        phi = ScalarOneForm(
            self.chart,
            (simplify(mul(Const(-0.5), d1)), simplify(mul(Const(0.5), d2))),
        )
        return omega1, omega2, phi

    @cached_property
    def connection(self) -> MatrixOneForm:
        basis = so21_basis()
        omega1, omega2, phi = self.triple
        comps = []
        for k in range(2):
            coeffs = (omega1.comps[k], omega2.comps[k], phi.comps[k])
            mat = []
            for a in range(3):
                row = []
                for b in range(3):
                    total: Expression = Const(0.0)
                    for m in range(3):
                        weight = float(basis.matrices[m][a][b])
                        if weight != 0.0:
                            total = add(total, mul(Const(weight), coeffs[m]))
                    row.append(simplify(total))
                mat.append(tuple(row))
            comps.append(tuple(mat))
        return MatrixOneForm(self.chart, tuple(comps))

    @cached_property
    def curvature(self) -> MatrixTwoForm:
        return curvature_form(self.connection)

    @cached_property
    def structure_forms(self) -> tuple[ScalarTwoForm, ScalarTwoForm]:
        """d omega1 - omega2 ^ phi and d omega2 + omega1 ^ phi; both are
        identically zero whatever u is, so evaluating them only measures
        floating-point cancellation."""
        omega1, omega2, phi = self.triple
        first = exterior_derivative(omega1) - wedge(omega2, phi)
        second = exterior_derivative(omega2) + wedge(omega1, phi)
        return first, second

    @cached_property
    def _pde_fn(self):
        x1, x2 = self.chart.names
        mixed = differentiate(differentiate(self.u, x1), x2)
        return compile_expressions([sub(mixed, call("sin", self.u))], self.chart.names)

    def pde_residual(self, point: Sequence[float]) -> float:
        """d1 d2 u - sin u at the point, with sign."""
        point = self.chart.require(point)
        return float(self._pde_fn(point)[0])

    def zcr_residual(self, point: Sequence[float]) -> float:
        """max |(dA + A^A)(d_1, d_2)| at the point (coordinate gauge)."""
        return float(np.max(np.abs(self.curvature.at(point)[0, 1])))

    def structure_residual(self, point: Sequence[float]) -> float:
        first, second = self.structure_forms
        return max(
            float(np.max(np.abs(first.at(point)))),
            float(np.max(np.abs(second.at(point)))),
        )


@lru_cache(maxsize=32)
def _text_rep(text: str, chart: Chart) -> SineGordonRep:
    return SineGordonRep(chart, parse(text, chart.names))


def representation(u, chart: Chart | None = None) -> SineGordonRep:
    """SineGordonRep for u given as text or expression (text reps are cached)."""
    chart = default_chart() if chart is None else chart
    if isinstance(u, str):
        return _text_rep(u, chart)
    return SineGordonRep(chart, u)


def pseudospherical_triple(u, chart: Chart | None = None):
    return representation(u, chart).triple


def zcr_form(u, chart: Chart | None = None) -> MatrixOneForm:
    return representation(u, chart).connection


def zcr_residual(u, point: Sequence[float], chart: Chart | None = None) -> float:
    return representation(u, chart).zcr_residual(point)


def pde_residual(u, point: Sequence[float], chart: Chart | None = None) -> float:
    return representation(u, chart).pde_residual(point)


def structure_residual(u, point: Sequence[float], chart: Chart | None = None) -> float:
    return representation(u, chart).structure_residual(point)


def induced_metric(u, chart: Chart) -> ChartMetric:
    """The metric [[1, cos u], [cos u, 1]] on the given chart.  Raises
    SingularMetricError if the chart touches the locus sin u = 0."""
    field = _as_field(u, chart)
    cos_u = call("cos", field)
    return ChartMetric(chart, ((Const(1.0), cos_u), (cos_u, Const(1.0))))


_RATIO_FLOOR = 1e-9


@dataclass(frozen=True)
class EquivalenceReport:
    """Pointwise comparison of the connection-curvature residual against
    the PDE residual |d1 d2 u - sin u| over a grid."""

    resolution: int
    points: int
    max_zcr: float
    argmax_zcr: tuple
    max_pde: float
    argmax_pde: tuple
    correlation: float | None
    ratio_low: float | None
    ratio_high: float | None

    def as_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "points": self.points,
            "max_zcr": self.max_zcr,
            "argmax_zcr": list(self.argmax_zcr),
            "max_pde": self.max_pde,
            "argmax_pde": list(self.argmax_pde),
            "correlation": self.correlation,
            "ratio_low": self.ratio_low,
            "ratio_high": self.ratio_high,
        }


def equivalence_scan(u, chart: Chart | None = None, resolution: int = 21) -> EquivalenceReport:
    """Evaluate both residuals over an inner grid.

    The ratio bounds cover the points where the PDE residual exceeds
    1e-9 (on near-solutions there is nothing meaningful to divide by);
    the correlation is Pearson's, or None when either residual is flat
    across the grid."""
    rep = representation(u, chart)
    points = list(rep.chart.grid(resolution))
    zcr_values = np.array([rep.zcr_residual(p) for p in points])
    pde_values = np.array([abs(rep.pde_residual(p)) for p in points])
    i_zcr = int(np.argmax(zcr_values))
    i_pde = int(np.argmax(pde_values))
    correlation = None
    if np.std(zcr_values) > 1e-14 and np.std(pde_values) > 1e-14:
        correlation = float(np.corrcoef(zcr_values, pde_values)[0, 1])
    mask = pde_values > _RATIO_FLOOR
    ratio_low = ratio_high = None
    if mask.any():
        ratios = zcr_values[mask] / pde_values[mask]
        ratio_low = float(ratios.min())
        ratio_high = float(ratios.max())
    return EquivalenceReport(
        resolution=resolution,
        points=len(points),
        max_zcr=float(zcr_values[i_zcr]),
        argmax_zcr=points[i_zcr],
        max_pde=float(pde_values[i_pde]),
        argmax_pde=points[i_pde],
        correlation=correlation,
        ratio_low=ratio_low,
        ratio_high=ratio_high,
    )
