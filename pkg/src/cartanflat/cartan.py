"""Moving orthonormal frames, scalar differential forms, and the 2D structure
equations.

Conventions, fixed once and used everywhere downstream:

    frame matrix      E[a][j] = component of e_j along d_a   (columns = frame)
    coframe matrix    Theta[i][k] = dx^k-coefficient of omega^i,  Theta = E^-1
    connection forms  omega_i^j(X) = g(nabla_X e_i, e_j)
    phi := omega_2^1  with  d omega^1 = omega^2 ^ phi,
                            d omega^2 = -omega^1 ^ phi,
                            d phi     = K omega^1 ^ omega^2.

Gram-Schmidt runs in coordinate-index order, which fixes the frame gauge
deterministically (E is upper triangular).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DimensionError, SingularMetricError
from .exprlang import (
    Const,
    Expression,
    add,
    call,
    compile_expressions,
    differentiate,
    div,
    mul,
    neg,
    sub,
)
from .metricspace import Chart, ChartMetric, symbolic_inverse

__all__ = [
    "ScalarOneForm",
    "ScalarTwoForm",
    "exterior_derivative",
    "wedge",
    "FrameField",
    "ConnectionForms",
    "orthonormal_frame",
    "connection_form",
    "structural_residual",
    "gauss_curvature",
]


@dataclass(frozen=True)
class ScalarOneForm:
    """A 1-form sum_k comps[k] dx^k."""

    chart: Chart
    comps: tuple[Expression, ...]

    def __post_init__(self):
        object.__setattr__(self, "comps", tuple(self.comps))
        if len(self.comps) != self.chart.dim:
            raise DimensionError("one component per coordinate required")

    def at(self, point: Sequence[float]) -> np.ndarray:
        point = self.chart.require(point)
        fn = getattr(self, "_fn", None)
        if fn is None:
            fn = compile_expressions(self.comps, self.chart.names)
            object.__setattr__(self, "_fn", fn)
        return np.array(fn(point), dtype=float)

    def __add__(self, other: "ScalarOneForm") -> "ScalarOneForm":
        return ScalarOneForm(self.chart, tuple(add(a, b) for a, b in zip(self.comps, other.comps)))

    def __sub__(self, other: "ScalarOneForm") -> "ScalarOneForm":
        return ScalarOneForm(self.chart, tuple(sub(a, b) for a, b in zip(self.comps, other.comps)))

    def __neg__(self) -> "ScalarOneForm":
        return ScalarOneForm(self.chart, tuple(neg(a) for a in self.comps))

    def scaled(self, factor) -> "ScalarOneForm":
        return ScalarOneForm(self.chart, tuple(mul(factor, a) for a in self.comps))


@dataclass(frozen=True)
class ScalarTwoForm:
    """A 2-form with exactly antisymmetric coefficient matrix:
    value on (d_i, d_j) is comps[i][j]."""

    chart: Chart
    comps: tuple[tuple[Expression, ...], ...]

    @staticmethod
    def from_upper(chart: Chart, upper: dict[tuple[int, int], Expression]) -> "ScalarTwoForm":
        n = chart.dim
        table = [[Const(0.0)] * n for _ in range(n)]
        for (i, j), entry in upper.items():
            table[i][j] = entry
            table[j][i] = neg(entry)
        return ScalarTwoForm(chart, tuple(tuple(row) for row in table))

    def at(self, point: Sequence[float]) -> np.ndarray:
        point = self.chart.require(point)
        n = self.chart.dim
        fn = getattr(self, "_fn", None)
        if fn is None:
            flat = [self.comps[i][j] for i in range(n) for j in range(n)]
            fn = compile_expressions(flat, self.chart.names)
            object.__setattr__(self, "_fn", fn)
        return np.array(fn(point), dtype=float).reshape(n, n)

    def __add__(self, other: "ScalarTwoForm") -> "ScalarTwoForm":
        n = self.chart.dim
        return ScalarTwoForm.from_upper(
            self.chart,
            {
                (i, j): add(self.comps[i][j], other.comps[i][j])
                for i in range(n)
                for j in range(i + 1, n)
            },
        )

    def __sub__(self, other: "ScalarTwoForm") -> "ScalarTwoForm":
        n = self.chart.dim
        return ScalarTwoForm.from_upper(
            self.chart,
            {
                (i, j): sub(self.comps[i][j], other.comps[i][j])
                for i in range(n)
                for j in range(i + 1, n)
            },
        )


def exterior_derivative(form: ScalarOneForm) -> ScalarTwoForm:
    """(d a)_ij = d_i a_j - d_j a_i."""
    chart = form.chart
    names = chart.names
    n = chart.dim
    upper = {
        (i, j): sub(differentiate(form.comps[j], names[i]), differentiate(form.comps[i], names[j]))
        for i in range(n)
        for j in range(i + 1, n)
    }
    return ScalarTwoForm.from_upper(chart, upper)


def wedge(a: ScalarOneForm, b: ScalarOneForm) -> ScalarTwoForm:
    """(a /\\ b)_ij = a_i b_j - a_j b_i."""
    chart = a.chart
    n = chart.dim
    upper = {
        (i, j): sub(mul(a.comps[i], b.comps[j]), mul(a.comps[j], b.comps[i]))
        for i in range(n)
        for j in range(i + 1, n)
    }
    return ScalarTwoForm.from_upper(chart, upper)


def _coordinate_vector(n: int, j: int) -> tuple[Expression, ...]:
    return tuple(Const(1.0 if a == j else 0.0) for a in range(n))


def _g_pair(metric: ChartMetric, u: Sequence[Expression], v: Sequence[Expression]) -> Expression:
    total: Expression = Const(0.0)
    for a in range(metric.dim):
        for b in range(metric.dim):
            total = add(total, mul(mul(metric.entries[a][b], u[a]), v[b]))
    return total


class FrameField:
    """An orthonormal frame with its dual coframe, both symbolic.

    For n <= 3 the coframe is Theta = E^-1 computed symbolically; beyond that
    coframe_at falls back to a numeric inverse per point and the form-level
    operations that need symbolic Theta refuse to run.
    """

    def __init__(self, metric: ChartMetric, frame_entries, coframe_entries):
        self.metric = metric
        self.chart = metric.chart
        self.frame_entries = tuple(tuple(row) for row in frame_entries)
        self.coframe_entries = (
            tuple(tuple(row) for row in coframe_entries) if coframe_entries is not None else None
        )

    @property
    def dim(self) -> int:
        return self.metric.dim

    @cached_property
    def _frame_fn(self):
        n = self.dim
        flat = [self.frame_entries[a][j] for a in range(n) for j in range(n)]
        return compile_expressions(flat, self.chart.names)

    @cached_property
    def _coframe_fn(self):
        if self.coframe_entries is None:
            return None
        n = self.dim
        flat = [self.coframe_entries[i][k] for i in range(n) for k in range(n)]
        return compile_expressions(flat, self.chart.names)

    def frame_at(self, point: Sequence[float]) -> np.ndarray:
        point = self.chart.require(point)
        n = self.dim
        return np.array(self._frame_fn(point), dtype=float).reshape(n, n)

    def coframe_at(self, point: Sequence[float]) -> np.ndarray:
        if self._coframe_fn is not None:
            point = self.chart.require(point)
            n = self.dim
            return np.array(self._coframe_fn(point), dtype=float).reshape(n, n)
        return np.linalg.inv(self.frame_at(point))

    def coframe_form(self, i: int) -> ScalarOneForm:
        if self.coframe_entries is None:
            raise DimensionError("symbolic coframe only available for n <= 3")
        return ScalarOneForm(self.chart, self.coframe_entries[i])

    @cached_property
    def connection(self) -> "ConnectionForms":
        return _build_connection(self)

    # -- cached n=2 structure data -----------------------------------------

    @cached_property
    def _structure_fn(self):
        if self.dim != 2:
            raise DimensionError("structure equations in this form are 2D-only")
        omega1 = self.coframe_form(0)
        omega2 = self.coframe_form(1)
        phi = self.connection.omega[1][0]
        r1 = exterior_derivative(omega1) - wedge(omega2, phi)
        r2 = exterior_derivative(omega2) + wedge(omega1, phi)
        return compile_expressions([r1.comps[0][1], r2.comps[0][1]], self.chart.names)

    @cached_property
    def _gauss_fn(self):
        if self.dim != 2:
            raise DimensionError("gauss_curvature is 2D-only")
        phi = self.connection.omega[1][0]
        dphi = exterior_derivative(phi)
        volume = wedge(self.coframe_form(0), self.coframe_form(1))
        return compile_expressions([dphi.comps[0][1], volume.comps[0][1]], self.chart.names)


@dataclass(frozen=True)
class ConnectionForms:
    """Matrix of connection 1-forms omega[i][j] = omega_i^j; antisymmetry in
    (i, j) is a verified property, not a construction shortcut: every entry is
    assembled independently from g(nabla e_i, e_j)."""

    frame: FrameField
    omega: tuple[tuple[ScalarOneForm, ...], ...]

    @property
    def phi(self) -> ScalarOneForm:
        if self.frame.dim != 2:
            raise DimensionError("phi = omega_2^1 is the n=2 connection form")
        return self.omega[1][0]


def orthonormal_frame(metric: ChartMetric) -> FrameField:
    """Index-ordered Gram-Schmidt over the coordinate fields."""
    n = metric.dim
    frame_vectors: list[tuple[Expression, ...]] = []
    for j in range(n):
        w = list(_coordinate_vector(n, j))
        for prev in frame_vectors:
            coefficient = _g_pair(metric, _coordinate_vector(n, j), prev)
            for a in range(n):
                w[a] = sub(w[a], mul(coefficient, prev[a]))
        norm = call("sqrt", _g_pair(metric, w, w))
        frame_vectors.append(tuple(div(component, norm) for component in w))
    # columns are frame vectors: E[a][j] = (e_j)^a
    frame_entries = tuple(tuple(frame_vectors[j][a] for j in range(n)) for a in range(n))
    coframe_entries = None
    if n <= 3:
        coframe_entries = tuple(
            tuple(row) for row in symbolic_inverse([list(r) for r in frame_entries])
        )
    return FrameField(metric, frame_entries, coframe_entries)


def _build_connection(f: FrameField) -> ConnectionForms:
    metric = f.metric
    names = f.chart.names
    n = f.dim
    gamma = metric.christoffel_entries
    g = metric.entries
    e = f.frame_entries
    table = []
    for i in range(n):
        row = []
        for j in range(n):
            comps = []
            for k in range(n):
                total: Expression = Const(0.0)
                for a in range(n):
                    covariant = differentiate(e[a][i], names[k])
                    for c in range(n):
                        covariant = add(covariant, mul(gamma[a][k][c], e[c][i]))
                    for b in range(n):
                        total = add(total, mul(mul(g[a][b], covariant), e[b][j]))
                comps.append(total)
            row.append(ScalarOneForm(f.chart, tuple(comps)))
        table.append(tuple(row))
    return ConnectionForms(f, tuple(table))


def connection_form(f: FrameField) -> ConnectionForms:
    return f.connection


def structural_residual(f: FrameField, point: Sequence[float]) -> float:
    """Max violation of d omega^1 = omega^2 /\\ phi and d omega^2 = -omega^1 /\\ phi
    at a point (dx/\\dy coefficient)."""
    point = f.chart.require(point)
    r1, r2 = f._structure_fn(point)
    return max(abs(r1), abs(r2))


def gauss_curvature(f: FrameField, point: Sequence[float]) -> float:
    """K from d phi = K omega^1 /\\ omega^2 (the frame route, independent of the
    Riemann-tensor route)."""
    point = f.chart.require(point)
    numerator, volume = f._gauss_fn(point)
    if abs(volume) < 1e-14:
        raise SingularMetricError("degenerate volume form", point=point)
    return numerator / volume
