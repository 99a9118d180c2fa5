"""Riemannian metrics on coordinate charts.

A :class:`Chart` is a box of coordinates; a :class:`ChartMetric` is a
symmetric positive-definite matrix of expressions over it.  Christoffel
symbols and the Riemann tensor are assembled symbolically (the inverse metric
enters as adjugate/determinant, so derivatives are exact), then compiled once
per metric for numeric evaluation.  Index conventions:

    christoffel(p)[k, i, j] = Gamma^k_ij
    riemann(p)[l, k, i, j]  = R^l_kij,  meaning  R(d_i, d_j) d_k = R^l_kij d_l

with R^l_kij = d_i Gamma^l_jk - d_j Gamma^l_ik
             + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ChartDomainError, DimensionError, SingularMetricError
from .exprlang import (
    Const,
    Expression,
    add,
    compile_expressions,
    differentiate,
    mul,
    neg,
    parse,
    sub,
    variables_of,
)

__all__ = [
    "Chart",
    "ChartMetric",
    "constant_curvature_tensor",
    "symbolic_determinant",
    "symbolic_inverse",
]

_DET_RTOL = 1e-12  # relative determinant threshold for "singular here"
_PD_MIN_EIGENVALUE = 1e-10


@dataclass(frozen=True)
class Chart:
    """A coordinate box.  ``margin`` is the fraction of each interval excluded
    from both ends when sampling (grids and random draws stay off the walls,
    where presets tend to degenerate)."""

    names: tuple[str, ...]
    box: tuple[tuple[float, float], ...]
    margin: float = 0.05

    def __post_init__(self):
        names = tuple(self.names)
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "box", box)
        if len(names) != len(box):
            raise ValueError("one interval per coordinate name required")
        if len(set(names)) != len(names):
            raise ValueError("coordinate names must be distinct")
        if not names:
            raise ValueError("charts need at least one coordinate")
        for name, (lo, hi) in zip(names, box):
            if not (lo < hi):
                raise ValueError(f"empty interval for {name!r}: [{lo}, {hi}]")
        if not (0.0 <= self.margin < 0.5):
            raise ValueError("margin must lie in [0, 0.5)")

    @property
    def dim(self) -> int:
        return len(self.names)

    def contains(self, point: Sequence[float]) -> bool:
        if len(point) != self.dim:
            return False
        return all(lo <= x <= hi for x, (lo, hi) in zip(point, self.box))

    def require(self, point: Sequence[float]) -> tuple[float, ...]:
        point = tuple(float(x) for x in point)
        if not self.contains(point):
            raise ChartDomainError(f"point {point} outside chart box {self.box}")
        return point

    def inner_box(self) -> tuple[tuple[float, float], ...]:
        out = []
        for lo, hi in self.box:
            pad = self.margin * (hi - lo)
            out.append((lo + pad, hi - pad))
        return tuple(out)

    def axes(self, resolution: int) -> list[np.ndarray]:
        if resolution < 2:
            raise ValueError("grid resolution must be at least 2")
        return [np.linspace(lo, hi, resolution) for lo, hi in self.inner_box()]

    def grid(self, resolution: int) -> Iterator[tuple[float, ...]]:
        """Row-major sweep (last coordinate fastest), the order argmax
        tie-breaking is defined against."""
        axes = self.axes(resolution)
        for idx in itertools.product(*(range(len(a)) for a in axes)):
            yield tuple(float(axes[d][i]) for d, i in enumerate(idx))

    def random_points(self, rng: np.random.Generator, count: int) -> list[tuple[float, ...]]:
        inner = self.inner_box()
        return [
            tuple(float(rng.uniform(lo, hi)) for lo, hi in inner) for _ in range(count)
        ]


def _as_expression(entry, names: tuple[str, ...]) -> Expression:
    if isinstance(entry, Expression):
        return entry
    if isinstance(entry, str):
        return parse(entry, names)
    if isinstance(entry, (int, float)):
        return Const(float(entry))
    raise TypeError(f"metric entries must be expressions, text, or numbers, got {type(entry)!r}")


def symbolic_determinant(matrix: Sequence[Sequence[Expression]]) -> Expression:
    """Laplace expansion along the first row; zero entries prune themselves."""
    n = len(matrix)
    if n == 1:
        return matrix[0][0]
    total: Expression = Const(0.0)
    for j in range(n):
        minor = [
            [matrix[r][c] for c in range(n) if c != j] for r in range(1, n)
        ]
        term = mul(matrix[0][j], symbolic_determinant(minor))
        total = add(total, term) if j % 2 == 0 else sub(total, term)
    return total


def symbolic_inverse(matrix: Sequence[Sequence[Expression]]) -> list[list[Expression]]:
    """Adjugate over determinant.  Fine for the n <= 3 charts this package
    targets; the numeric route (LU) is separate and used for point queries."""
    n = len(matrix)
    det = symbolic_determinant(matrix)
    if n == 1:
        return [[Const(1.0) / det]]
    inverse = [[Const(0.0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [
                [matrix[r][c] for c in range(n) if c != i]
                for r in range(n)
                if r != j
            ]
            cof = symbolic_determinant(minor)
            if (i + j) % 2 == 1:
                cof = neg(cof)
            inverse[i][j] = cof / det
    return inverse


class ChartMetric:
    """Immutable by contract: entries are fixed at construction, everything
    else is derived lazily and cached."""

    def __init__(self, chart: Chart, entries, *, pd_check_resolution: int = 4):
        self.chart = chart
        n = chart.dim
        rows = list(entries)
        if len(rows) != n or any(len(list(r)) != n for r in rows):
            raise DimensionError(f"metric must be {n}x{n} for this chart")
        g = tuple(
            tuple(_as_expression(entry, chart.names) for entry in row) for row in rows
        )
        for i in range(n):
            for j in range(n):
                extra = variables_of(g[i][j]) - set(chart.names)
                if extra:
                    raise ValueError(
                        f"metric entry ({i},{j}) uses undeclared variables {sorted(extra)}"
                    )
        for i in range(n):
            for j in range(i + 1, n):
                if g[i][j] != g[j][i]:
                    raise ValueError(f"metric entries ({i},{j}) and ({j},{i}) differ")
        self.entries = g
        self._check_positive_definite(pd_check_resolution)

    # -- construction-time sanity ------------------------------------------

    def _check_positive_definite(self, resolution: int):
        for point in self.chart.grid(resolution):
            g = self._g_fn(point)
            matrix = np.array(g, dtype=float).reshape(self.dim, self.dim)
            eigenvalues = np.linalg.eigvalsh(matrix)
            if eigenvalues.min() <= _PD_MIN_EIGENVALUE:
                raise SingularMetricError(
                    f"metric is not positive definite (min eigenvalue {eigenvalues.min():.3e})",
                    point=point,
                )

    # -- symbolic layers ----------------------------------------------------

    @property
    def dim(self) -> int:
        return self.chart.dim

    @cached_property
    def _dg(self) -> tuple:
        """_dg[a][i][j] = d g_ij / d x_a."""
        names = self.chart.names
        return tuple(
            tuple(tuple(differentiate(self.entries[i][j], a) for j in range(self.dim)) for i in range(self.dim))
            for a in names
        )

    @cached_property
    def inverse_entries(self) -> tuple:
        inv = symbolic_inverse([list(row) for row in self.entries])
        return tuple(tuple(row) for row in inv)

    @cached_property
    def christoffel_entries(self) -> tuple:
        """christoffel_entries[k][i][j] = Gamma^k_ij, shared across (i,j)/(j,i)."""
        n = self.dim
        ginv = self.inverse_entries
        dg = self._dg
        gamma = [[[None] * n for _ in range(n)] for _ in range(n)]
        for k in range(n):
            for i in range(n):
                for j in range(i, n):
                    total: Expression = Const(0.0)
                    for l in range(n):
                        bracket = sub(add(dg[i][j][l], dg[j][i][l]), dg[l][i][j])
                        total = add(total, mul(ginv[k][l], bracket))
                    value = mul(Const(0.5), total)
                    gamma[k][i][j] = value
                    gamma[k][j][i] = value
        return tuple(tuple(tuple(row) for row in plane) for plane in gamma)

    @cached_property
    def riemann_entries(self) -> tuple:
        """riemann_entries[l][k][i][j] = R^l_kij."""
        n = self.dim
        names = self.chart.names
        gamma = self.christoffel_entries
        dgamma = [
            [
                [[differentiate(gamma[l][i][k], names[a]) for k in range(n)] for i in range(n)]
                for l in range(n)
            ]
            for a in range(n)
        ]
        out = [[[[None] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
        for l in range(n):
            for k in range(n):
                for i in range(n):
                    for j in range(n):
                        term = sub(dgamma[i][l][j][k], dgamma[j][l][i][k])
                        for m in range(n):
                            term = add(term, mul(gamma[l][i][m], gamma[m][j][k]))
                            term = sub(term, mul(gamma[l][j][m], gamma[m][i][k]))
                        out[l][k][i][j] = term
        return tuple(
            tuple(tuple(tuple(row) for row in plane) for plane in block) for block in out
        )

    # -- compiled evaluators --------------------------------------------------

    @cached_property
    def _g_fn(self):
        flat = [self.entries[i][j] for i in range(self.dim) for j in range(self.dim)]
        return compile_expressions(flat, self.chart.names)

    @cached_property
    def _gamma_fn(self):
        n = self.dim
        flat = [
            self.christoffel_entries[k][i][j]
            for k in range(n)
            for i in range(n)
            for j in range(n)
        ]
        return compile_expressions(flat, self.chart.names)

    @cached_property
    def _riemann_fn(self):
        n = self.dim
        flat = [
            self.riemann_entries[l][k][i][j]
            for l in range(n)
            for k in range(n)
            for i in range(n)
            for j in range(n)
        ]
        return compile_expressions(flat, self.chart.names)

    # -- numeric API -----------------------------------------------------------

    def metric_at(self, point: Sequence[float]) -> np.ndarray:
        point = self.chart.require(point)
        n = self.dim
        return np.array(self._g_fn(point), dtype=float).reshape(n, n)

    def inverse_at(self, point: Sequence[float]) -> np.ndarray:
        g = self.metric_at(point)
        scale = max(float(np.abs(g).max()), 1e-300)
        det = float(np.linalg.det(g))
        if abs(det) < _DET_RTOL * scale**self.dim:
            raise SingularMetricError("metric is singular to tolerance", point=point)
        return np.linalg.inv(g)

    def christoffel(self, point: Sequence[float]) -> np.ndarray:
        point = self.chart.require(point)
        # the symbolic route divides by det(g); fail loudly where that is ill-posed
        self.inverse_at(point)
        n = self.dim
        return np.array(self._gamma_fn(point), dtype=float).reshape(n, n, n)

    def riemann(self, point: Sequence[float]) -> np.ndarray:
        point = self.chart.require(point)
        self.inverse_at(point)
        n = self.dim
        return np.array(self._riemann_fn(point), dtype=float).reshape(n, n, n, n)

    def sectional_curvature(self, point: Sequence[float], plane: tuple[int, int] = (0, 1)) -> float:
        i, j = plane
        if i == j:
            raise ValueError("a plane needs two distinct coordinate directions")
        g = self.metric_at(point)
        riemann = self.riemann(point)
        numerator = float(np.dot(g[:, i], riemann[:, j, i, j]))
        denominator = g[i, i] * g[j, j] - g[i, j] ** 2
        if abs(denominator) < 1e-14 * max(1.0, abs(g[i, i] * g[j, j])):
            raise SingularMetricError("degenerate coordinate plane", point=point)
        return numerator / denominator


def constant_curvature_tensor(
    metric: ChartMetric,
    curvature: float,
    x: Sequence[float],
    y: Sequence[float],
    z: Sequence[float],
    point: Sequence[float],
) -> np.ndarray:
    """R_K(X, Y)Z = K (g(Y, Z) X - g(X, Z) Y), the model tensor of constant
    sectional curvature K, as coordinate components at ``point``."""
    g = metric.metric_at(point)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    return curvature * (float(y @ g @ z) * x - float(x @ g @ z) * y)
