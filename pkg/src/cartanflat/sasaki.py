"""Lie-algebra-valued connection forms on TM + (trivial line bundle).

Given an orthonormal frame e_1..e_n with coframe omega^1..omega^n and
connection forms omega_i^j, the extended bundle carries two natural
connections, written as (n+1) x (n+1) matrices of scalar one-forms in the
column convention  nabla E_j = sum_i A[i][j] E_i  (E_1..E_n the frame,
E_{n+1} the distinguished unit section):

    A[i][j] = omega_j^i            (tangent block)
    A[i][n] = omega^i              (last column)
    A[n][j] = +omega^j  (variant "h")   or   -omega^j  (variant "s")

The "h" matrix is so(n,1)-valued (A^T eta + eta A = 0 with
eta = diag(1,..,1,-1)); the "s" matrix is so(n+1)-valued (antisymmetric).
Curvature is Omega = dA + A ^ A, equivalently dA + (1/2)[A, A]; both
routes are implemented and kept separate so they can check each other.

For n = 2 the same connections can be written in a three-generator basis,

    A = m_1 omega^1 + m_2 omega^2 + m_3 phi,

with (m_1, m_2, m_3) one of the bases below, and the curvature splits as

    Omega = m_1 (d omega^1 - omega^2 ^ phi)
          + m_2 (d omega^2 + omega^1 ^ phi)
          + m_3 (d phi + s * omega^1 ^ omega^2)   where [m_1, m_2] = s m_3.

The first two coefficients vanish by the structure equations, so flatness
reduces to the third: "h" (where [m_1, m_2] = +m_3) is flat exactly when
the Gauss curvature is -1, and "s" (where [m_1, m_2] = -m_3) exactly when
it is +1.

Residual convention: flatness_scan reports Omega evaluated on orthonormal
frame pairs (e_a, e_b), not on coordinate pairs, so the number is gauge
invariant and for constant curvature c equals |c + 1| ("h") or |c - 1|
("s") in every chart.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cartan import FrameField, ScalarOneForm, orthonormal_frame
from .errors import DimensionError
from .exprlang import Const, Expression, add, compile_expressions, differentiate, mul, neg, sub
from .metricspace import Chart, ChartMetric

__all__ = [
    "LieBasis",
    "sl2_basis",
    "so21_basis",
    "so3_basis",
    "lie_basis",
    "basis_coefficients",
    "commutator",
    "MatrixOneForm",
    "MatrixTwoForm",
    "sasaki_form",
    "connection_matrix",
    "curvature_form",
    "FlatnessReport",
    "flatness_scan",
    "variant_sign",
]


def _frozen(rows) -> np.ndarray:
    out = np.array(rows, dtype=float)
    out.setflags(write=False)
    return out


def commutator(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y - y @ x


@dataclass(frozen=True, eq=False)
class LieBasis:
    """An ordered basis (m_1, m_2, m_3) of a three-dimensional matrix Lie
    algebra.  Brackets are computed, never hard-coded, so the tabulated
    structure constants in the tests act as an independent check."""

    name: str
    matrices: tuple[np.ndarray, ...]

    @property
    def size(self) -> int:
        return self.matrices[0].shape[0]

    def bracket(self, i: int, j: int) -> np.ndarray:
        return commutator(self.matrices[i], self.matrices[j])

    def structure_constants(self) -> np.ndarray:
        """c[i][j][k] with [m_i, m_j] = sum_k c[i][j][k] m_k."""
        count = len(self.matrices)
        table = np.zeros((count, count, count))
        for i in range(count):
            for j in range(count):
                coeffs, residual = basis_coefficients(self.bracket(i, j), self)
                if residual > 1e-12:
                    raise ValueError(f"basis {self.name!r} is not closed under brackets")
                table[i][j] = coeffs
        return table


def sl2_basis() -> LieBasis:
    """Traceless 2x2 generators with [m1,m2]=m3, [m2,m3]=-m1, [m3,m1]=-m2."""
    return LieBasis(
        "sl2",
        (
            _frozen([[0.0, -0.5], [-0.5, 0.0]]),
            _frozen([[0.5, 0.0], [0.0, -0.5]]),
            _frozen([[0.0, 0.5], [-0.5, 0.0]]),
        ),
    )


def so21_basis() -> LieBasis:
    """Lorentz generators (eta = diag(1,1,-1)) with the same structure
    constants as sl2_basis: [m1,m2]=m3, [m2,m3]=-m1, [m3,m1]=-m2."""
    return LieBasis(
        "so21",
        (
            _frozen([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]),
            _frozen([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]),
            _frozen([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
        ),
    )


def so3_basis() -> LieBasis:
    """Rotation generators with [m1,m2]=-m3, [m2,m3]=-m1, [m3,m1]=-m2.
    Only the first bracket's sign differs from so21_basis; that one sign
    is what moves the flat locus from curvature -1 to +1."""
    return LieBasis(
        "so3",
        (
            _frozen([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
            _frozen([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]]),
            _frozen([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
        ),
    )


_BASIS_BUILDERS = {"sl2": sl2_basis, "so21": so21_basis, "so3": so3_basis}


def lie_basis(name: str) -> LieBasis:
    try:
        return _BASIS_BUILDERS[name]()
    except KeyError:
        raise ValueError(f"unknown basis {name!r}; expected one of 'sl2', 'so21', 'so3'") from None


def basis_coefficients(value: np.ndarray, basis: LieBasis) -> tuple[np.ndarray, float]:
    """Least-squares coefficients of `value` in the basis, plus the max-abs
    distance of `value` from the basis span (0 iff value lies in the algebra)."""
    stacked = np.stack([m.ravel() for m in basis.matrices], axis=1)
    target = np.asarray(value, dtype=float).ravel()
    coeffs, *_ = np.linalg.lstsq(stacked, target, rcond=None)
    residual = float(np.max(np.abs(stacked @ coeffs - target)))
    return coeffs, residual


def _as_matrix_comps(comps) -> tuple:
    return tuple(tuple(tuple(entry for entry in row) for row in mat) for mat in comps)


@dataclass(frozen=True)
class MatrixOneForm:
    """A matrix-valued 1-form: comps[k] is the coefficient matrix of dx^k."""

    chart: Chart
    comps: tuple  # comps[k][row][col] -> Expression

    def __post_init__(self):
        object.__setattr__(self, "comps", _as_matrix_comps(self.comps))
        if len(self.comps) != self.chart.dim:
            raise DimensionError("one coefficient matrix per coordinate required")

    @property
    def size(self) -> int:
        return len(self.comps[0])

    def entry_form(self, row: int, col: int) -> ScalarOneForm:
        return ScalarOneForm(self.chart, tuple(m[row][col] for m in self.comps))

    def at(self, point: Sequence[float]) -> np.ndarray:
        """All coefficient matrices at a point, shape (dim, size, size)."""
        point = self.chart.require(point)
        fn = getattr(self, "_fn", None)
        if fn is None:
            flat = [entry for mat in self.comps for row in mat for entry in row]
            fn = compile_expressions(flat, self.chart.names)
            object.__setattr__(self, "_fn", fn)
        n, m = self.chart.dim, self.size
        return np.array(fn(point), dtype=float).reshape(n, m, m)

    def value(self, point: Sequence[float], velocity: Sequence[float]) -> np.ndarray:
        """The matrix A(X) for the tangent vector X = velocity at the point."""
        v = np.asarray(velocity, dtype=float)
        if v.shape != (self.chart.dim,):
            raise DimensionError("velocity must have one component per coordinate")
        return np.tensordot(v, self.at(point), axes=(0, 0))


@dataclass(frozen=True)
class MatrixTwoForm:
    """A matrix-valued 2-form; comps[i][j] (antisymmetric in i, j) is the
    coefficient matrix of dx^i ^ dx^j evaluated on (d_i, d_j)."""

    chart: Chart
    comps: tuple  # comps[i][j][row][col] -> Expression

    def __post_init__(self):
        object.__setattr__(
            self, "comps", tuple(_as_matrix_comps(row) for row in self.comps)
        )

    @staticmethod
    def from_upper(chart: Chart, size: int, upper: dict) -> "MatrixTwoForm":
        n = chart.dim
        zero = tuple(tuple(Const(0.0) for _ in range(size)) for _ in range(size))
        table = [[zero] * n for _ in range(n)]
        for (i, j), mat in upper.items():
            table[i][j] = tuple(tuple(row) for row in mat)
            table[j][i] = tuple(tuple(neg(entry) for entry in row) for row in mat)
        return MatrixTwoForm(chart, tuple(tuple(row) for row in table))

    @property
    def size(self) -> int:
        return len(self.comps[0][0])

    def at(self, point: Sequence[float]) -> np.ndarray:
        """All coefficient matrices at a point, shape (dim, dim, size, size)."""
        point = self.chart.require(point)
        fn = getattr(self, "_fn", None)
        if fn is None:
            flat = [
                entry
                for row_i in self.comps
                for mat in row_i
                for row in mat
                for entry in row
            ]
            fn = compile_expressions(flat, self.chart.names)
            object.__setattr__(self, "_fn", fn)
        n, m = self.chart.dim, self.size
        return np.array(fn(point), dtype=float).reshape(n, n, m, m)

    def value(self, point: Sequence[float], u: Sequence[float], v: Sequence[float]) -> np.ndarray:
        """The matrix Omega(X, Y) for tangent vectors X = u, Y = v."""
        n = self.chart.dim
        uu = np.asarray(u, dtype=float)
        vv = np.asarray(v, dtype=float)
        if uu.shape != (n,) or vv.shape != (n,):
            raise DimensionError("vectors must have one component per coordinate")
        return np.einsum("k,l,klij->ij", uu, vv, self.at(point))


def variant_sign(variant: str) -> float:
    """+1 for the so(n,1) connection, -1 for the so(n+1) one."""
    if variant == "h":
        return 1.0
    if variant == "s":
        return -1.0
    raise ValueError(f"unknown variant {variant!r}; expected 'h' or 's'")


def sasaki_form(frame: FrameField, basis: LieBasis) -> MatrixOneForm:
    """The n=2 connection written in a three-generator basis:
    A = m_1 omega^1 + m_2 omega^2 + m_3 phi."""
    if frame.dim != 2:
        raise DimensionError("the three-generator form of the connection is 2D-only")
    forms = (
        frame.coframe_form(0),
        frame.coframe_form(1),
        frame.connection.omega[1][0],
    )
    size = basis.size
    comps = []
    for k in range(frame.chart.dim):
        mat = []
        for a in range(size):
            row = []
            for b in range(size):
                total: Expression = Const(0.0)
                for m, form in enumerate(forms):
                    total = add(total, mul(Const(float(basis.matrices[m][a][b])), form.comps[k]))
                row.append(total)
            mat.append(tuple(row))
        comps.append(tuple(mat))
    return MatrixOneForm(frame.chart, tuple(comps))


def connection_matrix(frame: FrameField, variant: str) -> MatrixOneForm:
    """The (n+1) x (n+1) connection matrix in the column convention
    nabla E_j = sum_i A[i][j] E_i (see the module docstring for the layout)."""
    sign = variant_sign(variant)
    n = frame.dim
    omega = frame.connection.omega
    comps = []
    for k in range(n):
        mat = [[Const(0.0)] * (n + 1) for _ in range(n + 1)]
        for i in range(n):
            for j in range(n):
                mat[i][j] = omega[j][i].comps[k]
        for i in range(n):
            coframe_comp = frame.coframe_form(i).comps[k]
            mat[i][n] = coframe_comp
            mat[n][i] = mul(Const(sign), coframe_comp)
        comps.append(tuple(tuple(row) for row in mat))
    return MatrixOneForm(frame.chart, tuple(comps))


def _matrix_product(m1, m2, size: int):
    out = []
    for a in range(size):
        row = []
        for b in range(size):
            total: Expression = Const(0.0)
            for c in range(size):
                total = add(total, mul(m1[a][c], m2[c][b]))
            row.append(total)
        out.append(row)
    return out


def curvature_form(a_form: MatrixOneForm, method: str = "wedge") -> MatrixTwoForm:
    """Omega = dA + A ^ A ("wedge") or dA + (1/2)[A, A] ("bracket").

    The two methods are algebraically identical; keeping both gives a
    structural cross-check on the quadratic term.
    """
    if method not in ("wedge", "bracket"):
        raise ValueError(f"unknown method {method!r}; expected 'wedge' or 'bracket'")
    chart = a_form.chart
    names = chart.names
    n = chart.dim
    size = a_form.size
    upper = {}
    for i in range(n):
        for j in range(i + 1, n):
            a_i, a_j = a_form.comps[i], a_form.comps[j]
            forward = _matrix_product(a_i, a_j, size)
            backward = _matrix_product(a_j, a_i, size)
            mat = []
            for a in range(size):
                row = []
                for b in range(size):
                    d_entry = sub(
                        differentiate(a_j[a][b], names[i]),
                        differentiate(a_i[a][b], names[j]),
                    )
                    if method == "wedge":
                        quad = sub(forward[a][b], backward[a][b])
                    else:
                        quad = mul(
                            Const(0.5),
                            sub(
                                sub(forward[a][b], backward[a][b]),
                                sub(backward[a][b], forward[a][b]),
                            ),
                        )
                    row.append(add(d_entry, quad))
                mat.append(tuple(row))
            upper[(i, j)] = tuple(mat)
    return MatrixTwoForm.from_upper(chart, size, upper)


@dataclass(frozen=True)
class FlatnessReport:
    variant: str
    resolution: int
    points: int
    max_residual: float
    argmax_point: tuple[float, ...]

    def as_dict(self) -> dict:
        return {
            "variant": self.variant,
            "resolution": self.resolution,
            "points": self.points,
            "max_residual": self.max_residual,
            "argmax_point": list(self.argmax_point),
        }


def flatness_scan(
    metric: ChartMetric,
    variant: str,
    resolution: int = 20,
    frame: FrameField | None = None,
) -> FlatnessReport:
    """Scan the chart's inner grid and report the largest curvature entry of
    the chosen connection, measured on orthonormal frame pairs.

    The scan order is row-major over the grid (last coordinate fastest) and
    ties keep the first point, so the argmax is deterministic.
    """
    if frame is None:
        frame = orthonormal_frame(metric)
    a_form = connection_matrix(frame, variant)
    omega_form = curvature_form(a_form)
    n = metric.dim
    best = -1.0
    best_point: tuple[float, ...] = ()
    count = 0
    for point in metric.chart.grid(resolution):
        frame_matrix = frame.frame_at(point)
        coefficient = omega_form.at(point)
        on_frame = np.einsum("klij,ka,lb->abij", coefficient, frame_matrix, frame_matrix)
        residual = 0.0
        for a in range(n):
            for b in range(a + 1, n):
                residual = max(residual, float(np.max(np.abs(on_frame[a, b]))))
        count += 1
        if residual > best:
            best = residual
            best_point = point
    return FlatnessReport(variant, resolution, count, best, best_point)
