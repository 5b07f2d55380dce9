"""Charts, fields and almost para-hypercomplex triples.

Every field can report its value and first derivatives ("jet") at a point;
that is all the downstream tensor calculus needs.  Fields built from
expressions stay symbolic under +, @ and scalar multiplication, anything
else (numeric conjugation) falls back to a jet computed by the product rule.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .expr import Expr, Point, as_expr
from .report import Report

EPS = (-1, 1, 1)


class GeometryError(Exception):
    pass


class SingularPointError(GeometryError, ArithmeticError):
    def __init__(self, message: str, point: Point | None = None):
        self.point = point
        super().__init__(message if point is None else f"{message} at {point}")


# ---------------------------------------------------------------------------
# Charts


@dataclass(frozen=True)
class Chart:
    names: tuple[str, ...]
    chart_id: str = "R^n"

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        n = len(self.names)
        if n % 4 != 0 or n < 8:
            raise GeometryError(f"chart dimension must be 4m >= 8, got {n}")
        if len(set(self.names)) != n:
            raise GeometryError("coordinate names must be distinct")

    @classmethod
    def standard(cls, m: int = 2) -> "Chart":
        """Coordinates x1..x2m, y1..y2m on R^{4m}."""
        xs = [f"x{i}" for i in range(1, 2 * m + 1)]
        ys = [f"y{i}" for i in range(1, 2 * m + 1)]
        return cls(tuple(xs + ys), f"R^{4 * m}")

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def m(self) -> int:
        return self.dim // 4

    def index(self, name: str) -> int:
        return self.names.index(name)

    def var(self, name: str) -> Expr:
        return ex.Var(name)

    def point(self, coords) -> Point:
        return Point(self.names, coords, self.chart_id)

    def parse(self, src: str, registry: ex.Registry | None = None) -> Expr:
        return ex.parse_expr(src, self.names, registry)


def as_point(p, chart: Chart | None = None) -> Point:
    if isinstance(p, Point):
        return p
    if chart is None:
        raise GeometryError("raw coordinates need a chart")
    return chart.point(p)


def random_points(
    chart: Chart,
    count: int,
    seed: int | np.random.Generator = 0,
    low: float = 0.5,
    high: float = 1.5,
    accept: Callable[[Point], bool] | None = None,
    max_tries: int = 10000,
) -> list[Point]:
    """Uniform samples from the box [low, high]^n, filtered by ``accept``."""
    rng = np.random.default_rng(seed)
    pts: list[Point] = []
    tries = 0
    while len(pts) < count:
        tries += 1
        if tries > max_tries:
            raise GeometryError("could not find enough admissible sample points")
        p = chart.point(rng.uniform(low, high, chart.dim))
        if accept is None or accept(p):
            pts.append(p)
    return pts


# ---------------------------------------------------------------------------
# Vector fields and one-forms


class VectorField:
    """Tangent vector field with expression components."""

    def __init__(self, chart: Chart, components: Sequence):
        self.chart = chart
        self.components = tuple(as_expr(c) for c in components)
        if len(self.components) != chart.dim:
            raise GeometryError("component count must equal the chart dimension")
        self._values = None
        self._jet = None

    @classmethod
    def coordinate(cls, chart: Chart, name_or_index) -> "VectorField":
        i = chart.index(name_or_index) if isinstance(name_or_index, str) else name_or_index
        comps = [ex.ZERO] * chart.dim
        comps[i] = ex.ONE
        return cls(chart, comps)

    @classmethod
    def constant(cls, chart: Chart, vec) -> "VectorField":
        return cls(chart, [ex.Const(float(v)) for v in vec])

    def value(self, p) -> np.ndarray:
        if self._values is None:
            self._values = ex.compile_exprs(self.components, self.chart.names)
        return self._values(as_point(p, self.chart))

    def jet(self, p) -> tuple[np.ndarray, np.ndarray]:
        """Value and derivative matrix D[k, a] = d_k X^a."""
        if self._jet is None:
            d = [ex.differentiate(c, v) for v in self.chart.names for c in self.components]
            self._jet = ex.compile_exprs(list(self.components) + d, self.chart.names)
        n = self.chart.dim
        out = self._jet(as_point(p, self.chart))
        return out[:n], out[n:].reshape(n, n)

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.chart, [a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.chart, [a - b for a, b in zip(self.components, other.components)])

    def __rmul__(self, c) -> "VectorField":
        c = as_expr(c)
        return VectorField(self.chart, [c * a for a in self.components])

    def __repr__(self):
        return f"VectorField({', '.join(map(str, self.components))})"


class OneForm:
    """Differential one-form with expression components alpha(d/dx_k)."""

    def __init__(self, chart: Chart, components: Sequence):
        self.chart = chart
        self.components = tuple(as_expr(c) for c in components)
        if len(self.components) != chart.dim:
            raise GeometryError("component count must equal the chart dimension")
        self._values = None

    @classmethod
    def constant(cls, chart: Chart, vec) -> "OneForm":
        return cls(chart, [ex.Const(float(v)) for v in vec])

    @classmethod
    def zero(cls, chart: Chart) -> "OneForm":
        return cls(chart, [ex.ZERO] * chart.dim)

    def value(self, p) -> np.ndarray:
        if self._values is None:
            self._values = ex.compile_exprs(self.components, self.chart.names)
        return self._values(as_point(p, self.chart))


# ---------------------------------------------------------------------------
# Endomorphism fields


class EndomorphismField:
    """Field of n x n matrices acting on tangent vector components (column action)."""

    chart: Chart

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def entries(self) -> list[list[Expr]] | None:
        """Expression entries, or None for numerically defined fields."""
        return None

    def value(self, p) -> np.ndarray:
        return self.jet(p)[0]

    def jet(self, p) -> tuple[np.ndarray, np.ndarray]:
        """(value, D) with D[k] = d/dx_k of the matrix."""
        raise NotImplementedError

    # arithmetic -------------------------------------------------------
    def __add__(self, other: "EndomorphismField") -> "EndomorphismField":
        if self.entries is not None and other.entries is not None:
            return SymbolicEndomorphism(self.chart, _mat_add(self.entries, other.entries))
        return JetEndomorphism(self.chart, lambda p: _jet_add(self.jet(p), other.jet(p)))

    def __sub__(self, other: "EndomorphismField") -> "EndomorphismField":
        return self + (-1.0) * other

    def __neg__(self) -> "EndomorphismField":
        return (-1.0) * self

    def __matmul__(self, other: "EndomorphismField") -> "EndomorphismField":
        if self.entries is not None and other.entries is not None:
            return SymbolicEndomorphism(self.chart, _mat_mul(self.entries, other.entries))
        return JetEndomorphism(self.chart, lambda p: _jet_mul(self.jet(p), other.jet(p)))

    def __rmul__(self, c) -> "EndomorphismField":
        c = as_expr(c)
        if self.entries is not None:
            return SymbolicEndomorphism(self.chart, [[c * e for e in row] for row in self.entries])
        if isinstance(c, ex.Const):
            k = c.value
            return JetEndomorphism(self.chart, lambda p: tuple(k * a for a in self.jet(p)))
        scal = VectorField(self.chart, [c] + [ex.ZERO] * (self.dim - 1))

        def jet(p):
            v, dv = scal.jet(p)
            J, D = self.jet(p)
            return v[0] * J, v[0] * D + dv[:, 0][:, None, None] * J[None]

        return JetEndomorphism(self.chart, jet)

    def column(self, i: int) -> "ColumnField":
        return ColumnField(self, i)


class SymbolicEndomorphism(EndomorphismField):
    def __init__(self, chart: Chart, entries: Sequence[Sequence]):
        self.chart = chart
        n = chart.dim
        rows = [[as_expr(e) for e in row] for row in entries]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise GeometryError(f"endomorphism must be {n}x{n}")
        self._entries = rows
        self._val = None
        self._jet = None

    @classmethod
    def constant(cls, chart: Chart, matrix) -> "SymbolicEndomorphism":
        M = np.asarray(matrix, dtype=float)
        return cls(chart, [[ex.Const(float(v)) for v in row] for row in M])

    @classmethod
    def identity(cls, chart: Chart) -> "SymbolicEndomorphism":
        return cls.constant(chart, np.eye(chart.dim))

    @property
    def entries(self):
        return self._entries

    def is_constant(self) -> bool:
        return all(isinstance(e, ex.Const) for row in self._entries for e in row)

    def value(self, p) -> np.ndarray:
        n = self.dim
        if self._val is None:
            self._val = ex.compile_exprs([e for row in self._entries for e in row], self.chart.names)
        return self._val(as_point(p, self.chart)).reshape(n, n)

    def jet(self, p) -> tuple[np.ndarray, np.ndarray]:
        n = self.dim
        if self._jet is None:
            flat = [e for row in self._entries for e in row]
            ders = [ex.differentiate(e, v) for v in self.chart.names for e in flat]
            self._jet = ex.compile_exprs(flat + ders, self.chart.names)
        out = self._jet(as_point(p, self.chart))
        return out[: n * n].reshape(n, n), out[n * n:].reshape(n, n, n)

    def to_strings(self) -> list[list[str]]:
        return [[str(e) for e in row] for row in self._entries]

    def __repr__(self):
        return f"SymbolicEndomorphism({self.dim}x{self.dim})"


class JetEndomorphism(EndomorphismField):
    """Endomorphism known only through a pointwise jet function."""

    def __init__(self, chart: Chart, jet_fn: Callable[[Point], tuple[np.ndarray, np.ndarray]]):
        self.chart = chart
        self._jet_fn = jet_fn

    def jet(self, p):
        return self._jet_fn(as_point(p, self.chart))


class ColumnField:
    """The vector field X = J(d/dx_i) for an endomorphism field J."""

    def __init__(self, J: EndomorphismField, i: int):
        self.J = J
        self.i = i
        self.chart = J.chart

    def as_vector_field(self) -> VectorField:
        if self.J.entries is None:
            raise GeometryError("column of a numeric field has no expression form")
        return VectorField(self.chart, [row[self.i] for row in self.J.entries])

    def value(self, p):
        return self.J.value(p)[:, self.i]

    def jet(self, p):
        J, D = self.J.jet(p)
        return J[:, self.i], D[:, :, self.i]


class ShiftedColumnField:
    """The vector field (J + c Id)(d/dx_i); for c = 1 and J^2 = Id it lies in Ker(J - Id)."""

    def __init__(self, J: EndomorphismField, i: int, c: float = 1.0):
        self.J = J
        self.i = i
        self.c = c
        self.chart = J.chart

    def value(self, p):
        return self.jet(p)[0]

    def jet(self, p):
        J, D = self.J.jet(p)
        v = J[:, self.i].copy()
        v[self.i] += self.c
        return v, D[:, :, self.i]


def eigen_frame(J: EndomorphismField, sign: float, p) -> list[ShiftedColumnField]:
    """Columns of J + sign Id spanning Ker(J - sign Id) near p (J^2 = Id).

    Columns are chosen by pivoted QR at p.
    """
    import scipy.linalg

    M = J.value(as_point(p, J.chart)) + sign * np.eye(J.dim)
    _, R, piv = scipy.linalg.qr(M, pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > 1e-9 * max(1.0, d[0])))
    return [ShiftedColumnField(J, int(c), sign) for c in sorted(piv[:rank])]


def _mat_add(A, B):
    return [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def _mat_mul(A, B):
    n = len(A)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = ex.ZERO
            for k in range(n):
                a, b = A[i][k], B[k][j]
                if a.is_const(0.0) or b.is_const(0.0):
                    continue
                acc = acc + a * b
            row.append(acc)
        out.append(row)
    return out


def _jet_add(a, b):
    return a[0] + b[0], a[1] + b[1]


def _jet_mul(a, b):
    A, dA = a
    B, dB = b
    return A @ B, dA @ B + A @ dB


def symbolic_inverse(M: Sequence[Sequence[Expr]]) -> list[list[Expr]] | None:
    """Exact inverse of a unipotent triangular matrix via the finite Neumann series.

    Returns None when M is not of that shape.
    """
    n = len(M)
    entries = [[as_expr(e) for e in row] for row in M]
    if not all(entries[i][i].is_const(1.0) for i in range(n)):
        return None
    upper = all(entries[i][j].is_const(0.0) for i in range(n) for j in range(i))
    lower = all(entries[i][j].is_const(0.0) for i in range(n) for j in range(i + 1, n))
    if not (upper or lower):
        return None
    N = [[(ex.ZERO if i == j else entries[i][j]) for j in range(n)] for i in range(n)]
    minus_N = [[-e for e in row] for row in N]
    ident = [[ex.ONE if i == j else ex.ZERO for j in range(n)] for i in range(n)]
    total = [row[:] for row in ident]
    term = ident
    for _ in range(n - 1):
        term = _mat_mul(term, minus_N)
        if all(e.is_const(0.0) for row in term for e in row):
            break
        total = _mat_add(total, term)
    return total


class ConjugatedEndomorphism(EndomorphismField):
    """G J G^{-1} with G^{-1} computed pointwise; derivatives are exact."""

    def __init__(self, G: EndomorphismField, J: EndomorphismField):
        self.chart = J.chart
        self.G = G
        self.J = J

    def jet(self, p):
        p = as_point(p, self.chart)
        G, dG = self.G.jet(p)
        J, dJ = self.J.jet(p)
        det = np.linalg.det(G)
        if abs(det) < 1e-12 * max(1.0, np.abs(G).max() ** G.shape[0]):
            raise SingularPointError("conjugating field G is singular (det G = 0)", p)
        Gi = np.linalg.inv(G)
        val = G @ J @ Gi
        dGi = -Gi[None] @ dG @ Gi[None]
        der = dG @ (J @ Gi)[None] + G[None] @ dJ @ Gi[None] + (G @ J)[None] @ dGi
        return val, der


# ---------------------------------------------------------------------------
# Para-hypercomplex triples


class PqStructure:
    """An admissible basis (J1, J2, J3) with signs (-1, +1, +1).

    ``domain`` optionally restricts where the structure may be sampled
    (singular loci of generated families).
    """

    eps = EPS

    def __init__(
        self,
        J1: EndomorphismField,
        J2: EndomorphismField,
        J3: EndomorphismField,
        chart: Chart | None = None,
        domain: Callable[[Point], bool] | None = None,
        name: str = "",
        meta: dict | None = None,
    ):
        self.J = (J1, J2, J3)
        self.chart = chart or J1.chart
        self.domain = domain
        self.name = name
        self.meta = dict(meta or {})
        self._cache: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}

    J1 = property(lambda self: self.J[0])
    J2 = property(lambda self: self.J[1])
    J3 = property(lambda self: self.J[2])

    @property
    def dim(self) -> int:
        return self.chart.dim

    def point(self, coords) -> Point:
        return self.chart.point(coords)

    def admits(self, p) -> bool:
        return self.domain is None or bool(self.domain(as_point(p, self.chart)))

    def values(self, p) -> np.ndarray:
        """Matrices of (J1, J2, J3) at p, shape (3, n, n)."""
        return self.jets(p)[0]

    def jets(self, p) -> tuple[np.ndarray, np.ndarray]:
        """Values (3, n, n) and derivatives (3, n, n, n), D[i, k] = d_k J_i."""
        p = as_point(p, self.chart)
        key = p.key()
        hit = self._cache.get(key)
        if hit is None:
            vals, ders = zip(*(J.jet(p) for J in self.J))
            hit = (np.array(vals), np.array(ders))
            if len(self._cache) > 256:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    @property
    def is_symbolic(self) -> bool:
        return all(J.entries is not None for J in self.J)

    def element(self, a1, a2, a3) -> EndomorphismField:
        """The field a1 J1 + a2 J2 + a3 J3."""
        return a1 * self.J1 + a2 * self.J2 + a3 * self.J3

    def with_domain(self, domain) -> "PqStructure":
        return PqStructure(*self.J, chart=self.chart, domain=domain, name=self.name, meta=self.meta)

    def __repr__(self):
        return f"PqStructure({self.name or 'unnamed'}, n={self.dim})"


@dataclass
class StructureElement:
    """a1 J1 + a2 J2 + a3 J3 relative to a structure's admissible basis."""

    coeffs: tuple
    structure: PqStructure | None = None

    def values(self, p) -> np.ndarray:
        out = []
        for c in self.coeffs:
            if isinstance(c, Expr):
                out.append(ex.evaluate(c, as_point(p, self.structure.chart if self.structure else None)))
            else:
                out.append(float(c))
        return np.array(out)


def lorentz_metric(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(-a[0] * b[0] + a[1] * b[1] + a[2] * b[2])


def structure_metric(u: StructureElement, v: StructureElement, p=None) -> float:
    """The Lorentzian fiber metric -a1 b1 + a2 b2 + a3 b3 at p."""
    if u.structure is not None and v.structure is not None and u.structure is not v.structure:
        raise GeometryError("elements belong to different structures")
    return lorentz_metric(u.values(p), v.values(p))


def admissible_basis_check(H: PqStructure, samples: Sequence, tol: float = 1e-10) -> Report:
    """Maximum violation of the para-hypercomplex relations over ``samples``."""
    if not samples:
        raise GeometryError("admissible_basis_check needs at least one sample")
    n = H.dim
    I = np.eye(n)
    worst: dict[str, float] = {k: 0.0 for k in (
        "J1^2+Id", "J2^2-Id", "J3^2-Id", "J1J2+J2J1", "J2J3+J3J2", "J3J1+J1J3",
        "J3-J1J2", "tr J2", "tr J3")}
    pts = []
    for p in samples:
        p = as_point(p, H.chart)
        J1, J2, J3 = H.values(p)
        r = {
            "J1^2+Id": J1 @ J1 + I,
            "J2^2-Id": J2 @ J2 - I,
            "J3^2-Id": J3 @ J3 - I,
            "J1J2+J2J1": J1 @ J2 + J2 @ J1,
            "J2J3+J3J2": J2 @ J3 + J3 @ J2,
            "J3J1+J1J3": J3 @ J1 + J1 @ J3,
            "J3-J1J2": J3 - J1 @ J2,
        }
        for k, M in r.items():
            worst[k] = max(worst[k], float(np.abs(M).max()))
        worst["tr J2"] = max(worst["tr J2"], abs(float(np.trace(J2))))
        worst["tr J3"] = max(worst["tr J3"], abs(float(np.trace(J3))))
        pts.append(p)
    return Report.from_residuals("admissible_basis_check", worst, tol, pts)


# ---------------------------------------------------------------------------
# Generators


def _flat_blocks(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = 2 * m
    R = np.zeros((k, k))
    for b in range(m):
        R[2 * b + 1, 2 * b] = 1.0
        R[2 * b, 2 * b + 1] = -1.0
    Z = np.zeros((k, k))
    I = np.eye(k)
    J1 = np.block([[R, Z], [Z, -R]])
    J2 = np.block([[Z, I], [I, Z]])
    return J1, J2, J1 @ J2


def flat_model(m: int = 2) -> PqStructure:
    """Constant admissible triple on R^{4m}.

    J1 rotates each coordinate pair inside the x- and y-blocks (with opposite
    orientations), J2 swaps the x- and y-blocks, J3 = J1 J2.
    """
    if m < 2:
        raise GeometryError("m must be at least 2")
    chart = Chart.standard(m)
    mats = _flat_blocks(m)
    Js = [SymbolicEndomorphism.constant(chart, M) for M in mats]
    return PqStructure(*Js, chart=chart, name=f"flat(m={m})", meta={"generator": "flat", "m": m})


def conjugate_structure(
    H: PqStructure,
    G: EndomorphismField,
    G_inv: EndomorphismField | None = None,
) -> PqStructure:
    """Pointwise conjugation J_i -> G J_i G^{-1}.

    With a symbolic ``G_inv`` (or a unipotent triangular symbolic G, whose
    inverse is exact) the result stays symbolic; otherwise G^{-1} is taken
    numerically at each evaluation point.
    """
    if G_inv is None and G.entries is not None and H.is_symbolic:
        inv = symbolic_inverse(G.entries)
        if inv is not None:
            G_inv = SymbolicEndomorphism(H.chart, inv)
    if G_inv is not None and G.entries is not None and G_inv.entries is not None and H.is_symbolic:
        Js = [G @ J @ G_inv for J in H.J]
    else:
        Js = [ConjugatedEndomorphism(G, J) for J in H.J]
    return PqStructure(*Js, chart=H.chart, domain=H.domain, name=f"conj({H.name})",
                       meta={**H.meta, "conjugated": True})


def rotate_basis(H: PqStructure, R) -> PqStructure:
    """New admissible basis J'_j = sum_i R[i][j] J_i for R in SO(1,2).

    R may be a numeric 3x3 matrix or a 3x3 nested list of expressions.
    """
    R = [[as_expr(R[i][j]) for j in range(3)] for i in range(3)]
    Js = []
    for j in range(3):
        acc = None
        for i in range(3):
            if R[i][j].is_const(0.0):
                continue
            term = R[i][j] * H.J[i]
            acc = term if acc is None else acc + term
        Js.append(acc if acc is not None else 0.0 * H.J[0])
    return PqStructure(*Js, chart=H.chart, domain=H.domain, name=f"rot({H.name})", meta=H.meta)


def so12_matrix(theta: Sequence) -> list[list[Expr]]:
    """exp of boosts/rotation: B_12(t0) B_13(t1) R_23(t2), as expressions.

    Each angle may be a number or an expression; the product lies in SO(1,2).
    """
    reg = ex.DEFAULT_REGISTRY
    ch, sh = reg["cosh"], reg["sinh"]
    co, si = reg["cos"], reg["sin"]
    t0, t1, t2 = (as_expr(t) for t in theta)
    z, o = ex.ZERO, ex.ONE
    b12 = [[ex.call(ch, t0), ex.call(sh, t0), z], [ex.call(sh, t0), ex.call(ch, t0), z], [z, z, o]]
    b13 = [[ex.call(ch, t1), z, ex.call(sh, t1)], [z, o, z], [ex.call(sh, t1), z, ex.call(ch, t1)]]
    r23 = [[o, z, z], [z, ex.call(co, t2), -ex.call(si, t2)], [z, ex.call(si, t2), ex.call(co, t2)]]
    return _mat_mul(_mat_mul(b12, b13), r23)


def pullback_structure(H: PqStructure, psi: Sequence) -> PqStructure:
    """Pull H back along the map x -> psi(x): J'(x) = Dpsi^{-1} J(psi(x)) Dpsi.

    Dpsi must be unipotent triangular (e.g. psi_k = x_k + q_k(x_{k+1}, ...)),
    so the inverse is exact.  Integrability properties of H carry over.
    """
    chart = H.chart
    psi = [as_expr(c) for c in psi]
    D = [[ex.differentiate(psi[a], chart.names[b]) for b in range(chart.dim)] for a in range(chart.dim)]
    Dinv = symbolic_inverse(D)
    if Dinv is None:
        raise GeometryError("pullback needs a unipotent triangular Jacobian")
    if not H.is_symbolic:
        raise GeometryError("pullback needs a symbolic structure")
    sub = dict(zip(chart.names, psi))
    Js = []
    for J in H.J:
        moved = [[ex.substitute(e, sub) for e in row] for row in J.entries]
        Js.append(SymbolicEndomorphism(chart, _mat_mul(_mat_mul(Dinv, moved), D)))
    return PqStructure(*Js, chart=chart, name=f"pullback({H.name})", meta={**H.meta, "pullback": True})


def random_polynomial(chart: Chart, rng: np.random.Generator, variables: Sequence[str],
                      terms: int = 2, scale: float = 0.3, degree: int = 2) -> Expr:
    """A sparse random polynomial in ``variables`` (no constant term)."""
    acc = ex.ZERO
    if not variables:
        return acc
    for _ in range(terms):
        c = float(np.round(rng.uniform(-scale, scale), 3))
        mono: Expr = ex.Const(c)
        for _ in range(int(rng.integers(1, degree + 1))):
            mono = mono * ex.Var(str(rng.choice(list(variables))))
        acc = acc + mono
    return acc


def triangular_diffeo(chart: Chart, seed: int = 0, terms: int = 1, scale: float = 0.3) -> list[Expr]:
    """psi_k = x_k + q_k(later coordinates): a polynomial diffeomorphism of R^n."""
    rng = np.random.default_rng(seed)
    names = chart.names
    out = []
    for k, nm in enumerate(names):
        later = names[k + 1:]
        out.append(ex.Var(nm) + random_polynomial(chart, rng, later, terms=terms, scale=scale))
    return out


def diffeomorphic_model(m: int = 2, seed: int = 0) -> PqStructure:
    """The flat model pulled back by a random triangular polynomial diffeomorphism.

    Non-constant, yet para-quaternionic with all J_i integrable.
    """
    H = flat_model(m)
    psi = triangular_diffeo(H.chart, seed)
    out = pullback_structure(H, psi)
    out.name = f"diffeo(m={m}, seed={seed})"
    out.meta = {"generator": "diffeo", "m": m, "seed": seed}
    return out


def unipotent_field(chart: Chart, seed: int = 0, density: float = 0.15, scale: float = 0.3,
                    lower: bool = False) -> SymbolicEndomorphism:
    """Id + sparse strictly triangular polynomial part."""
    rng = np.random.default_rng(seed)
    n = chart.dim
    rows = [[ex.ONE if i == j else ex.ZERO for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(n):
            if (j > i and not lower) or (j < i and lower):
                if rng.random() < density:
                    rows[i][j] = random_polynomial(chart, rng, chart.names, terms=1, scale=scale)
    return SymbolicEndomorphism(chart, rows)


def random_structure(m: int = 2, seed: int = 0, commuting_with: int | None = None,
                     symbolic: bool = False, scale: float = 0.12) -> PqStructure:
    """A generic non-integrable admissible triple, for identity suites.

    The flat model is conjugated by G = Id + sparse random polynomial matrix.
    ``commuting_with = i`` projects the polynomial part onto the commutant of
    J_i, so J_i stays constant (hence integrable) while the others do not.
    With ``symbolic`` G = U L is a product of unipotent triangular fields and
    the result has expression entries.
    """
    H = flat_model(m)
    chart = H.chart
    rng = np.random.default_rng(seed)
    n = chart.dim
    if symbolic:
        if commuting_with is not None:
            raise GeometryError("symbolic random structures cannot be commutant-projected")
        U = unipotent_field(chart, seed=int(rng.integers(1 << 30)), scale=scale)
        L = unipotent_field(chart, seed=int(rng.integers(1 << 30)), scale=scale, lower=True)
        Uinv = SymbolicEndomorphism(chart, symbolic_inverse(U.entries))
        Linv = SymbolicEndomorphism(chart, symbolic_inverse(L.entries))
        out = conjugate_structure(H, U @ L, Linv @ Uinv)
    else:
        raw = [[random_polynomial(chart, rng, chart.names, terms=1, scale=scale)
                if rng.random() < 0.35 else ex.ZERO for _ in range(n)] for _ in range(n)]
        if commuting_with is not None:
            Ji = H.values(chart.point(np.zeros(n)))[commuting_with]
            raw = _commutant_part(raw, Ji, EPS[commuting_with])
        G = SymbolicEndomorphism(chart, [[(ex.ONE if a == b else ex.ZERO) + raw[a][b]
                                          for b in range(n)] for a in range(n)])
        out = PqStructure(*(ConjugatedEndomorphism(G, J) for J in H.J), chart=chart)
    tag = f", commuting J{commuting_with + 1}" if commuting_with is not None else ""
    out.name = f"random(m={m}, seed={seed}{tag})"
    out.meta = {"generator": "random", "m": m, "seed": seed, "commuting_with": commuting_with}
    return out


def _commutant_part(B: list[list[Expr]], J: np.ndarray, eps: int) -> list[list[Expr]]:
    """(B + eps J B J) / 2 for a constant J with J^2 = eps Id; commutes with J."""
    n = len(B)
    out = []
    for a in range(n):
        row = []
        for b in range(n):
            acc = 0.5 * B[a][b]
            for c in np.flatnonzero(J[a]):
                for d in np.flatnonzero(J[:, b]):
                    if not B[c][d].is_const(0.0):
                        acc = acc + (0.5 * eps * J[a, c] * J[d, b]) * B[c][d]
            row.append(acc)
        out.append(row)
    return out


# The counterexample family


@dataclass
class PropoData:
    f: list[Expr]
    s: Expr
    h: ex.Function


def propo_functions(chart: Chart, h: ex.Function) -> PropoData:
    k = 2 * chart.m
    xs = [ex.Var(f"x{i}") for i in range(1, k + 1)]
    ys = [ex.Var(f"y{i}") for i in range(1, k + 1)]
    sx = ex.ZERO
    sy = ex.ZERO
    for j in range(1, k):
        sx = sx + xs[j] ** 2
        sy = sy + ys[j] ** 2
    s = sx / sy
    f = [ex.call(h, s)]
    for i in range(1, k):
        f.append(xs[i] * sy / (ys[i] * sx))
    return PropoData(f, s, h)


def propo_f_matrix(m: int = 2, h: ex.Function | str = "h_one") -> list[list[Expr]]:
    """The diagonal matrix (f_ij) = f_i delta_ij."""
    if isinstance(h, str):
        h = ex.DEFAULT_REGISTRY[h]
    chart = Chart.standard(m)
    f = propo_functions(chart, h).f
    k = 2 * m
    return [[f[i] if i == j else ex.ZERO for j in range(k)] for i in range(k)]


def propo_domain(chart: Chart, data: PropoData, margin: float = 1e-6) -> Callable[[Point], bool]:
    """Non-singular points where every f_i != 0 and h(s) + s h'(s) != 0."""
    k = 2 * chart.m
    s = data.s
    cond = ex.call(data.h, s) + s * data.h.derivative(s)
    checks = list(data.f) + [cond, s]

    def ok(p: Point) -> bool:
        c = p.coords
        xs, ys = c[:k], c[k:]
        if np.any(np.abs(ys) < margin):
            return False
        if np.sum(xs[1:] ** 2) < margin or np.sum(ys[1:] ** 2) < margin:
            return False
        try:
            vals = [ex.evaluate(e, p) for e in checks]
        except ex.EvaluationError:
            return False
        return all(abs(v) >= margin for v in vals[:-1])

    return ok


def diagonal_f_structure(m: int, f: Sequence, domain: Callable[[Point], bool] | None = None,
                         name: str = "") -> PqStructure:
    """Admissible triple from non-vanishing functions f_1..f_2m.

    J2 = +Id on the x-block and -Id on the y-block;
    J1(d/dx_i) = J3(d/dx_i) = f_i d/dy_i and J1(d/dy_j) = -J3(d/dy_j) = -(1/f_j) d/dx_j.
    """
    if m < 2:
        raise GeometryError("m must be at least 2")
    chart = Chart.standard(m)
    k = 2 * m
    f = [as_expr(c) for c in f]
    if len(f) != k:
        raise GeometryError(f"need {k} functions, got {len(f)}")
    n = chart.dim
    Z = ex.ZERO
    J1 = [[Z] * n for _ in range(n)]
    J2 = [[Z] * n for _ in range(n)]
    J3 = [[Z] * n for _ in range(n)]
    for i in range(k):
        J2[i][i] = ex.ONE
        J2[k + i][k + i] = ex.Const(-1.0)
        J1[k + i][i] = f[i]
        J3[k + i][i] = f[i]
        J1[i][k + i] = -(ex.ONE / f[i])
        J3[i][k + i] = ex.ONE / f[i]
    Js = [SymbolicEndomorphism(chart, M) for M in (J1, J2, J3)]
    H = PqStructure(*Js, chart=chart, domain=domain, name=name or f"diagonal(m={m})",
                    meta={"generator": "diagonal", "m": m})
    H.f = f
    return H


def propo_structure(m: int = 2, h: ex.Function | str = "h_one") -> PqStructure:
    """The counterexample triple: f_1 = h(s), f_i = x_i S_y / (y_i S_x) for i >= 2,

    with S_x, S_y the sums of squares of x_2..x_2m and y_2..y_2m and s = S_x / S_y.
    Its domain excludes the singular locus and the zeros of h(s) + s h'(s).
    """
    if isinstance(h, str):
        h = ex.DEFAULT_REGISTRY[h]
    chart = Chart.standard(m)
    data = propo_functions(chart, h)
    H = diagonal_f_structure(m, data.f, domain=propo_domain(chart, data),
                             name=f"propo(m={m}, h={h.name})")
    H.meta = {"generator": "propo", "m": m, "h": h.name}
    H.propo = data
    return H


def propo_d_plus(H: PqStructure) -> list[VectorField]:
    """Frame d/dx_i + f_i d/dy_i of Ker(J3 - Id) for a diagonal-f structure."""
    chart = H.chart
    k = 2 * chart.m
    frame = []
    for i in range(k):
        comps = [ex.ZERO] * chart.dim
        comps[i] = ex.ONE
        comps[k + i] = H.f[i]
        frame.append(VectorField(chart, comps))
    return frame


# ---------------------------------------------------------------------------
# Structure files: {"dim", "coords", "J1", "J2", "J3"}


def structure_to_json(H: PqStructure) -> dict:
    if not H.is_symbolic:
        raise GeometryError("only expression-defined structures can be serialised")
    return {
        "dim": H.dim,
        "coords": list(H.chart.names),
        "J1": H.J1.to_strings(),
        "J2": H.J2.to_strings(),
        "J3": H.J3.to_strings(),
    }


def structure_from_json(doc: dict, registry: ex.Registry | None = None) -> PqStructure:
    try:
        names = doc["coords"]
        dim = int(doc["dim"])
        mats = [doc[k] for k in ("J1", "J2", "J3")]
    except KeyError as exc:
        raise GeometryError(f"structure document lacks key {exc}") from None
    chart = Chart(tuple(names))
    if chart.dim != dim:
        raise GeometryError("'dim' does not match the number of coordinates")
    Js = []
    for M in mats:
        rows = [[ex.parse_expr(str(e), names, registry) for e in row] for row in M]
        Js.append(SymbolicEndomorphism(chart, rows))
    return PqStructure(*Js, chart=chart, name=doc.get("name", "file"))


def save_structure(H: PqStructure, path: str | Path) -> None:
    Path(path).write_text(json.dumps(structure_to_json(H), indent=1), encoding="utf-8")


def load_structure(path: str | Path, registry: ex.Registry | None = None) -> PqStructure:
    H = structure_from_json(json.loads(Path(path).read_text(encoding="utf-8")), registry)
    H.name = Path(path).stem
    return H
