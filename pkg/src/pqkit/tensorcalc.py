"""Tensor fields on a chart and the torsion calculus of admissible triples.

Two-forms and endomorphism-valued one-forms are represented lazily: each
wraps a function returning its component array at a point (see
:mod:`pqkit.pointwise` for the layouts).  Operators compose these functions,
so nothing is evaluated until a point is supplied.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from . import pointwise as pw
from .geometry import (
    Chart,
    EndomorphismField,
    OneForm,
    PqStructure,
    VectorField,
    as_point,
)
from .expr import Expr, Point

EPS = pw.EPS


class VectorTwoForm:
    """Alternating TM-valued two-form, evaluated lazily."""

    def __init__(self, chart: Chart, components: Callable[[Point], np.ndarray], name: str = "",
                 table: list | None = None):
        self.chart = chart
        self._fn = components
        self.name = name
        self.table = table

    def at(self, p) -> np.ndarray:
        return self._fn(as_point(p, self.chart))

    def __call__(self, p, X, Y) -> np.ndarray:
        return pw.evaluate_two_form(self.at(p), np.asarray(X, float), np.asarray(Y, float))

    def __add__(self, other: "VectorTwoForm") -> "VectorTwoForm":
        return VectorTwoForm(self.chart, lambda p: self.at(p) + other.at(p), f"({self.name}+{other.name})")

    def __sub__(self, other: "VectorTwoForm") -> "VectorTwoForm":
        return VectorTwoForm(self.chart, lambda p: self.at(p) - other.at(p), f"({self.name}-{other.name})")

    def __rmul__(self, c: float) -> "VectorTwoForm":
        return VectorTwoForm(self.chart, lambda p: c * self.at(p), f"{c}*{self.name}")

    def __neg__(self):
        return (-1.0) * self

    def norm(self, p) -> float:
        return pw.norm(self.at(p))

    @classmethod
    def constant(cls, chart: Chart, T: np.ndarray, name: str = "const") -> "VectorTwoForm":
        T = np.array(T, dtype=float)
        return cls(chart, lambda p: T, name)

    @classmethod
    def zero(cls, chart: Chart) -> "VectorTwoForm":
        return cls.constant(chart, np.zeros((chart.dim,) * 3), "0")

    def __repr__(self):
        return f"VectorTwoForm({self.name})"


class EndoValuedOneForm:
    """One-form with values in End(TM): X -> eta(X), evaluated lazily."""

    def __init__(self, chart: Chart, components: Callable[[Point], np.ndarray], name: str = ""):
        self.chart = chart
        self._fn = components
        self.name = name

    def at(self, p) -> np.ndarray:
        return self._fn(as_point(p, self.chart))

    def __call__(self, p, X) -> np.ndarray:
        return np.einsum("kab,k->ab", self.at(p), np.asarray(X, float))

    def __add__(self, other: "EndoValuedOneForm") -> "EndoValuedOneForm":
        return EndoValuedOneForm(self.chart, lambda p: self.at(p) + other.at(p))

    def __sub__(self, other: "EndoValuedOneForm") -> "EndoValuedOneForm":
        return EndoValuedOneForm(self.chart, lambda p: self.at(p) - other.at(p))

    def __rmul__(self, c: float) -> "EndoValuedOneForm":
        return EndoValuedOneForm(self.chart, lambda p: c * self.at(p))

    @classmethod
    def constant(cls, chart: Chart, eta: np.ndarray) -> "EndoValuedOneForm":
        eta = np.array(eta, dtype=float)
        return cls(chart, lambda p: eta)

    @classmethod
    def tensor(cls, form: OneForm, J: EndomorphismField) -> "EndoValuedOneForm":
        """alpha (x) J."""
        return cls(form.chart, lambda p: np.einsum("k,ab->kab", form.value(p), J.value(p)))


def _one_form_at(alpha, p, n) -> np.ndarray:
    if alpha is None:
        return np.zeros(n)
    if isinstance(alpha, OneForm):
        return alpha.value(p)
    return np.asarray(alpha, dtype=float).reshape(n)


# ---------------------------------------------------------------------------
# Brackets


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    """[X, Y]^k = X(Y^k) - Y(X^k), symbolically."""
    if X.chart.names != Y.chart.names:
        raise ValueError("vector fields live on different charts")
    names = X.chart.names
    comps = []
    for k in range(len(names)):
        acc = ex.ZERO
        for i, v in enumerate(names):
            if not X.components[i].is_const(0.0):
                acc = acc + X.components[i] * ex.differentiate(Y.components[k], v)
            if not Y.components[i].is_const(0.0):
                acc = acc - Y.components[i] * ex.differentiate(X.components[k], v)
        comps.append(acc)
    return VectorField(X.chart, comps)


def apply_endomorphism(J: EndomorphismField, X: VectorField) -> VectorField:
    if J.entries is None:
        raise ValueError("symbolic application needs an expression-valued endomorphism")
    n = J.dim
    comps = []
    for a in range(n):
        acc = ex.ZERO
        for b in range(n):
            e = J.entries[a][b]
            if not e.is_const(0.0) and not X.components[b].is_const(0.0):
                acc = acc + e * X.components[b]
        comps.append(acc)
    return VectorField(X.chart, comps)


def nijenhuis(J: EndomorphismField, eps: int = 1) -> VectorTwoForm:
    """Nijenhuis tensor of an almost eps-complex structure, in closed form."""

    def comps(p):
        val, der = J.jet(p)
        return pw.nijenhuis(val, der)

    return VectorTwoForm(J.chart, comps, "N")


def nijenhuis_table(J: EndomorphismField) -> list[list[list[Expr]]]:
    """Expression components N[a][i][j] of the Nijenhuis tensor of an expression field."""
    if J.entries is None:
        raise ValueError("component tables need an expression-valued endomorphism")
    n = J.dim
    names = J.chart.names
    E = J.entries
    d = [[[ex.differentiate(E[a][b], names[k]) for b in range(n)] for a in range(n)] for k in range(n)]
    table = [[[ex.ZERO] * n for _ in range(n)] for _ in range(n)]
    for a in range(n):
        for i in range(n):
            for j in range(i + 1, n):
                acc = ex.ZERO
                for k in range(n):
                    acc = acc + E[k][i] * d[k][a][j] - E[k][j] * d[k][a][i]
                for c in range(n):
                    acc = acc - E[a][c] * (d[i][c][j] - d[j][c][i])
                table[a][i][j] = acc
                table[a][j][i] = -acc
    return table


def nijenhuis_four_bracket(J: EndomorphismField, eps: int, X: VectorField, Y: VectorField, p) -> np.ndarray:
    """eps[X,Y] + [JX,JY] - J[JX,Y] - J[X,JY] at p, straight from the definition."""
    p = as_point(p, J.chart)
    val, der = J.jet(p)
    x, dx = X.jet(p)
    y, dy = Y.jet(p)
    return pw.nijenhuis_by_brackets(val, der, eps, x, dx, y, dy)


def nijenhuis_bracket(A: EndomorphismField, B: EndomorphismField) -> VectorTwoForm:
    """The Frölicher-Nijenhuis bracket [A, B]; [J, J] = 2 N_J."""

    def comps(p):
        a, da = A.jet(p)
        b, db = B.jet(p)
        return pw.nijenhuis_bracket(a, da, b, db)

    return VectorTwoForm(A.chart, comps, "[A,B]")


# ---------------------------------------------------------------------------
# Torsion calculus


def delta_map(eta: EndoValuedOneForm) -> VectorTwoForm:
    return VectorTwoForm(eta.chart, lambda p: pw.delta(eta.at(p)), "delta")


def pi02(J: EndomorphismField, eps: int, T: VectorTwoForm) -> VectorTwoForm:
    return VectorTwoForm(T.chart, lambda p: pw.pi02(J.value(p), eps, T.at(p)), "Pi02")


def projector_P(H: PqStructure, T: VectorTwoForm) -> VectorTwoForm:
    return VectorTwoForm(T.chart, lambda p: pw.project_P(H.values(p), T.at(p)), "P")


def pi_section(H: PqStructure, T: VectorTwoForm) -> EndoValuedOneForm:
    return EndoValuedOneForm(T.chart, lambda p: pw.pi_section(H.values(p), T.at(p)), "pi")


def nijenhuis_arrays(H: PqStructure, p) -> np.ndarray:
    """Components of N_{J1}, N_{J2}, N_{J3} at p, shape (3, n, n, n)."""
    vals, ders = H.jets(p)
    return np.array([pw.nijenhuis(vals[i], ders[i]) for i in range(3)])


def torsion_TH_at(H: PqStructure, p) -> np.ndarray:
    N = nijenhuis_arrays(H, p)
    return -(1.0 / 6.0) * np.einsum("i,iajk->ajk", np.asarray(EPS, float), N)


def torsion_TH(H: PqStructure) -> VectorTwoForm:
    """Torsion of the almost para-hypercomplex structure: -(1/6) sum eps_i N_{J_i}."""
    return VectorTwoForm(H.chart, lambda p: torsion_TH_at(H, p), "T^H")


class TauForms:
    """The three one-forms tau_i of a two-form; ``at(p)`` has shape (3, n)."""

    def __init__(self, H: PqStructure, T: VectorTwoForm):
        self.H = H
        self.T = T

    def at(self, p) -> np.ndarray:
        Js = self.H.values(p)
        return pw.tau_forms(Js, pw.project_P(Js, self.T.at(p)))

    def __call__(self, p, X) -> np.ndarray:
        return self.at(p) @ np.asarray(X, float)

    def __getitem__(self, i: int) -> Callable:
        return lambda p, X: self(p, X)[i]


def tau_forms(H: PqStructure, T: VectorTwoForm) -> TauForms:
    return TauForms(H, T)


def torsion_TP_at(H: PqStructure, p) -> np.ndarray:
    Js = H.values(p)
    TP, _ = pw.complement_projection(Js, torsion_TH_at(H, p))
    return TP


def torsion_TP(H: PqStructure) -> VectorTwoForm:
    """Torsion of the almost para-quaternionic structure spanned by H."""
    return VectorTwoForm(H.chart, lambda p: torsion_TP_at(H, p), "T^P")


def complement_projection(H: PqStructure, T: VectorTwoForm) -> VectorTwoForm:
    """Projection onto the canonical complement of delta(Omega^1(N(P)))."""
    return VectorTwoForm(T.chart, lambda p: pw.complement_projection(H.values(p), T.at(p))[0], "C")


def s_alpha(H: PqStructure, alpha) -> EndoValuedOneForm:
    return EndoValuedOneForm(H.chart, lambda p: pw.s_alpha(H.values(p), _one_form_at(alpha, p, H.dim)), "S")


def t_alpha(H: PqStructure, alpha) -> EndoValuedOneForm:
    return EndoValuedOneForm(H.chart, lambda p: pw.t_alpha(H.values(p), _one_form_at(alpha, p, H.dim)), "T")


def e_alpha(H: PqStructure, alpha) -> EndoValuedOneForm:
    return EndoValuedOneForm(H.chart, lambda p: pw.e_alpha(H.values(p), _one_form_at(alpha, p, H.dim)), "E")


def centralizer_residual(A: np.ndarray, H: PqStructure, p) -> float:
    """max_i |[A, J_i(p)]|."""
    return pw.centralizer_residual(np.asarray(A, float), H.values(p))


def normalizer_residual(A: np.ndarray, H: PqStructure, p) -> float:
    """max_i distance of [A, J_i(p)] from span{J_1, J_2, J_3}(p)."""
    return pw.normalizer_residual(np.asarray(A, float), H.values(p))


def random_tangent_pairs(n: int, count: int, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(rng.standard_normal(n), rng.standard_normal(n)) for _ in range(count)]
