"""Integrability verdicts, normal forms of compatible triples and identity suites."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from . import pointwise as pw
from .connections import obata
from .expr import Expr, Point
from .geometry import (
    EPS,
    EndomorphismField,
    GeometryError,
    PqStructure,
    SingularPointError,
    as_point,
    eigen_frame,
    random_points,
)
from .report import Report, Verdict
from .tensorcalc import nijenhuis_arrays, torsion_TH_at

DEFAULT_PAIRS = 16


class HypothesisRegionEmpty(GeometryError):
    def __init__(self, what: str = ""):
        super().__init__("hypothesis region empty" + (f": {what}" if what else ""))


class NormalFormError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Compatible structures


@dataclass
class CompatibleStructure:
    """a1 J1 + a2 J2 + a3 J3 squaring to eps Id, with constant or expression coefficients."""

    H: PqStructure
    coeffs: tuple
    eps: int

    def __post_init__(self):
        self.coeffs = tuple(c if isinstance(c, Expr) else float(c) for c in self.coeffs)
        if self.eps not in (-1, 1):
            raise ValueError("eps must be -1 or +1")
        self._field = None
        self._grad = None

    @classmethod
    def constant(cls, H: PqStructure, coeffs) -> "CompatibleStructure":
        c = np.asarray(coeffs, dtype=float)
        q = pw.fiber_inner(c, c)
        if abs(abs(q) - 1.0) > 1e-10:
            raise ValueError(f"coefficients {c} do not square to +-Id (norm {q})")
        return cls(H, tuple(c), int(round(q)))

    def coefficients(self, p=None) -> np.ndarray:
        if p is None:
            if any(isinstance(c, Expr) for c in self.coeffs):
                raise ValueError("a point is needed for non-constant coefficients")
            return np.array(self.coeffs, dtype=float)
        p = as_point(p, self.H.chart)
        return np.array([ex.evaluate(c, p) if isinstance(c, Expr) else c for c in self.coeffs])

    def coefficient_jacobian(self, p) -> np.ndarray:
        """d_k a_i at p, shape (3, n)."""
        p = as_point(p, self.H.chart)
        if self._grad is None:
            self._grad = [ex.compile_exprs(ex.gradient(c, self.H.chart.names), self.H.chart.names)
                          if isinstance(c, Expr) else None for c in self.coeffs]
        n = self.H.dim
        return np.array([g(p) if g is not None else np.zeros(n) for g in self._grad])

    def norm_defect(self, p) -> float:
        a = self.coefficients(p)
        return abs(pw.fiber_inner(a, a) - self.eps)

    @property
    def field(self) -> EndomorphismField:
        if self._field is None:
            self._field = self.H.element(*self.coeffs)
        return self._field

    def value(self, p) -> np.ndarray:
        return pw.element(self.H.values(p), self.coefficients(p))


def _as_field(J) -> tuple[EndomorphismField, int | None]:
    if isinstance(J, CompatibleStructure):
        return J.field, J.eps
    return J, None


def _unit_pairs(n: int, count: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        X, Y = rng.standard_normal(n), rng.standard_normal(n)
        out.append((X / np.linalg.norm(X), Y / np.linalg.norm(Y)))
    return out


def pair_norm(T: np.ndarray, pairs) -> float:
    """max over tangent pairs of the max component of T(X, Y)."""
    X = np.array([x for x, _ in pairs])
    Y = np.array([y for _, y in pairs])
    vals = np.einsum("aij,pi,pj->pa", T, X, Y)
    return float(np.abs(vals).max())


def sample_domain(H: PqStructure, count: int, seed: int = 0, low: float = 0.5, high: float = 1.5,
                  max_tries: int = 4000) -> list[Point]:
    """Random points of the box inside the structure's admissible domain."""
    try:
        return random_points(H.chart, count, seed, low, high, accept=H.admits, max_tries=max_tries)
    except GeometryError:
        raise HypothesisRegionEmpty(f"no admissible sample for {H.name}") from None


def _admissible(H: PqStructure, samples) -> list[Point]:
    pts = [as_point(p, H.chart) for p in samples]
    kept = [p for p in pts if H.admits(p)]
    if not kept:
        raise HypothesisRegionEmpty(f"none of the {len(pts)} samples lies in the domain of {H.name}")
    return kept


# ---------------------------------------------------------------------------
# Integrability of single structures and distributions


def is_integrable(J, samples, tol: float = 1e-8, pairs: int = DEFAULT_PAIRS, seed: int = 0) -> Report:
    """max |N_J(X, Y)| over samples and random unit tangent pairs."""
    F, eps = _as_field(J)
    n = F.dim
    prs = _unit_pairs(n, pairs, seed)
    worst = 0.0
    worst_full = 0.0
    pts = []
    for p in samples:
        p = as_point(p, F.chart)
        val, der = F.jet(p)
        if eps is None:
            sq = val @ val
            eps = 1 if np.allclose(sq, np.eye(n), atol=1e-8) else -1
        N = pw.nijenhuis(val, der)
        worst = max(worst, pair_norm(N, prs))
        worst_full = max(worst_full, pw.norm(N))
        pts.append(p)
    rep = Report.from_residuals("is_integrable", {"nijenhuis": worst}, tol, pts)
    rep.details["nijenhuis_components"] = worst_full
    rep.details["eps"] = eps
    return rep


def involutive(frame: Sequence, samples, tol: float = 1e-8) -> Report:
    """Brackets of frame fields stay in their span (least-squares normal component)."""
    worst = 0.0
    pts = []
    for p in samples:
        jets = [X.jet(p) for X in frame]
        F = np.array([v for v, _ in jets]).T
        s = np.linalg.svd(F, compute_uv=False)
        if s[-1] < 1e-9 * max(1.0, s[0]):
            raise SingularPointError("distribution frame drops rank", p)
        for (x, dx), (y, dy) in itertools.combinations(jets, 2):
            br = pw.field_bracket(x, dx, y, dy)
            c, *_ = np.linalg.lstsq(F, br, rcond=None)
            worst = max(worst, float(np.abs(br - F @ c).max()))
        pts.append(p)
    return Report.from_residuals("involutive", {"normal_bracket": worst}, tol, pts)


def pde_residual(f: Sequence[Sequence], p, chart=None) -> float:
    """Integrability residual of the graph distribution {d/dx_i + sum_t f_it d/dy_t}."""
    k = len(f)
    if chart is None:
        from .geometry import Chart
        chart = Chart.standard(k // 2)
    names = chart.names
    xs, ys = names[:k], names[k:]
    F = [[ex.parse_expr(e, names) if isinstance(e, str) else ex.as_expr(e) for e in row] for row in f]
    p = as_point(p, chart)
    vals = np.array([[ex.evaluate(e, p) for e in row] for row in F])
    if abs(np.linalg.det(vals)) < 1e-12:
        raise SingularPointError("the matrix (f_ij) is singular", p)

    def d(e, v):
        return ex.evaluate(ex.differentiate(e, v), p)

    dx = [[[d(F[i][t], xs[s]) for s in range(k)] for t in range(k)] for i in range(k)]
    dy = [[[d(F[i][t], ys[s]) for s in range(k)] for t in range(k)] for i in range(k)]
    worst = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            for t in range(k):
                r = dx[j][t][i] - dx[i][t][j]
                r += sum(vals[i, s] * dy[j][t][s] - vals[j, s] * dy[i][t][s] for s in range(k))
                worst = max(worst, abs(r))
    return worst


def diagonal(fs: Sequence) -> list[list[Expr]]:
    k = len(fs)
    return [[ex.as_expr(fs[i]) if i == j else ex.ZERO for j in range(k)] for i in range(k)]


# ---------------------------------------------------------------------------
# Normal forms of compatible para-complex structures


@dataclass
class BazeForm:
    kind: str
    metrics: dict
    basis: np.ndarray | None = None  # columns: new basis in old coefficients
    order: tuple = ()
    signs: tuple = ()
    a: float | None = None
    q: int | None = None
    residual: float = 0.0

    @property
    def case(self) -> str:
        return self.kind


def _coeff_vectors(I_list, p) -> list[np.ndarray]:
    out = []
    for I in I_list:
        if isinstance(I, CompatibleStructure):
            out.append(I.coefficients(p))
        else:
            out.append(np.asarray(I, dtype=float).reshape(3))
    return out


def _is_admissible_basis(B: np.ndarray, tol: float = 1e-9) -> bool:
    G = B.T @ pw.FIBER_METRIC @ B
    if np.abs(G - pw.FIBER_METRIC).max() > tol:
        return False
    s, z = pw.fiber_product(B[:, 0], B[:, 1])
    return abs(s) <= tol and np.abs(z - B[:, 2]).max() <= tol


def baze_normal_form(I_list, p=None, tol: float = 1e-9) -> BazeForm:
    """Classify two or three compatible structures and build the adapted basis.

    Pairs are classified as degenerate or not.  For three pairwise degenerate
    para-complex structures the product of the pairwise metrics decides
    between the dependent form (I1 = J2, I2 = J1 - J2 + q J3,
    I3 = a J1 + J2 + a q J3) and the independent one (I1 = J2,
    I2 = J1 + J2 + J3, I3 = J1 + J2 - J3), after reordering and sign flips.
    """
    vecs = _coeff_vectors(I_list, p)
    norms = [pw.fiber_inner(v, v) for v in vecs]
    if any(abs(abs(q) - 1) > 1e-8 for q in norms):
        raise NormalFormError("inputs must square to +-Id")
    for u, v in itertools.combinations(vecs, 2):
        if np.linalg.norm(np.cross(u, v)) < 1e-9:
            raise NormalFormError("inputs are dependent")
    metrics = {f"<I{i + 1},I{j + 1}>": pw.fiber_inner(vecs[i], vecs[j])
               for i, j in itertools.combinations(range(len(vecs)), 2)}
    if len(vecs) == 2:
        u, v = vecs
        if norms[0] < 0 or norms[1] < 0:
            return BazeForm("non-degenerate pair (complex)", metrics)
        g = pw.fiber_inner(u, v)
        kind = "degenerate pair" if abs(abs(g) - 1) <= tol else "non-degenerate pair"
        return BazeForm(kind, metrics)
    if len(vecs) != 3:
        raise NormalFormError("expected two or three structures")
    if any(q < 0 for q in norms):
        raise NormalFormError("triple normal forms need para-complex structures")
    if any(abs(abs(g) - 1) > 1e-8 for g in metrics.values()):
        raise NormalFormError("some pair spans a non-degenerate plane")
    prod = float(np.prod(list(metrics.values())))
    best: BazeForm | None = None
    for order in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            I1, I2, I3 = (signs[k] * vecs[order[k]] for k in range(3))
            for cand in (_case_three(I1, I2, I3) if prod < 0 else _case_two(I1, I2, I3)):
                if cand is None or (best is not None and cand.residual >= best.residual):
                    continue
                cand.order, cand.signs = order, signs
                best = cand
    if best is None:
        raise NormalFormError("no admissible normal form found")
    best.metrics = metrics
    best.metrics["product"] = prod
    return best


def _case_three(I1, I2, I3):
    B = np.column_stack([(I2 + I3) / 2 - I1, I1, (I2 - I3) / 2])
    if not _is_admissible_basis(B):
        return [None]
    pattern = [np.array([0, 1, 0]), np.array([1, 1, 1]), np.array([1, 1, -1])]
    res = max(float(np.abs(B @ c - I).max()) for c, I in zip(pattern, (I1, I2, I3)))
    return [BazeForm("case iii", {}, B, residual=res)]


def _case_two(I1, I2, I3):
    null = I1 + I2
    if pw.fiber_inner(I1, I2) > 0 or pw.fiber_inner(I1, I3) < 0:
        return [None]
    a = float(np.dot(I3 - I1, null) / np.dot(null, null))
    if np.abs(I3 - I1 - a * null).max() > 1e-8:
        return [None]
    t = np.array([1.0, 0.0, 0.0])
    e1 = t - pw.fiber_inner(t, I1) * I1
    e1 = e1 / np.sqrt(-pw.fiber_inner(e1, e1))
    e3 = pw.fiber_product(e1, I1)[1]
    c1 = -pw.fiber_inner(null, e1)
    c3 = pw.fiber_inner(null, e3)
    if c1 < 0:
        e1, e3, c1, c3 = -e1, -e3, -c1, -c3
    if c1 < 1e-12:
        return [None]
    out = []
    for q in (1, -1):
        phi = q * np.log(c1)
        f1 = np.cosh(phi) * e1 + np.sinh(phi) * e3
        f3 = np.sinh(phi) * e1 + np.cosh(phi) * e3
        B = np.column_stack([f1, I1, f3])
        if not _is_admissible_basis(B, 1e-8):
            out.append(None)
            continue
        pattern = [np.array([0, 1, 0]), np.array([1, -1, q]), np.array([a, 1, a * q])]
        res = max(float(np.abs(B @ c - I).max()) for c, I in zip(pattern, (I1, I2, I3)))
        out.append(BazeForm("case ii", {}, B, a=a, q=q, residual=res))
    return out


# ---------------------------------------------------------------------------
# Case classification


def _pair_cases(vecs, eps_list, tol):
    """Cases applying at one point, with the metric data used."""
    cases = []
    for i, j in itertools.combinations(range(len(vecs)), 2):
        u, v = vecs[i], vecs[j]
        if np.linalg.norm(np.cross(u, v)) < 1e-9:
            continue
        if eps_list[i] < 0 or eps_list[j] < 0:
            cases.append(("1", (i, j)))
        elif abs(abs(pw.fiber_inner(u, v)) - 1) > tol:
            cases.append(("2", (i, j)))
    if len(vecs) == 3 and all(e > 0 for e in eps_list):
        pairwise_indep = all(np.linalg.norm(np.cross(vecs[i], vecs[j])) >= 1e-9
                             for i, j in itertools.combinations(range(3), 2))
        degenerate = all(abs(abs(pw.fiber_inner(vecs[i], vecs[j])) - 1) <= tol
                         for i, j in itertools.combinations(range(3), 2))
        dependent = abs(np.linalg.det(np.array(vecs))) <= tol
        if pairwise_indep and degenerate and dependent:
            cases.append(("3", (0, 1, 2)))
    return cases


def theorem_sug_classify(I_list: Sequence[CompatibleStructure], samples, tol: float = 1e-8,
                         torsion_tol: float | None = None) -> Report:
    """Find which integrability criterion applies at every sample.

    Each structure must be integrable.  When one case holds at all samples,
    the conclusion (vanishing torsion of the span) is cross-checked.
    """
    torsion_tol = tol if torsion_tol is None else torsion_tol
    H = I_list[0].H
    samples = _admissible(H, samples)
    for k, I in enumerate(I_list):
        r = is_integrable(I, samples, tol)
        if not r.passed:
            return Report("theorem_sug_classify", Verdict.SKIPPED, {f"N(I{k + 1})": r.max_residual}, tol,
                          samples, case="none", messages=[f"hypothesis unmet: I{k + 1} is not integrable"])
    common: set | None = None
    per_point = []
    for p in samples:
        vecs = [I.coefficients(p) for I in I_list]
        found = _pair_cases(vecs, [I.eps for I in I_list], tol)
        labels = {c for c, _ in found}
        per_point.append({"cases": sorted(labels),
                          "metrics": {f"<I{i + 1},I{j + 1}>": pw.fiber_inner(vecs[i], vecs[j])
                                      for i, j in itertools.combinations(range(len(vecs)), 2)},
                          "det": float(np.linalg.det(np.array(vecs))) if len(vecs) == 3 else None})
        common = labels if common is None else common & labels
    from .tensorcalc import torsion_TP_at

    tp = max(pw.norm(torsion_TP_at(H, p)) for p in samples)
    details = {"per_point": per_point, "torsion_TP": tp}
    if not common:
        bad = next(i for i, d in enumerate(per_point) if not d["cases"] or
                   (common is not None and not set(d["cases"]) & set(per_point[0]["cases"])))
        details["failing_point"] = bad
        details["consistent_with_torsion"] = tp > torsion_tol
        return Report("theorem_sug_classify", Verdict.FAIL, {"torsion_TP": tp}, torsion_tol, samples,
                      case="none", details=details,
                      messages=[f"no case applies (sample {bad}: metrics {per_point[bad]['metrics']})"])
    case = min(common)
    rep = Report.from_residuals("theorem_sug_classify", {"torsion_TP": tp}, torsion_tol, samples,
                                case=case, details=details)
    return rep


# ---------------------------------------------------------------------------
# Integrability of the degenerate triple


def degenerate_triple(H: PqStructure) -> list[CompatibleStructure]:
    """I1 = J2, I2 = J1 + J2 + J3, I3 = J1 + J2 - J3."""
    return [CompatibleStructure.constant(H, c) for c in ((0, 1, 0), (1, 1, 1), (1, 1, -1))]


def lemma_pe_check(H: PqStructure, samples, tol: float = 1e-8) -> Report:
    """Compare integrability of the degenerate triple with (J2 integrable, Ker(J3 - Id) involutive)."""
    samples = _admissible(H, samples)
    left = {f"N(I{k + 1})": is_integrable(I, samples, tol).max_residual
            for k, I in enumerate(degenerate_triple(H))}
    right = {"N(J2)": is_integrable(CompatibleStructure.constant(H, (0, 1, 0)), samples, tol).max_residual}
    frame = eigen_frame(H.J3, 1.0, samples[0])
    right["D+ brackets"] = involutive(frame, samples, tol).max_residual
    lpass = all(v <= tol for v in left.values())
    rpass = all(v <= tol for v in right.values())
    agree = lpass == rpass
    res = {**left, **right}
    verdict = Verdict.PASS if (lpass and rpass) else Verdict.FAIL
    if not agree:
        verdict = Verdict.ERROR
    return Report("lemma_pe_check", verdict, res, tol, samples,
                  case="agree" if agree else "disagree",
                  details={"left": lpass, "right": rpass, "agreement": agree})


# ---------------------------------------------------------------------------
# Identity suite


class _Ctx:
    """Tensors at one point used by the identities."""

    def __init__(self, H: PqStructure, p: Point, need_connection: bool):
        self.Js, self.Ds = H.jets(p)
        self.J1, self.J2, self.J3 = self.Js
        self.N = nijenhuis_arrays(H, p)
        self.N1, self.N2, self.N3 = self.N
        self.TH = torsion_TH_at(H, p)
        self.e1, self.e2, self.e3 = EPS
        self.bracket = {}
        for i, j in itertools.combinations_with_replacement(range(3), 2):
            self.bracket[i, j] = pw.nijenhuis_bracket(self.Js[i], self.Ds[i], self.Js[j], self.Ds[j])
        self.Tnab = obata(H, p).torsion() if need_connection else None


L = pw.apply_left
F = pw.feed


def _product_rule(A, B, NA, NB, eA, eB, NAB):
    rhs = (F(NA, B, B) - eA * NB - L(A, F(NB, A)) - L(A, F(NB, None, A)) - eB * NA
           + F(NB, A, A) - L(B, F(NA, None, B)) - L(B, F(NA, B)))
    return 2 * NAB - rhs


def _bracket_from_torsion(A, B, T, AB):
    # the last term vanishes for anti-commuting A, B
    rhs = (L(A, F(T, B) + F(T, None, B)) + L(B, F(T, None, A) + F(T, A))
           - F(T, A, B) - F(T, B, A) - L(A @ B + B @ A, T))
    return AB - rhs


def _identities_general(c: _Ctx) -> dict[str, np.ndarray]:
    out = {}
    for i, (J, N) in enumerate(zip(c.Js, c.N)):
        out[f"N symmetry J{i + 1}"] = np.concatenate([F(N, J) - F(N, None, J), F(N, J) + L(J, N)])
        out[f"[J{i + 1},J{i + 1}] = 2N"] = c.bracket[i, i] - 2 * N
    # anti-commuting products: J1J2 = J3, J2J3 = -J1, J3J1 = J2
    out["product J1J2"] = _product_rule(c.J1, c.J2, c.N1, c.N2, c.e1, c.e2, c.N3)
    out["product J2J3"] = _product_rule(c.J2, c.J3, c.N2, c.N3, c.e2, c.e3, c.N1)
    out["product J3J1"] = _product_rule(c.J3, c.J1, c.N3, c.N1, c.e3, c.e1, c.N2)
    if c.Tnab is not None:
        out["obata torsion"] = c.Tnab - c.TH
        for (i, j), B in c.bracket.items():
            out[f"bracket via connection [J{i + 1},J{j + 1}]"] = _bracket_from_torsion(c.Js[i], c.Js[j], c.Tnab, B)
    return out


def _identities_j1(c: _Ctx) -> dict[str, np.ndarray]:
    """Identities that need J1 integrable."""
    J1, J2, J3, N2, TH = c.J1, c.J2, c.J3, c.N2, c.TH
    e1, e2, e3 = c.e1, c.e2, c.e3
    out = {}
    out["torsion from N(J2)"] = -12 * TH - (3 * e2 * N2 - e3 * L(J1, F(N2, J1)) - e3 * L(J1, F(N2, None, J1))
                                          + e3 * F(N2, J1, J1))
    out["N(J3) from N(J2)"] = 2 * c.N3 - (-e1 * N2 - L(J1, F(N2, J1)) - L(J1, F(N2, None, J1)) + F(N2, J1, J1))
    K = F(N2, J1) + F(N2, None, J1)
    out["[J1,J2] from N(J2)"] = 2 * c.bracket[0, 1] - (e2 * L(J3, N2) - e3 * L(J3, F(N2, J1, J1)) - e2 * L(J2, K))
    out["T^H(J1.,.) sum"] = 6 * (F(TH, J1) + F(TH, None, J1)) - (
        e3 * L(J1, F(N2, J1, J1)) - e2 * L(J1, N2) - e2 * K)
    out["T^H(J2.,.) sum"] = 6 * (F(TH, J2) + F(TH, None, J2)) - (
        3 * e2 * L(J2, N2) - e3 * L(J2, F(N2, J1, J1)))
    out["T^H(J1.,J2.) sum"] = 6 * (F(TH, J1, J2) + F(TH, J2, J1)) - (
        2 * e2 * L(J2, K) + e3 * L(J3, F(N2, J1, J1) - e1 * N2))
    return out


def _identities_j2(c: _Ctx) -> dict[str, np.ndarray]:
    """Identities that need J2 integrable."""
    J1, J2, J3, N1, N3, TH = c.J1, c.J2, c.J3, c.N1, c.N3, c.TH
    E = F(N1, J2, J2) + N1
    Fm = F(N1, J2) + F(N1, None, J2)
    out = {}
    out["torsion from N(J1)"] = 12 * TH - (3 * N1 - F(N1, J2, J2) + L(J2, Fm))
    out["N(J3) from N(J1)"] = 2 * N3 - (F(N1, J2, J2) - N1 - L(J2, F(N1, None, J2)) - L(J2, F(N1, J2)))
    out["[J1,J2] from N(J1)"] = 2 * c.bracket[0, 1] - (L(J1, Fm) + L(J3, E))
    out["[J1,J3] from N(J1)"] = 2 * c.bracket[0, 2] - (Fm - L(J2, E))
    out["[J2,J3] from N(J1)"] = 2 * c.bracket[1, 2] - (L(J1, E) + L(J3, Fm))
    out["N(J1) from N(J3)"] = 2 * N1 - (-N3 - L(J2, F(N3, J2)) - L(J2, F(N3, None, J2)) + F(N3, J2, J2))
    sym = {
        "T^H(J1.,J2.) sum": (F(TH, J1, J2) + F(TH, J2, J1), -2 * L(J1, Fm) - L(J3, F(N1, J2, J2) - N1)),
        "T^H(J1.,J3.) sum": (F(TH, J1, J3) + F(TH, J3, J1), -Fm + L(J2, E)),
        "T^H(J2.,J3.) sum": (F(TH, J2, J3) + F(TH, J3, J2), -L(J1, 3 * F(N1, J2, J2) + N1)),
        "T^H(J1.,.) sum": (F(TH, J1) + F(TH, None, J1), -L(J1, 3 * N1 + F(N1, J2, J2))),
        "T^H(J2.,.) sum": (F(TH, J2) + F(TH, None, J2), L(J2, E) + Fm),
        "T^H(J3.,.) sum": (F(TH, None, J3) + F(TH, J3), -2 * L(J1, Fm) + L(J3, F(N1, J2, J2) - N1)),
    }
    for k, (lhs, rhs) in sym.items():
        out[k + " (J2 integrable)"] = 6 * lhs - rhs
    return out


def _pe_conditions(c: _Ctx) -> dict[str, np.ndarray]:
    E = F(c.N1, c.J2, c.J2) + c.N1
    return {
        "(Id + J3) E": E + L(c.J3, E),
        "N(J1)(J3.,J3.) - J3 N(J1)": F(c.N1, c.J3, c.J3) - L(c.J3, c.N1),
        "J3 N(J3) - N(J3)": L(c.J3, c.N3) - c.N3,
    }


def modulo_residual(Js: np.ndarray, T: np.ndarray) -> float:
    """Size of the representative of T in the canonical complement (zero iff T is congruent to 0)."""
    return pw.norm(pw.complement_projection(Js, T)[0])


def proof_identity_suite(H: PqStructure, samples, tol: float = 1e-8, pairs: int = DEFAULT_PAIRS,
                         seed: int = 0, companions: Sequence[CompatibleStructure] = (),
                         with_connection: bool = True) -> Report:
    """Residuals of the Nijenhuis and torsion identities behind the integrability criteria.

    Identities whose hypothesis (J1 or J2 integrable) fails at some sample are
    skipped and listed as unmet.  ``companions`` are integrable compatible
    structures; for each, N of its expansion in the basis is checked to vanish
    modulo delta-images of N(P)-valued forms.
    """
    samples = _admissible(H, samples)
    prs = _unit_pairs(H.dim, pairs, seed)
    res: dict[str, float] = {}
    conditions: dict[str, float] = {}
    hyp = {"J1 integrable": 0.0, "J2 integrable": 0.0}
    ctxs = []
    for p in samples:
        c = _Ctx(H, p, with_connection)
        ctxs.append(c)
        hyp["J1 integrable"] = max(hyp["J1 integrable"], pair_norm(c.N1, prs))
        hyp["J2 integrable"] = max(hyp["J2 integrable"], pair_norm(c.N2, prs))
    unmet = [h for h, v in hyp.items() if v > tol]

    def record(d: dict[str, np.ndarray], target: dict):
        for k, T in d.items():
            target[k] = max(target.get(k, 0.0), pair_norm(T, prs))

    for c in ctxs:
        record(_identities_general(c), res)
        if "J1 integrable" not in unmet:
            record(_identities_j1(c), res)
        if "J2 integrable" not in unmet:
            record(_identities_j2(c), res)
            record(_pe_conditions(c), conditions)
    if conditions:
        vals = list(conditions.values())
        # each condition implies the others (to ten times the tolerance)
        res["J2-integrable chain"] = max(vals) / 10.0 if min(vals) <= tol else 0.0
    skipped = []
    for I in companions:
        name = f"companion {tuple(round(float(x), 3) if not isinstance(x, Expr) else str(x) for x in I.coeffs)}"
        if is_integrable(I, samples, tol).max_residual > tol:
            skipped.append(name)
            continue
        worst = 0.0
        for p, c in zip(samples, ctxs):
            a = I.coefficients(p)
            T = sum(a[i] ** 2 * c.N[i] for i in range(3))
            for i, j in itertools.combinations(range(3), 2):
                T = T + a[i] * a[j] * c.bracket[i, j]
            worst = max(worst, modulo_residual(c.Js, T))
        res[name + " modulo"] = worst
    rep = Report.from_residuals("proof_identity_suite", res, tol, samples)
    rep.details["hypotheses"] = hyp
    rep.details["pe_conditions"] = conditions
    rep.details["unmet"] = unmet
    for h in unmet:
        rep.messages.append(f"hypothesis unmet: {h}; dependent identities skipped")
    for s in skipped:
        rep.messages.append(f"hypothesis unmet: {s} is not integrable")
    return rep


# ---------------------------------------------------------------------------
# Para-quaternionic verdict


def identity_image_residual(Js: np.ndarray, T: np.ndarray) -> float:
    """Least-squares distance of T from delta(sum alpha_i (x) J_i + alpha (x) Id)."""
    n = Js.shape[1]
    mats = list(Js) + [np.eye(n)]
    cols = []
    for M in mats:
        for k in range(n):
            eta = np.zeros((n, n, n))
            eta[k] = M
            cols.append(pw.delta(eta).reshape(-1))
    A = np.array(cols).T
    sol, *_ = np.linalg.lstsq(A, T.reshape(-1), rcond=None)
    return float(np.abs(A @ sol - T.reshape(-1)).max())


def quaternionicity_witness(H: PqStructure, samples=None, tol: float = 1e-8, count: int = 10,
                            seed: int = 0) -> Report:
    """max |T^P| over samples; on failure also the obstruction to writing T^H as a delta-image."""
    from .tensorcalc import torsion_TP_at

    samples = sample_domain(H, count, seed) if samples is None else _admissible(H, samples)
    tp = []
    obstruction = []
    for p in samples:
        tp.append(pw.norm(torsion_TP_at(H, p)))
        obstruction.append(identity_image_residual(H.values(p), torsion_TH_at(H, p)))
    rep = Report.from_residuals("quaternionicity_witness", {"torsion_TP": max(tp)}, tol, samples)
    rep.details["per_point_TP"] = tp
    rep.details["min_TP"] = min(tp)
    rep.details["image_obstruction"] = max(obstruction)
    rep.case = "para-quaternionic" if rep.passed else "not para-quaternionic"
    return rep
