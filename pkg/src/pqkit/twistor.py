"""Twistor (eps = -1) and reflector (eps = +1) spaces of an admissible triple.

A point of the total space is (x, u): x in the base chart and u a chart
on the fiber quadric {-a^2 + b^2 + c^2 = eps} of coefficient vectors
(a, b, c) of A = a J1 + b J2 + c J3.

* eps = -1: u = (b, c) on one sheet, a = sheet * sqrt(1 + b^2 + c^2).
* eps = +1: u = (s, t), a = s, b = sqrt(1 + s^2) cos t, c = sqrt(1 + s^2) sin t.

Tangent vectors are split with the connection form omega of a minimal
connection (omega[k] maps the coefficients of A to those of nabla_k A): the
vertical part of (xdot, adot) is adot + omega(xdot) a.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import pointwise as pw
from .connections import ConnectionJet, fiber_form, minimal
from .expr import Point
from .geometry import GeometryError, PqStructure, as_point
from .integrability import CompatibleStructure, is_integrable, pair_norm, _unit_pairs
from .report import Report, Verdict
from .tensorcalc import torsion_TP_at

FD_STEP = 1e-4


# ---------------------------------------------------------------------------
# Fiber quadrics


@dataclass(frozen=True)
class FiberPoint:
    base: Point
    eps: int
    u: tuple[float, float]
    sheet: int = 1

    @property
    def coeffs(self) -> np.ndarray:
        return quadric_point(self.eps, self.u, self.sheet)

    def endomorphism(self, H: PqStructure) -> np.ndarray:
        return pw.element(H.values(self.base), self.coeffs)

    def quadric_defect(self) -> float:
        a = self.coeffs
        return abs(pw.fiber_inner(a, a) - self.eps)

    @classmethod
    def from_coeffs(cls, base: Point, coeffs, tol: float = 1e-12) -> "FiberPoint":
        a, b, c = (float(v) for v in coeffs)
        q = -a * a + b * b + c * c
        eps = 1 if q > 0 else -1
        if abs(q - eps) > tol:
            raise GeometryError(f"({a}, {b}, {c}) is not on a fiber quadric (norm {q})")
        if eps < 0:
            return cls(base, -1, (b, c), 1 if a > 0 else -1)
        return cls(base, 1, (a, float(np.arctan2(c, b))), 1)


def quadric_point(eps: int, u, sheet: int = 1) -> np.ndarray:
    u0, u1 = float(u[0]), float(u[1])
    if eps < 0:
        return np.array([sheet * np.sqrt(1 + u0 * u0 + u1 * u1), u0, u1])
    r = np.sqrt(1 + u0 * u0)
    return np.array([u0, r * np.cos(u1), r * np.sin(u1)])


def quadric_jacobian(eps: int, u, sheet: int = 1) -> np.ndarray:
    """d(a, b, c)/du, shape (3, 2)."""
    u0, u1 = float(u[0]), float(u[1])
    if eps < 0:
        a = sheet * np.sqrt(1 + u0 * u0 + u1 * u1)
        return np.array([[u0 / a, u1 / a], [1.0, 0.0], [0.0, 1.0]])
    r = np.sqrt(1 + u0 * u0)
    return np.array([[1.0, 0.0],
                     [u0 / r * np.cos(u1), -r * np.sin(u1)],
                     [u0 / r * np.sin(u1), r * np.cos(u1)]])


def fiber_sample(eps: int, p, count: int = 1, seed: int = 0, spread: float = 1.0) -> list[FiberPoint]:
    """Seeded random points of the eps-quadric over p."""
    if eps not in (-1, 1):
        raise ValueError("eps must be -1 or +1")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        if eps < 0:
            u = tuple(float(v) for v in rng.uniform(-spread, spread, 2))
            out.append(FiberPoint(p, -1, u, int(rng.choice([-1, 1]))))
        else:
            u = (float(rng.uniform(-spread, spread)), float(rng.uniform(-np.pi, np.pi)))
            out.append(FiberPoint(p, 1, u))
    return out


# ---------------------------------------------------------------------------
# Tangent vectors and the almost structure


@dataclass
class TotalTangent:
    """Horizontal part (tangent vector of the base) and vertical coefficients."""

    horizontal: np.ndarray
    vertical: np.ndarray

    def constraint_defect(self, fp: FiberPoint) -> float:
        return abs(pw.fiber_inner(fp.coeffs, self.vertical))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.horizontal, self.vertical])


def connection_form(H: PqStructure, p, alpha=None, jet: ConnectionJet | None = None) -> np.ndarray:
    """omega[k] (3x3) of a minimal connection at p: coefficients of nabla_k A are omega[k] @ a."""
    jet = jet if jet is not None else minimal(H, as_point(p, H.chart), alpha)
    return fiber_form(jet, H).omega


def split(fp: FiberPoint, omega: np.ndarray, xdot, udot) -> TotalTangent:
    """Coordinate tangent (xdot, udot) -> (horizontal, vertical)."""
    xdot = np.asarray(xdot, float)
    adot = quadric_jacobian(fp.eps, fp.u, fp.sheet) @ np.asarray(udot, float)
    return TotalTangent(xdot, adot + np.einsum("kji,k->ji", omega, xdot) @ fp.coeffs)


def unsplit(fp: FiberPoint, omega: np.ndarray, v: TotalTangent) -> tuple[np.ndarray, np.ndarray]:
    """(horizontal, vertical) -> coordinate tangent (xdot, udot)."""
    adot = v.vertical - np.einsum("kji,k->ji", omega, v.horizontal) @ fp.coeffs
    Da = quadric_jacobian(fp.eps, fp.u, fp.sheet)
    udot, *_ = np.linalg.lstsq(Da, adot, rcond=None)
    return v.horizontal.copy(), udot


def twistor_J(H: PqStructure, c: ConnectionJet | None, fp: FiberPoint, eps: int, v: TotalTangent,
              tol: float = 1e-8) -> TotalTangent:
    """Apply the almost eps-structure: A on the horizontal part, B -> A B on the vertical part."""
    if eps != fp.eps:
        raise ValueError("fiber point lies on the other quadric")
    if fp.quadric_defect() > tol:
        raise GeometryError(f"fiber point off the quadric by {fp.quadric_defect():.2e}")
    if c is not None:
        fiber_form(c, H)  # raises if c does not preserve the span
    if v.constraint_defect(fp) > tol * max(1.0, np.abs(v.vertical).max()):
        raise GeometryError("vertical part is not tangent to the quadric")
    A = fp.endomorphism(H)
    return TotalTangent(A @ v.horizontal, pw.left_multiplication(fp.coeffs) @ v.vertical)


def twistor_matrix(H: PqStructure, x, u, eps: int, sheet: int = 1, omega: np.ndarray | None = None,
                   alpha=None) -> np.ndarray:
    """The (n+2)x(n+2) matrix of the almost structure in the coordinates (x, u)."""
    x = as_point(x, H.chart)
    fp = FiberPoint(x, eps, (float(u[0]), float(u[1])), sheet)
    om = connection_form(H, x, alpha) if omega is None else omega
    n = H.dim
    A = fp.endomorphism(H)
    C = pw.left_multiplication(fp.coeffs)
    Da = quadric_jacobian(eps, fp.u, sheet)
    Dpinv = np.linalg.pinv(Da)
    a = fp.coeffs
    om_a = np.einsum("kji,i->jk", om, a)  # column k: omega[k] @ a
    K = np.zeros((n + 2, n + 2))
    # horizontal coordinate columns: vertical part omega_k a
    K[:n, :n] = A
    K[n:, :n] = Dpinv @ (C @ om_a - om_a @ A)
    # fiber coordinate columns
    K[n:, n:] = Dpinv @ C @ Da
    return K


def _total_point(fp: FiberPoint) -> np.ndarray:
    return np.concatenate([fp.base.coords, np.asarray(fp.u, float)])


def _derivatives(H: PqStructure, fp: FiberPoint, h: float, alpha=None) -> np.ndarray:
    n = H.dim
    z0 = _total_point(fp)
    D = np.zeros((n + 2, n + 2, n + 2))
    omega0 = connection_form(H, fp.base, alpha)
    for k in range(n + 2):
        mats = []
        for s in (1.0, -1.0):
            z = z0.copy()
            z[k] += s * h
            x = H.chart.point(z[:n])
            om = omega0 if k >= n else None
            mats.append(twistor_matrix(H, x, z[n:], fp.eps, fp.sheet, omega=om, alpha=alpha))
        D[k] = (mats[0] - mats[1]) / (2 * h)
    return D


def twistor_nijenhuis(H: PqStructure, eps: int, fp: FiberPoint, pairs: int = 16, tol: float = 1e-6,
                      step: float = FD_STEP, alpha=None, seed: int = 0) -> Report:
    """Nijenhuis tensor of the almost eps-structure at (p, fp), derivatives by central differences.

    When the residual lands within a factor 10 of tol, the derivatives are
    refined by Richardson extrapolation from steps h and h/2.
    """
    if fp.eps != eps:
        raise ValueError("fiber point lies on the other quadric")
    K = twistor_matrix(H, fp.base, fp.u, eps, fp.sheet, alpha=alpha)
    D = _derivatives(H, fp, step, alpha)
    prs = _unit_pairs(H.dim + 2, pairs, seed)
    N = pw.nijenhuis(K, D)
    res = pair_norm(N, prs)
    details = {"step": step, "richardson": False, "square_defect": float(np.abs(K @ K - eps * np.eye(len(K))).max())}
    if tol / 10 <= res <= tol * 10:
        D2 = _derivatives(H, fp, step / 2, alpha)
        N = pw.nijenhuis(K, (4 * D2 - D) / 3)
        details["unrefined"] = res
        res = pair_norm(N, prs)
        details["richardson"] = True
    details["components"] = pw.norm(N)
    rep = Report.from_residuals("twistor_nijenhuis", {"nijenhuis": res}, tol, [fp.base], details=details)
    rep.case = f"eps={eps:+d}"
    return rep


def minimal_independence(H: PqStructure, p, fp: FiberPoint, alphas: Sequence, tol: float = 1e-8) -> Report:
    """Compare the almost structure built from minimal connections differing by S^alpha."""
    p = as_point(p, H.chart)
    base = minimal(H, p, None)
    K0 = twistor_matrix(H, p, fp.u, fp.eps, fp.sheet, omega=connection_form(H, p, jet=base))
    res = {}
    for i, alpha in enumerate(alphas):
        jet = minimal(H, p, alpha, base=None)
        K = twistor_matrix(H, p, fp.u, fp.eps, fp.sheet, omega=connection_form(H, p, jet=jet))
        res[f"alpha {i}"] = float(np.abs(K - K0).max())
    return Report.from_residuals("minimal_independence", res, tol, [p])


def section_stability(H: PqStructure, J: CompatibleStructure, p, jet: ConnectionJet | None = None) -> float:
    """How far the image of dp (sigma_J) is from being preserved by the almost structure."""
    p = as_point(p, H.chart)
    a = J.coefficients(p)
    omega = connection_form(H, p, jet=jet)
    V = J.coefficient_jacobian(p) + np.einsum("kji,i->jk", omega, a)
    A = pw.element(H.values(p), a)
    return float(np.abs(pw.left_multiplication(a) @ V - V @ A).max())


def tautological_section_check(H: PqStructure, J: CompatibleStructure, samples, tol: float = 1e-8,
                               torsion_tol: float = 1e-8) -> Report:
    """Stability of the section p -> J(p), compared with the integrability of J."""
    pts = [as_point(p, H.chart) for p in samples]
    tp = max(pw.norm(torsion_TP_at(H, p)) for p in pts)
    if tp > torsion_tol:
        return Report("tautological_section_check", Verdict.SKIPPED, {"torsion_TP": tp}, tol, pts,
                      messages=[f"hypothesis unmet: torsion of the span is {tp:.3e}, not para-quaternionic"])
    stab = max(section_stability(H, J, p) for p in pts)
    integ = is_integrable(J, pts, tol)
    stable = stab <= tol
    agree = stable == integ.passed
    return Report("tautological_section_check", Verdict.PASS if agree else Verdict.FAIL,
                  {"stability": stab, "nijenhuis": integ.max_residual}, tol, pts,
                  case="stable" if stable else "unstable",
                  details={"stable": stable, "integrable": integ.passed, "agreement": agree,
                           "torsion_TP": tp})
