"""Pointwise connections preserving an admissible triple or its span.

A connection is stored as a jet at one point: its Christoffel matrices
``gamma[k] = Gamma_k`` with ``nabla_{e_k} e_j = sum_a gamma[k, a, j] e_a``.
Its torsion there is ``delta(gamma)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import pointwise as pw
from .geometry import PqStructure, as_point
from .expr import Point
from .tensorcalc import VectorTwoForm, torsion_TH_at, _one_form_at

UNREACHABLE_TOL = 1e-7


class ConnectionSolveError(ArithmeticError):
    pass


class UnreachableTorsion(ConnectionSolveError):
    """The requested torsion is not attained by any connection of the requested kind."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"target torsion unreachable (relative residual {residual:.3e})")


class NotPreserving(ConnectionSolveError):
    pass


@dataclass
class ConnectionJet:
    point: Point
    gamma: np.ndarray
    structure: PqStructure
    kind: str = "custom"
    diagnostics: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]

    def torsion(self) -> np.ndarray:
        return pw.delta(self.gamma)

    def covariant_derivatives(self) -> np.ndarray:
        """nabla_{e_k} J_i at the base point, shape (3, n, n, n) indexed [i, k]."""
        vals, ders = self.structure.jets(self.point)
        comm = np.einsum("kac,icb->ikab", self.gamma, vals) - np.einsum("iac,kcb->ikab", vals, self.gamma)
        return ders + comm

    def preservation_residual(self) -> float:
        """max |nabla J_i| (zero iff each J_i is parallel)."""
        return float(np.abs(self.covariant_derivatives()).max())

    def span_residual(self) -> float:
        """Distance of nabla J_i from span{J_j} (zero iff the span is preserved)."""
        Js = self.structure.values(self.point)
        cov = self.covariant_derivatives()
        return max(pw.span_coefficients(Js, cov[i, k])[1]
                   for i in range(3) for k in range(self.dim))

    def shifted(self, eta: np.ndarray, kind: str | None = None) -> "ConnectionJet":
        """nabla + eta for an End(TM)-valued form eta."""
        return ConnectionJet(self.point, self.gamma + eta, self.structure, kind or self.kind,
                             dict(self.diagnostics))

    def flat(self) -> list[float]:
        return [float(v) for v in self.gamma.reshape(-1)]


def _commutator_block(J: np.ndarray) -> np.ndarray:
    """Matrix of X -> X J - J X acting on row-major vec(X)."""
    n = J.shape[0]
    I = np.eye(n)
    return np.kron(I, J.T) - np.kron(J, I)


def _torsion_rows(n: int) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    idx = [(a, k, j) for a in range(n) for k in range(n) for j in range(k + 1, n)]
    A = np.zeros((len(idx), n ** 3))
    for r, (a, k, j) in enumerate(idx):
        A[r, (k * n + a) * n + j] += 1.0
        A[r, (j * n + a) * n + k] -= 1.0
    return A, idx


def solve_preserving(
    H: PqStructure,
    p,
    target_torsion: VectorTwoForm | np.ndarray,
    preserve: str = "H",
    shuffle_seed: int | None = None,
    unreachable_tol: float = UNREACHABLE_TOL,
) -> ConnectionJet:
    """Christoffel matrices at p with prescribed torsion preserving H or its span.

    ``preserve="H"`` asks nabla J_i = 0 for each i; ``preserve="P"`` asks only
    nabla J_i in span{J_j}, with the span coefficients as extra unknowns.  The
    system is solved as one dense least-squares problem (QR with column
    pivoting); the relative residual and numerical rank are reported.
    """
    p = as_point(p, H.chart)
    n = H.dim
    vals, ders = H.jets(p)
    target = target_torsion.at(p) if isinstance(target_torsion, VectorTwoForm) else np.asarray(target_torsion, float)

    n3 = n ** 3
    blocks = []
    rhs = []
    eye_n = np.eye(n)
    for i in range(3):
        blocks.append(np.kron(eye_n, _commutator_block(vals[i])))
        rhs.append(-ders[i].reshape(-1))
    A_pres = np.vstack(blocks)
    b_pres = np.concatenate(rhs)
    A_tor, idx = _torsion_rows(n)
    b_tor = np.array([target[a, k, j] for a, k, j in idx])

    if preserve == "H":
        A = np.vstack([A_pres, A_tor])
        expected_kernel = 0
    elif preserve == "P":
        # unknown omega[k, j, i]: coefficient of J_j in nabla_k J_i
        W = np.zeros((3 * n * n * n, n * 9))
        for i in range(3):
            for k in range(n):
                rows = slice((i * n + k) * n * n, (i * n + k + 1) * n * n)
                for j in range(3):
                    W[rows, k * 9 + j * 3 + i] = -vals[j].reshape(-1)
        A = np.vstack([np.hstack([A_pres, W]), np.hstack([A_tor, np.zeros((len(idx), n * 9))])])
        expected_kernel = n
    else:
        raise ValueError("preserve must be 'H' or 'P'")
    b = np.concatenate([b_pres, b_tor])

    order = np.arange(len(b))
    if shuffle_seed is not None:
        np.random.default_rng(shuffle_seed).shuffle(order)
    sol, _, rank, _ = scipy.linalg.lstsq(A[order], b[order], lapack_driver="gelsy", cond=1e-12)
    resid = float(np.linalg.norm(A @ sol - b) / max(1.0, np.linalg.norm(b)))
    kernel = A.shape[1] - int(rank)
    if resid > unreachable_tol:
        raise UnreachableTorsion(resid)
    gamma = sol[:n3].reshape(n, n, n)
    diag = {"residual": resid, "rank": int(rank), "kernel": kernel, "expected_kernel": expected_kernel}
    if kernel > expected_kernel:
        diag["warning"] = f"rank deficiency: kernel {kernel} exceeds predicted {expected_kernel}"
    if preserve == "P":
        diag["omega"] = sol[n3:].reshape(n, 3, 3)
    return ConnectionJet(p, gamma, H, kind=f"preserving-{preserve}", diagnostics=diag)


def obata(H: PqStructure, p, **kw) -> ConnectionJet:
    """The connection preserving each J_i whose torsion is T^H."""
    p = as_point(p, H.chart)
    jet = solve_preserving(H, p, torsion_TH_at(H, p), **kw)
    jet.kind = "obata"
    return jet


def minimal_shift(H: PqStructure, p, alpha=None) -> np.ndarray:
    """-sum tau_i (x) J_i + S^alpha, the difference between minimal and Obata jets."""
    p = as_point(p, H.chart)
    Js = H.values(p)
    TH = torsion_TH_at(H, p)
    tau = pw.tau_forms(Js, pw.project_P(Js, TH))
    shift = -pw.forms_times_basis(tau, Js)
    a = _one_form_at(alpha, p, H.dim)
    if np.any(a):
        shift = shift + pw.s_alpha(Js, a)
    return shift


def minimal(H: PqStructure, p, alpha=None, base: ConnectionJet | None = None) -> ConnectionJet:
    """A minimal connection (torsion T^P) preserving span{J_i}; alpha selects the family member."""
    p = as_point(p, H.chart)
    base = base if base is not None else obata(H, p)
    return base.shifted(minimal_shift(H, p, alpha), kind="minimal")


@dataclass
class FiberConnectionForm:
    """omega[k][j, i]: coefficient of J_j in nabla_{e_k} J_i."""

    omega: np.ndarray
    span_residual: float

    def along(self, X) -> np.ndarray:
        return np.einsum("kji,k->ji", self.omega, np.asarray(X, float))

    def skew_residual(self) -> float:
        """Defect of omega_k from so(1,2) = {w : w^T g + g w = 0}, g = diag(-1, 1, 1)."""
        g = pw.FIBER_METRIC
        return float(max(np.abs(w.T @ g + g @ w).max() for w in self.omega))


def fiber_form(c: ConnectionJet, H: PqStructure | None = None, tol: float = 1e-7) -> FiberConnectionForm:
    H = H or c.structure
    Js = H.values(c.point)
    cov = c.covariant_derivatives()
    n = c.dim
    omega = np.zeros((n, 3, 3))
    worst = 0.0
    for k in range(n):
        for i in range(3):
            coef, r = pw.span_coefficients(Js, cov[i, k])
            omega[k, :, i] = coef
            worst = max(worst, r)
    if worst > tol:
        raise NotPreserving(f"connection does not preserve the span of the triple (residual {worst:.3e})")
    return FiberConnectionForm(omega, worst)


def delta_image_residual(Js: np.ndarray, T: np.ndarray) -> float:
    """Least-squares distance of T from delta(sum gamma_i (x) J_i) over one-forms gamma_i."""
    n = Js.shape[1]
    cols = []
    for i in range(3):
        for k in range(n):
            g = np.zeros((3, n))
            g[i, k] = 1.0
            cols.append(pw.delta(pw.forms_times_basis(g, Js)).reshape(-1))
    A = np.array(cols).T
    sol, *_ = np.linalg.lstsq(A, T.reshape(-1), rcond=None)
    return float(np.abs(A @ sol - T.reshape(-1)).max())
