"""Array kernels for tensors at a single point.

Layouts (n = dimension):

* two-form ``T[a, i, j] = T(e_i, e_j)^a``
* endomorphism-valued one-form ``eta[k, a, b] = (eta(e_k))^a_b``
* derivative of an endomorphism field ``D[k, a, b] = d_k J^a_b``
* triple of basis values ``Js[i]`` with signs ``EPS[i]``
"""
from __future__ import annotations

import numpy as np

EPS = (-1, 1, 1)


# ---------------------------------------------------------------------------
# Basic operations on two-forms


def apply_left(J: np.ndarray, T: np.ndarray) -> np.ndarray:
    """(J T)(X, Y) = J(T(X, Y))."""
    return np.einsum("ac,cij->aij", J, T)


def feed(T: np.ndarray, A: np.ndarray | None = None, B: np.ndarray | None = None) -> np.ndarray:
    """The tensor (X, Y) -> T(A X, B Y); None means identity."""
    out = T
    if A is not None:
        out = np.einsum("acj,ci->aij", out, A)
    if B is not None:
        out = np.einsum("aic,cj->aij", out, B)
    return out


def evaluate_two_form(T: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.einsum("aij,i,j->a", T, X, Y)


def alternation_defect(T: np.ndarray) -> float:
    return float(np.abs(T + T.transpose(0, 2, 1)).max())


def norm(T: np.ndarray) -> float:
    """Max absolute component."""
    return float(np.abs(T).max()) if T.size else 0.0


def random_two_form(n: int, rng: np.random.Generator) -> np.ndarray:
    T = rng.standard_normal((n, n, n))
    return T - T.transpose(0, 2, 1)


def interior(T: np.ndarray, X: np.ndarray) -> np.ndarray:
    """The endomorphism T_X = T(X, .), as a matrix M[a, b] = T(X, e_b)^a."""
    return np.einsum("aib,i->ab", T, X)


# ---------------------------------------------------------------------------
# Nijenhuis tensors and brackets on coordinate frames


def nijenhuis(J: np.ndarray, D: np.ndarray) -> np.ndarray:
    """N_J(e_i, e_j) from the value and first derivatives of J.

    N_J(X, Y) = eps[X, Y] + [JX, JY] - J[JX, Y] - J[X, JY]; on coordinate
    fields the first term drops, so eps does not enter.
    """
    brJJ = np.einsum("ki,kaj->aij", J, D)
    brJJ = brJJ - brJJ.transpose(0, 2, 1)
    skew = D - D.transpose(2, 1, 0)  # skew[i, c, j] = d_i J^c_j - d_j J^c_i
    return brJJ - np.einsum("ac,icj->aij", J, skew)


def nijenhuis_bracket(A: np.ndarray, DA: np.ndarray, B: np.ndarray, DB: np.ndarray) -> np.ndarray:
    """Frölicher-Nijenhuis bracket [A, B] on coordinate fields."""
    t1 = np.einsum("ki,kaj->aij", A, DB) - np.einsum("kj,kai->aij", B, DA)
    t2 = np.einsum("ki,kaj->aij", B, DA) - np.einsum("kj,kai->aij", A, DB)
    skewB = DB - DB.transpose(2, 1, 0)
    skewA = DA - DA.transpose(2, 1, 0)
    t3 = np.einsum("ac,icj->aij", A, skewB)
    t4 = np.einsum("ac,icj->aij", B, skewA)
    return t1 + t2 - t3 - t4


def field_bracket(X: np.ndarray, DX: np.ndarray, Y: np.ndarray, DY: np.ndarray) -> np.ndarray:
    """[X, Y] at a point from vector-field jets D[k, a] = d_k X^a."""
    return X @ DY - Y @ DX


def endo_times_field(J: np.ndarray, DJ: np.ndarray, X: np.ndarray, DX: np.ndarray):
    """Jet of the vector field JX."""
    return J @ X, np.einsum("kab,b->ka", DJ, X) + DX @ J.T


def nijenhuis_by_brackets(J, DJ, eps, X, DX, Y, DY) -> np.ndarray:
    """eps[X,Y] + [JX,JY] - J([JX,Y] + [X,JY]) from jets of arbitrary fields."""
    JX, DJX = endo_times_field(J, DJ, X, DX)
    JY, DJY = endo_times_field(J, DJ, Y, DY)
    return (eps * field_bracket(X, DX, Y, DY) + field_bracket(JX, DJX, JY, DJY)
            - J @ (field_bracket(JX, DJX, Y, DY) + field_bracket(X, DX, JY, DJY)))


# ---------------------------------------------------------------------------
# The linear torsion map and projectors


def delta(eta: np.ndarray) -> np.ndarray:
    """(delta eta)(X, Y) = eta(X) Y - eta(Y) X."""
    return eta.transpose(1, 0, 2) - eta.transpose(1, 2, 0)


def pi02(J: np.ndarray, eps: int, T: np.ndarray) -> np.ndarray:
    """The (0,2)-projection with respect to J (J^2 = eps Id)."""
    return 0.25 * (T + eps * feed(T, J, J) - eps * apply_left(J, feed(T, J) + feed(T, None, J)))


def project_P(Js: np.ndarray, T: np.ndarray, eps=EPS) -> np.ndarray:
    return (2.0 / 3.0) * sum(pi02(J, e, T) for J, e in zip(Js, eps))


def pi_section(Js: np.ndarray, T: np.ndarray, eps=EPS) -> np.ndarray:
    """Centralizer-valued one-form eta with delta(eta) = T - P(T)."""
    S = 0.25 * T
    for J, e in zip(Js, eps):
        S = S + 0.25 * e * apply_left(J, feed(T, None, J))
        S = S - (1.0 / 12.0) * e * apply_left(J, feed(T, J))
    for Ji, ei in zip(Js, eps):
        for Jj, ej in zip(Js, eps):
            S = S - (1.0 / 12.0) * ei * ej * apply_left(Jj @ Ji, feed(T, Ji, Jj))
    # S[a, k, b] = S(e_k, e_b)^a is eta(e_k) applied to e_b
    return S.transpose(1, 0, 2)


def tau_forms(Js: np.ndarray, PT: np.ndarray, eps=EPS) -> np.ndarray:
    """tau[i, k] = eps_i tr(J_i PT(e_k, .)) / (n - 2) for PT already in Im(P)."""
    n = PT.shape[0]
    tr = np.einsum("ica,akc->ik", Js, PT)
    return np.asarray(eps, dtype=float)[:, None] * tr / (n - 2)


def forms_times_basis(forms: np.ndarray, Js: np.ndarray) -> np.ndarray:
    """sum_i forms_i (x) J_i as an endomorphism-valued one-form."""
    return np.einsum("ik,iab->kab", forms, Js)


def complement_projection(Js: np.ndarray, T: np.ndarray, eps=EPS):
    """P(T) - delta(sum tau_i J_i) and the tau forms used."""
    PT = project_P(Js, T, eps)
    tau = tau_forms(Js, PT, eps)
    return PT - delta(forms_times_basis(tau, Js)), tau


def trace_conditions(Js: np.ndarray, T: np.ndarray) -> float:
    """max |tr(J_i T_X)| over i and coordinate X."""
    return float(np.abs(np.einsum("ica,akc->ik", Js, T)).max())


# ---------------------------------------------------------------------------
# Tensors built from a one-form


def s_alpha(Js: np.ndarray, alpha: np.ndarray, eps=EPS) -> np.ndarray:
    """The symmetric N(P)-valued form parametrising minimal connections."""
    n = len(alpha)
    mats = [np.eye(n)] + list(Js)
    signs = (1,) + tuple(eps)
    out = np.zeros((n, n, n))
    for M, s in zip(mats, signs):
        aM = alpha @ M  # aM[b] = alpha(M e_b)
        # S_{e_k}(e_b)^a: alpha(M e_b) (M e_k)^a + alpha(M e_k) (M e_b)^a
        out += s * (np.einsum("b,ak->kab", aM, M) + np.einsum("k,ab->kab", aM, M))
    return out


def t_alpha(Js: np.ndarray, alpha: np.ndarray, eps=EPS) -> np.ndarray:
    forms = np.array([e * (alpha @ J) for J, e in zip(Js, eps)])
    return forms_times_basis(forms, Js)


def e_alpha(Js: np.ndarray, alpha: np.ndarray, eps=EPS) -> np.ndarray:
    """E(X)Y = -(alpha(Y) X + sum eps_i alpha(J_i Y) J_i X + alpha(X) Y)."""
    n = len(alpha)
    out = np.einsum("b,ak->kab", alpha, np.eye(n)) + np.einsum("k,ab->kab", alpha, np.eye(n))
    for J, e in zip(Js, eps):
        out += e * np.einsum("b,ak->kab", alpha @ J, J)
    return -out


# ---------------------------------------------------------------------------
# Centralizer and normalizer


def centralizer_projection(Js: np.ndarray, M: np.ndarray, eps=EPS) -> np.ndarray:
    """Average of eps_i J_i M J_i (with J_0 = Id); the result commutes with every J_i."""
    out = M.copy()
    for J, e in zip(Js, eps):
        out = out + e * J @ M @ J
    return 0.25 * out


def span_coefficients(Js: np.ndarray, M: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares coefficients of M in span{J_i} and the max residual entry."""
    A = Js.reshape(3, -1).T
    c, *_ = np.linalg.lstsq(A, M.reshape(-1), rcond=None)
    r = M.reshape(-1) - A @ c
    return c, float(np.abs(r).max())


def centralizer_residual(A: np.ndarray, Js: np.ndarray) -> float:
    return max(float(np.abs(A @ J - J @ A).max()) for J in Js)


def normalizer_residual(A: np.ndarray, Js: np.ndarray) -> float:
    return max(span_coefficients(Js, A @ J - J @ A)[1] for J in Js)


# ---------------------------------------------------------------------------
# Fiber algebra: coefficients with respect to an admissible basis

FIBER_METRIC = np.diag([-1.0, 1.0, 1.0])


def fiber_inner(x, y) -> float:
    return float(-x[0] * y[0] + x[1] * y[1] + x[2] * y[2])


def fiber_product(x, y) -> tuple[float, np.ndarray]:
    """(sum x_i J_i)(sum y_j J_j) = s Id + sum z_k J_k; returns (s, z)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return fiber_inner(x, y), FIBER_METRIC @ np.cross(x, y)


def left_multiplication(x) -> np.ndarray:
    """3x3 matrix C with coeffs(A B) = C coeffs(B) whenever A B lies in the span."""
    x = np.asarray(x, dtype=float)
    cx = np.array([[0.0, -x[2], x[1]], [x[2], 0.0, -x[0]], [-x[1], x[0], 0.0]])
    return FIBER_METRIC @ cx


def element(Js: np.ndarray, coeffs) -> np.ndarray:
    return np.einsum("i,iab->ab", np.asarray(coeffs, dtype=float), Js)
