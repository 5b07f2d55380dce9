"""Shared generators for the test suite."""
from __future__ import annotations

import numpy as np

from pqkit import expr as ex
from pqkit import geometry as geo

ACCEPTANCE: dict[int, str] = {}

SAFE_FUNCS = ("exp", "sin", "cos", "sinh", "cosh")


def random_expression(rng: np.random.Generator, names, depth: int) -> ex.Expr:
    """Random tree of bounded depth whose denominators and roots stay away from singularities."""
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.35:
            return ex.Const(float(np.round(rng.uniform(-2, 2), 2)))
        return ex.Var(str(rng.choice(names)))
    kind = rng.integers(0, 8)
    a = random_expression(rng, names, depth - 1)
    if kind == 0:
        return a + random_expression(rng, names, depth - 1)
    if kind == 1:
        return a - random_expression(rng, names, depth - 1)
    if kind == 2:
        return a * random_expression(rng, names, depth - 1)
    if kind == 3:
        b = random_expression(rng, names, depth - 1)
        return a / (ex.Const(2.0) + b * b)
    if kind == 4:
        return a ** int(rng.integers(2, 4))
    if kind == 5:
        return ex.call(ex.DEFAULT_REGISTRY["sqrt"], ex.Const(1.0) + a * a)
    if kind == 6:
        return ex.call(ex.DEFAULT_REGISTRY["log"], ex.Const(1.5) + a * a)
    f = ex.DEFAULT_REGISTRY[str(rng.choice(SAFE_FUNCS))]
    return ex.call(f, a / (ex.Const(1.0) + a * a))


def generated_structures(count: int = 20) -> list[geo.PqStructure]:
    """A mix of generic, partially integrable, pulled-back, rotated and counterexample triples."""
    out = []
    R = geo.so12_matrix([ex.Const(0.3) * ex.Var("x1"), ex.Var("y2") * ex.Var("x3"), ex.Var("y1")])
    makers = [
        lambda s: geo.random_structure(2, s),
        lambda s: geo.random_structure(2, s, symbolic=True),
        lambda s: geo.random_structure(2, s, commuting_with=s % 3),
        lambda s: geo.diffeomorphic_model(2, s),
        lambda s: geo.rotate_basis(geo.random_structure(2, s), R),
    ]
    s = 0
    while len(out) < count - 1:
        out.append(makers[s % len(makers)](s))
        s += 1
    out.append(geo.propo_structure(2))
    return out


def unit_pairs(n: int, count: int, rng: np.random.Generator):
    X = rng.standard_normal((count, n))
    Y = rng.standard_normal((count, n))
    return X / np.linalg.norm(X, axis=1)[:, None], Y / np.linalg.norm(Y, axis=1)[:, None]


def on_pairs(T: np.ndarray, X: np.ndarray, Y: np.ndarray) -> float:
    """max over the pairs of |T(X, Y)|."""
    return float(np.abs(np.einsum("aij,pi,pj->pa", T, X, Y)).max())
