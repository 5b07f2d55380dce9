import numpy as np
import pytest

from pqkit import expr as ex
from pqkit import geometry as geo
from pqkit import pointwise as pw
from pqkit.report import Verdict


def test_chart_requires_dimension_multiple_of_four():
    with pytest.raises(geo.GeometryError):
        geo.Chart(("a", "b", "c", "d"))
    with pytest.raises(geo.GeometryError):
        geo.Chart(tuple(f"z{i}" for i in range(10)))
    assert geo.Chart.standard(3).dim == 12


def test_flat_model_is_admissible(flat):
    pts = geo.random_points(flat.chart, 10, seed=0)
    rep = geo.admissible_basis_check(flat, pts)
    assert rep.passed and rep.max_residual == 0.0


def test_swapped_flat_fails_product_rule(flat):
    swapped = geo.PqStructure(flat.J1, flat.J3, flat.J2, chart=flat.chart)
    rep = geo.admissible_basis_check(swapped, geo.random_points(flat.chart, 2, seed=0))
    assert rep.verdict is Verdict.FAIL
    assert rep.residuals["J3-J1J2"] == pytest.approx(2.0)


def test_flat_model_is_constant(flat):
    assert all(J.is_constant() for J in flat.J)
    _, ders = flat.jets(np.ones(8))
    assert not ders.any()


def test_metric_examples(flat):
    e = geo.StructureElement
    assert geo.structure_metric(e((1, 0, 0), flat), e((1, 0, 0), flat)) == -1
    assert geo.structure_metric(e((1, 1, 0), flat), e((1, -1, 0), flat)) == -2
    assert geo.structure_metric(e((0, 1, 0), flat), e((1, 1, 1), flat)) == 1


def test_conjugation_by_identity_is_noop(flat):
    G = geo.SymbolicEndomorphism.identity(flat.chart)
    H = geo.conjugate_structure(flat, G)
    p = np.full(8, 0.7)
    np.testing.assert_array_equal(H.values(p), flat.values(p))


def test_conjugation_by_unipotent_field(flat):
    chart = flat.chart
    E = [[ex.ZERO] * 8 for _ in range(8)]
    E[0][5] = ex.Var("x1")
    G = geo.SymbolicEndomorphism.identity(chart) + geo.SymbolicEndomorphism(chart, E)
    H = geo.conjugate_structure(flat, G)
    assert H.is_symbolic
    rep = geo.admissible_basis_check(H, geo.random_points(chart, 10, seed=1))
    assert rep.passed
    _, ders = H.jets(np.ones(8))
    assert np.abs(ders).max() > 0.1


def test_random_structures_stay_admissible():
    for seed in range(5):
        H = geo.random_structure(2, seed)
        rep = geo.admissible_basis_check(H, geo.random_points(H.chart, 20, seed=seed), tol=1e-9)
        assert rep.passed, rep.residuals


def test_numeric_conjugation_derivative_matches_finite_difference():
    H = geo.random_structure(2, 4)
    p = np.array([0.9, 1.1, 0.8, 1.2, 1.0, 0.7, 1.3, 0.95])
    _, ders = H.jets(p)
    h = 1e-6
    for k in (0, 5):
        e = np.zeros(8)
        e[k] = h
        fd = (H.values(p + e) - H.values(p - e)) / (2 * h)
        np.testing.assert_allclose(ders[:, k], fd, atol=1e-8)


def test_commuting_generator_keeps_chosen_structure_constant():
    for i in range(3):
        H = geo.random_structure(2, 9, commuting_with=i)
        _, ders = H.jets(np.full(8, 0.8))
        assert np.abs(ders[i]).max() < 1e-12
        assert np.abs(ders[(i + 1) % 3]).max() > 1e-3


def test_rotated_basis_is_admissible(flat):
    R = geo.so12_matrix([ex.Var("x1"), ex.Const(0.4) * ex.Var("y2"), ex.Var("x2") * ex.Var("y1")])
    H = geo.rotate_basis(flat, R)
    rep = geo.admissible_basis_check(H, geo.random_points(flat.chart, 10, seed=2))
    assert rep.passed


def test_so12_matrix_preserves_metric():
    R = np.array([[ex.evaluate(e, {}) for e in row] for row in geo.so12_matrix([0.3, -0.8, 2.0])])
    np.testing.assert_allclose(R.T @ pw.FIBER_METRIC @ R, pw.FIBER_METRIC, atol=1e-14)
    assert np.linalg.det(R) == pytest.approx(1.0)


def test_diffeomorphic_model_is_integrable():
    H = geo.diffeomorphic_model(2, 5)
    for p in geo.random_points(H.chart, 3, seed=0):
        vals, ders = H.jets(p)
        assert np.abs(ders).max() > 1e-3
        for J, D in zip(vals, ders):
            assert pw.norm(pw.nijenhuis(J, D)) < 1e-12


class TestPropo:
    def test_f_at_ones(self, propo, ones):
        p = propo.chart.point(ones)
        assert [ex.evaluate(f, p) for f in propo.f] == [1.0, 1.0, 1.0, 1.0]

    def test_admissible_at_ones(self, propo, ones):
        assert propo.admits(ones)
        assert geo.admissible_basis_check(propo, [ones]).passed

    def test_frame_relations(self, propo):
        p = propo.chart.point([0.8, 1.2, 0.9, 1.1, 1.3, 0.7, 1.05, 0.95])
        J1, J2, J3 = propo.values(p)
        f = [ex.evaluate(e, p) for e in propo.f]
        for i in range(4):
            e_x, e_y = np.eye(8)[i], np.eye(8)[4 + i]
            np.testing.assert_allclose(J1 @ e_x, f[i] * e_y, atol=1e-15)
            np.testing.assert_allclose(J3 @ e_x, f[i] * e_y, atol=1e-15)
            np.testing.assert_allclose(J1 @ e_y, -e_x / f[i], atol=1e-15)
            np.testing.assert_allclose(J3 @ e_y, e_x / f[i], atol=1e-15)
            assert J2[i, i] == 1.0 and J2[4 + i, 4 + i] == -1.0

    def test_f_formulas(self, propo):
        c = np.array([0.8, 1.2, 0.9, 1.1, 1.3, 0.7, 1.05, 0.95])
        p = propo.chart.point(c)
        sx, sy = np.sum(c[1:4] ** 2), np.sum(c[5:8] ** 2)
        for i in (1, 2, 3):
            assert ex.evaluate(propo.f[i], p) == pytest.approx(c[i] * sy / (c[4 + i] * sx), rel=1e-14)

    def test_domain_excludes_singular_locus(self, propo):
        c = np.ones(8)
        c[5] = 0.0
        assert not propo.admits(c)
        c = np.ones(8)
        c[1] = -1.0  # f_2 changes sign but does not vanish
        assert propo.admits(c)

    def test_profile_h_id(self):
        H = geo.propo_structure(2, "h_id")
        c = np.array([1.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0])
        assert ex.evaluate(H.f[0], H.chart.point(c)) == pytest.approx(6.0 / 3.0)


def test_json_round_trip(tmp_path, propo):
    path = tmp_path / "propo.json"
    geo.save_structure(propo, path)
    back = geo.load_structure(path)
    p = np.array([0.8, 1.2, 0.9, 1.1, 1.3, 0.7, 1.05, 0.95])
    np.testing.assert_allclose(back.values(p), propo.values(p), rtol=1e-13)
    np.testing.assert_allclose(back.jets(p)[1], propo.jets(p)[1], rtol=1e-12, atol=1e-13)


def test_json_missing_key():
    with pytest.raises(geo.GeometryError):
        geo.structure_from_json({"dim": 8, "coords": [], "J1": []})


def test_random_points_respect_domain(propo):
    pts = geo.random_points(propo.chart, 30, seed=3, low=-1.5, high=1.5, accept=propo.admits)
    assert len(pts) == 30 and all(propo.admits(p) for p in pts)
    with pytest.raises(geo.GeometryError):
        geo.random_points(propo.chart, 1, seed=0, accept=lambda p: False, max_tries=50)
