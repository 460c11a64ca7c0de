"""Constant-curvature geometry: closed forms, round trips, domain policy."""

import math

import numpy as np
import pytest

from spikemanifold.errors import (ConfigError, DomainError, NumericError,
                                  ShapeError, SingularityError)
from spikemanifold.geometry import (ANTIPODAL_TOL, CLAMP_TOL, Curvature,
                                    ManifoldComponent, ManifoldPoint,
                                    ProductManifoldSpec, TangentVector,
                                    check_injectivity, check_w,
                                    curvature_trig, exp_map,
                                    geodesic_distance, inner_product,
                                    log_map, origin, origin_rows,
                                    parse_geometry_spec, product_distance_sq,
                                    project_to_manifold, project_to_tangent,
                                    random_point, random_tangent)

from oracles import COSH_1, PI_OVER_2, SINH_1

KAPPAS = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)
DIMS = (2, 8, 32)


# --- curvature and trig ----------------------------------------------------

def test_curvature_sign_classes():
    assert Curvature(1.0).sign_class == "spherical"
    assert Curvature(-0.5).sign_class == "hyperbolic"
    assert Curvature(0.0).sign_class == "flat"


def test_curvature_radius():
    assert Curvature(4.0).radius == 0.5
    assert Curvature(-1.0).radius == 1.0
    assert Curvature(0.0).radius == math.inf


def test_curvature_rejects_non_finite():
    with pytest.raises(DomainError):
        Curvature(float("nan"))
    with pytest.raises(DomainError):
        Curvature(float("inf"))


def test_trig_flat_is_identity():
    c, s = curvature_trig(0.7, 0.0)
    assert c == 1.0
    assert s == 0.7


def test_trig_at_zero():
    for kappa in KAPPAS:
        c, s = curvature_trig(0.0, kappa)
        assert c == 1.0
        assert s == 0.0


def test_trig_hyperbolic_oracle():
    c, s = curvature_trig(1.0, -1.0)
    assert c == pytest.approx(COSH_1, abs=1e-15)
    assert s == pytest.approx(SINH_1, abs=1e-15)


def test_trig_pythagorean_identity():
    # cos_k^2 + kappa * sin_k^2 = 1 for every curvature
    rng = np.random.default_rng(3)
    z = rng.uniform(-2.0, 2.0, size=200)
    for kappa in KAPPAS:
        c, s = curvature_trig(z, kappa)
        np.testing.assert_allclose(c * c + kappa * s * s, 1.0,
                                   atol=1e-12, rtol=0)


# --- inner product and origin ---------------------------------------------

def test_inner_product_lorentz_signature():
    assert inner_product([1.0, 0.0], [1.0, 0.0], -1.0) == -1.0


def test_inner_product_orthogonal_sphere():
    assert inner_product([1.0, 0.0], [0.0, 1.0], 1.0) == 0.0


def test_inner_product_lorentz_oracle():
    v = inner_product([COSH_1, SINH_1], [1.0, 0.0], -1.0)
    assert v == pytest.approx(-COSH_1, abs=1e-15)


def test_inner_product_shape_mismatch():
    with pytest.raises(ShapeError):
        inner_product([1.0, 0.0], [1.0, 0.0, 0.0], 1.0)


def test_origin_coordinates():
    o = origin(2, Curvature(-1.0))
    np.testing.assert_array_equal(o.coords, [1.0, 0.0, 0.0])
    o = origin(1, Curvature(4.0))
    np.testing.assert_array_equal(o.coords, [0.5, 0.0])
    o = origin(3, Curvature(0.0))
    np.testing.assert_array_equal(o.coords, [0.0, 0.0, 0.0])


def test_origin_rejects_bad_dim():
    with pytest.raises(ShapeError):
        origin(0, Curvature(1.0))


def test_origin_rows_shape():
    rows = origin_rows(5, 3, -2.0)
    assert rows.shape == (5, 4)
    assert (rows[:, 0] == 1.0 / math.sqrt(2.0)).all()


# --- point and tangent validation -------------------------------------------

def test_point_validates_on_manifold():
    p = ManifoldPoint(np.array([COSH_1, SINH_1]), Curvature(-1.0))
    p.validate()
    assert p.dim == 1


def test_point_validate_rejects_drift():
    p = ManifoldPoint(np.array([1.0, 0.5]), Curvature(-1.0))
    with pytest.raises(NumericError):
        p.validate()


def test_point_validate_rejects_lower_sheet():
    p = ManifoldPoint(np.array([-1.0, 0.0]), Curvature(-1.0))
    with pytest.raises(DomainError):
        p.validate()


def test_tangent_shape_must_match_base():
    o = origin(2, Curvature(1.0))
    with pytest.raises(ShapeError):
        TangentVector(np.zeros(2), o)


def test_tangent_norm_is_metric_norm():
    o = origin(1, Curvature(-1.0))
    t = TangentVector(np.array([0.0, 2.0]), o)
    assert t.norm() == pytest.approx(2.0, abs=1e-15)
    assert t.tangency_violation() == 0.0


# --- exp / log closed forms --------------------------------------------------

def test_exp_zero_tangent_returns_base_exactly():
    for kappa in KAPPAS:
        o = origin(3, Curvature(kappa))
        y = exp_map(o, np.zeros(o.coords.shape[0]))
        np.testing.assert_array_equal(y.coords, o.coords)


def test_exp_hyperboloid_oracle():
    o = origin(1, Curvature(-1.0))
    y = exp_map(o, np.array([0.0, 1.0]))
    np.testing.assert_allclose(y.coords, [COSH_1, SINH_1], atol=1e-15)
    assert abs(inner_product(y.coords, y.coords, -1.0) + 1.0) < 1e-12
    assert geodesic_distance(o, y) == pytest.approx(1.0, abs=1e-12)


def test_exp_sphere_quarter_turn():
    o = origin(1, Curvature(1.0))
    y = exp_map(o, np.array([0.0, PI_OVER_2]))
    np.testing.assert_allclose(y.coords, [0.0, 1.0], atol=1e-15)
    assert np.linalg.norm(y.coords) == pytest.approx(1.0, abs=1e-15)
    assert geodesic_distance(o, y) == pytest.approx(PI_OVER_2, abs=1e-12)


def test_exp_rejects_non_tangent_vector():
    o = origin(1, Curvature(-1.0))
    with pytest.raises(DomainError):
        exp_map(o, np.array([1.0, 0.0]))   # points along the base


def test_exp_rejects_past_injectivity_radius():
    o = origin(2, Curvature(1.0))
    with pytest.raises(DomainError):
        exp_map(o, np.array([0.0, math.pi, 0.0]))


def test_exp_rejects_foreign_tangent():
    o = origin(1, Curvature(1.0))
    other = exp_map(o, np.array([0.0, 0.5]))
    t = TangentVector(np.array([0.0, 0.1]), o)
    exp_map(o, t)
    with pytest.raises(DomainError):
        exp_map(other, t)


def test_log_coincident_points_is_exact_zero():
    rng = np.random.default_rng(11)
    for kappa in KAPPAS:
        x = random_point(rng, Curvature(kappa), 4)
        t = log_map(x, x)
        assert (t.coords == 0.0).all()


def test_log_sphere_oracle():
    o = origin(1, Curvature(1.0))
    y = ManifoldPoint(np.array([0.0, 1.0]), Curvature(1.0))
    t = log_map(o, y)
    np.testing.assert_allclose(t.coords, [0.0, PI_OVER_2], atol=1e-12)


def test_log_hyperboloid_oracle():
    o = origin(1, Curvature(-1.0))
    y = ManifoldPoint(np.array([COSH_1, SINH_1]), Curvature(-1.0))
    t = log_map(o, y)
    np.testing.assert_allclose(t.coords, [0.0, 1.0], atol=1e-6)


def test_log_rejects_antipodal_points():
    o = origin(2, Curvature(1.0))
    anti = ManifoldPoint(-o.coords, Curvature(1.0))
    with pytest.raises(SingularityError):
        log_map(o, anti)


def test_log_rejects_mismatched_curvature():
    a = origin(2, Curvature(1.0))
    b = origin(2, Curvature(2.0))
    with pytest.raises(DomainError):
        log_map(a, b)


# --- distance ---------------------------------------------------------------

def test_distance_self_is_exact_zero():
    rng = np.random.default_rng(5)
    for kappa in KAPPAS:
        x = random_point(rng, Curvature(kappa), 3)
        assert geodesic_distance(x, x) == 0.0


def test_distance_sphere_oracle():
    a = ManifoldPoint(np.array([1.0, 0.0]), Curvature(1.0))
    b = ManifoldPoint(np.array([0.0, 1.0]), Curvature(1.0))
    assert geodesic_distance(a, b) == pytest.approx(PI_OVER_2, abs=1e-15)


def test_distance_hyperboloid_oracle():
    a = ManifoldPoint(np.array([1.0, 0.0]), Curvature(-1.0))
    b = ManifoldPoint(np.array([COSH_1, SINH_1]), Curvature(-1.0))
    assert geodesic_distance(a, b) == pytest.approx(1.0, abs=1e-12)


def test_distance_flat_is_euclidean():
    a = ManifoldPoint(np.array([1.0, 2.0]), Curvature(0.0))
    b = ManifoldPoint(np.array([4.0, 6.0]), Curvature(0.0))
    assert geodesic_distance(a, b) == pytest.approx(5.0, abs=1e-15)


def test_distance_antipodal_is_defined():
    # the distance (unlike the log) exists at antipodes: half circumference
    o = origin(2, Curvature(1.0))
    anti = ManifoldPoint(-o.coords, Curvature(1.0))
    assert geodesic_distance(o, anti) == pytest.approx(math.pi, abs=1e-12)


# --- projections -------------------------------------------------------------

def test_project_point_sphere_rescale():
    p = project_to_manifold(np.array([2.0, 0.0]), Curvature(1.0))
    np.testing.assert_allclose(p.coords, [1.0, 0.0], atol=1e-15)


def test_project_point_hyperboloid_recomputes_first_coord():
    p = project_to_manifold(np.array([1.1, 0.3]), Curvature(-1.0))
    assert p.coords[0] > 0.0
    assert abs(inner_product(p.coords, p.coords, -1.0) + 1.0) < 1e-12
    assert p.coords[1] == 0.3


def test_project_point_idempotent():
    rng = np.random.default_rng(7)
    for kappa in KAPPAS:
        raw = rng.standard_normal(5)
        p = project_to_manifold(raw, Curvature(kappa))
        q = project_to_manifold(p.coords, Curvature(kappa))
        np.testing.assert_allclose(q.coords, p.coords, atol=1e-12)


def test_project_point_rejects_zero_vector():
    with pytest.raises(DomainError):
        project_to_manifold(np.zeros(3), Curvature(1.0))


def test_project_tangent_oracle():
    x = ManifoldPoint(np.array([1.0, 0.0]), Curvature(-1.0))
    t = project_to_tangent(x, np.array([5.0, 2.0]))
    np.testing.assert_allclose(t.coords, [0.0, 2.0], atol=1e-12)


def test_project_tangent_flat_is_identity():
    x = ManifoldPoint(np.array([1.0, 2.0]), Curvature(0.0))
    t = project_to_tangent(x, np.array([3.0, 4.0]))
    np.testing.assert_array_equal(t.coords, [3.0, 4.0])


def test_project_tangent_idempotent_and_orthogonal():
    rng = np.random.default_rng(9)
    for kappa in KAPPAS:
        x = random_point(rng, Curvature(kappa), 4)
        t = project_to_tangent(x, rng.standard_normal(x.coords.shape[0]))
        assert t.tangency_violation() < 1e-9
        t2 = project_to_tangent(x, t.coords)
        np.testing.assert_allclose(t2.coords, t.coords, atol=1e-12)


# --- geometry spec parsing ---------------------------------------------------

def test_parse_single_component():
    spec = parse_geometry_spec("h32")
    assert len(spec.components) == 1
    assert spec.components[0].curvature.value == -1.0
    assert spec.components[0].dim == 32


def test_parse_flat_component():
    spec = parse_geometry_spec("e32")
    assert spec.components[0].curvature.value == 0.0
    assert spec.total_dim == 32
    assert spec.total_ambient_dim == 32   # flat needs no extra coordinate


def test_parse_mixed_product():
    spec = parse_geometry_spec("s4xs8xh16")
    kappas = [c.curvature.value for c in spec.components]
    dims = [c.dim for c in spec.components]
    assert kappas == [1.0, 1.0, -1.0]
    assert dims == [4, 8, 16]
    assert spec.total_ambient_dim == 5 + 9 + 17


def test_parse_two_component():
    spec = parse_geometry_spec("h16xs16")
    assert [c.curvature.value for c in spec.components] == [-1.0, 1.0]


def test_parse_rejects_malformed():
    for bad in ("", "x", "h", "32", "q8", "h32x", "h-4", "h32xx s8"):
        with pytest.raises(ConfigError):
            parse_geometry_spec(bad)


def test_parse_error_names_offending_token():
    with pytest.raises(ConfigError, match="q8"):
        parse_geometry_spec("h16xq8")


def test_parse_inverts_describe():
    rng = np.random.default_rng(13)
    letters = "seh"
    for _ in range(50):
        k = rng.integers(1, 4)
        text = "x".join(f"{letters[rng.integers(0, 3)]}"
                        f"{rng.integers(1, 64)}" for _ in range(k))
        spec = parse_geometry_spec(text)
        assert spec.describe() == text
        assert parse_geometry_spec(spec.describe()) == spec


def test_component_rejects_zero_dim():
    with pytest.raises(ShapeError):
        ManifoldComponent(Curvature(1.0), 0)


def test_empty_product_rejected():
    with pytest.raises(ConfigError):
        ProductManifoldSpec(())


# --- product distance --------------------------------------------------------

def test_product_distance_zero_at_equal_points():
    rng = np.random.default_rng(15)
    pts = [random_point(rng, Curvature(k), 3) for k in (-1.0, 0.0, 1.0)]
    assert product_distance_sq(pts, pts) == 0.0


def test_product_distance_single_component():
    a = ManifoldPoint(np.array([1.0, 0.0]), Curvature(1.0))
    b = ManifoldPoint(np.array([0.0, 1.0]), Curvature(1.0))
    d2 = product_distance_sq([a], [b])
    assert d2 == pytest.approx(PI_OVER_2 ** 2, abs=1e-12)


def test_product_distance_adds_squared_components():
    # components at distances 1 and 2 give squared values 1 and 4
    o_h = origin(1, Curvature(-1.0))
    y_h = exp_map(o_h, np.array([0.0, 1.0]))          # distance 1
    o_e = origin(2, Curvature(0.0))
    y_e = ManifoldPoint(np.array([0.0, 2.0]), Curvature(0.0))   # distance 2
    total = product_distance_sq([o_h, o_e], [y_h, y_e])
    assert total == pytest.approx(5.0, abs=1e-10)


def test_product_distance_component_count_mismatch():
    o = origin(2, Curvature(1.0))
    with pytest.raises(ShapeError):
        product_distance_sq([o], [o, o])


# --- batch domain policy ------------------------------------------------------

def test_check_w_absorbs_small_drift():
    check_w(np.array([1.0 + 0.5 * CLAMP_TOL]), -1.0, "op")   # no raise


def test_check_w_rejects_large_drift():
    with pytest.raises(NumericError, match="op_name"):
        check_w(np.array([1.0 + 10 * CLAMP_TOL]), -1.0, "op_name")
    with pytest.raises(NumericError):
        check_w(np.array([1.0 + 10 * CLAMP_TOL]), 1.0, "op")


def test_check_w_antipodal_policy():
    w = np.array([-1.0 + 0.5 * ANTIPODAL_TOL])
    with pytest.raises(SingularityError):
        check_w(w, 1.0, "op")
    check_w(w, 1.0, "op", antipodal_ok=True)   # distance path allows it


def test_check_w_flat_never_raises():
    check_w(np.array([5.0, -5.0]), 0.0, "op")


def test_check_injectivity():
    check_injectivity(np.array([3.0]), 1.0, "op")
    with pytest.raises(DomainError):
        check_injectivity(np.array([math.pi]), 1.0, "op")
    check_injectivity(np.array([100.0]), -1.0, "op")   # no sphere, no limit


# --- randomized property sweeps ----------------------------------------------

@pytest.mark.parametrize("kappa", KAPPAS)
@pytest.mark.parametrize("dim", DIMS)
def test_exp_log_inversion_sweep(kappa, dim):
    rng = np.random.default_rng(abs(hash((kappa, dim))) % (2 ** 32))
    curv = Curvature(kappa)
    inj = math.pi / math.sqrt(kappa) if kappa > 0 else 10.0
    for _ in range(60):
        x = random_point(rng, curv, dim)
        norm = rng.uniform(0.0, 0.9 * inj)
        t = random_tangent(rng, x, norm=norm)
        y = exp_map(x, t)
        back = log_map(x, y)
        err = np.linalg.norm(back.coords - t.coords)
        assert err <= 1e-6 * (1.0 + norm)


@pytest.mark.parametrize("kappa", KAPPAS)
def test_norm_distance_consistency(kappa):
    rng = np.random.default_rng(int(10 * abs(kappa)) + 17)
    curv = Curvature(kappa)
    inj = math.pi / math.sqrt(kappa) if kappa > 0 else 5.0
    for _ in range(100):
        x = random_point(rng, curv, 4)
        t = random_tangent(rng, x, norm=rng.uniform(0.0, 0.9 * inj))
        y = exp_map(x, t)
        assert abs(geodesic_distance(x, y) - t.norm()) < 1e-6


@pytest.mark.parametrize("kappa", KAPPAS)
def test_constraint_preserved_by_all_ops(kappa):
    rng = np.random.default_rng(int(10 * abs(kappa)) + 23)
    curv = Curvature(kappa)
    for _ in range(100):
        x = random_point(rng, curv, 5)
        assert x.constraint_violation() <= 1e-9
        t = random_tangent(rng, x, scale=0.5)
        y = exp_map(x, t)
        assert y.constraint_violation() <= 1e-9
        p = project_to_manifold(rng.standard_normal(
            curv.ambient_dim(5)), curv)
        assert p.constraint_violation() <= 1e-9


def test_flat_limit_matches_vector_arithmetic():
    # tiny curvature of either sign behaves like flat space on unit inputs
    rng = np.random.default_rng(29)
    for kappa in (1e-6, -1e-6):
        curv = Curvature(kappa)
        o = origin(4, curv)
        for _ in range(50):
            v = rng.uniform(-0.5, 0.5, size=4)
            v /= max(1.0, np.linalg.norm(v))
            t = np.concatenate([[0.0], v])
            y = exp_map(o, t)
            assert np.linalg.norm(y.coords[1:] - v) < 1e-4
            back = log_map(o, y)
            assert np.linalg.norm(back.coords[1:] - v) < 1e-4
            d = geodesic_distance(o, y)
            assert abs(d - np.linalg.norm(v)) < 1e-4


@pytest.mark.parametrize("kappa", KAPPAS)
def test_metric_axioms(kappa):
    rng = np.random.default_rng(int(10 * abs(kappa)) + 31)
    curv = Curvature(kappa)
    spread = 1.0 if kappa > 0 else 0.8
    for _ in range(200):
        x = random_point(rng, curv, 3, spread)
        y = random_point(rng, curv, 3, spread)
        z = random_point(rng, curv, 3, spread)
        dxy = geodesic_distance(x, y)
        dyx = geodesic_distance(y, x)
        dxz = geodesic_distance(x, z)
        dzy = geodesic_distance(z, y)
        assert dxy >= 0.0
        assert abs(dxy - dyx) < 1e-9
        assert dxy <= dxz + dzy + 1e-7
        assert geodesic_distance(x, x) <= 1e-8
