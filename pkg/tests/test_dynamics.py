import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locs.dynamics import (
    InvalidPointError,
    Monomial,
    NonlinearSystem,
    TargetSet,
    ValidRegion,
    builtin_models,
    ellipsoid_within_region,
    fd_jacobian,
    fig1_linear,
    fig2_nonlinear,
    get_model,
    linearization_residual,
    linearize,
    polynomial_system,
)
from locs.linsys import InvalidInputError, energy_ellipsoid


def fig2_as_polynomial(a=3.0):
    # (x1 - a)(x2 - 2) and x2 (x1 - 1)(x2 - 1), expanded by hand
    M = Monomial
    eq1 = [M(1, (1, 1)), M(-2, (1, 0)), M(-a, (0, 1)), M(2 * a, (0, 0))]
    eq2 = [M(1, (1, 2)), M(-1, (1, 1)), M(-1, (0, 2)), M(1, (0, 1))]
    return polynomial_system(2, [eq1, eq2], [(1, 0)])


# --- linearization ----------------------------------------------------------


def test_linearize_linear_system_is_exact():
    lm = linearize(fig1_linear(), [0.3, -0.7])
    np.testing.assert_array_equal(lm.A, [[0.0, 1.0], [-1.0, 0.0]])
    np.testing.assert_allclose(lm.f, 0.0, atol=1e-15)


def test_linearize_fig2_at_center():
    lm = linearize(fig2_nonlinear(), [1.0, 2.0])
    np.testing.assert_allclose(lm.A, [[0.0, -2.0], [2.0, 0.0]])
    np.testing.assert_allclose(lm.f, [4.0, -2.0])
    np.testing.assert_array_equal(lm.x_ref, [1.0, 2.0])


def test_linearize_fig2_at_stable_point():
    lm = linearize(fig2_nonlinear(), [3.0, 0.0])
    np.testing.assert_allclose(lm.f, -lm.A @ [3.0, 0.0], atol=1e-15)


def test_affine_model_matches_F_at_anchor():
    sys_ = fig2_nonlinear()
    x = np.array([1.7, 0.4])
    lm = linearize(sys_, x)
    np.testing.assert_allclose(lm.A @ x + lm.f, sys_.vector_field(x), atol=1e-14)


def test_residual_hand_value():
    # F(1.1, 2.1) = (-0.19, 0.231), affine = (-0.2, 0.2)
    region = ValidRegion.at(fig2_nonlinear(), [1.0, 2.0], 0.1)
    assert linearization_residual(region, [1.1, 2.1]) == pytest.approx(np.hypot(0.01, 0.031), rel=1e-12)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_linearize_rejects_nonfinite():
    bad = NonlinearSystem(lambda x: np.log(x), [[1.0]])
    with pytest.raises(InvalidPointError):
        linearize(bad, [-1.0])


def test_analytic_jacobian_matches_finite_differences():
    rng = np.random.default_rng(0)
    sys_ = fig2_nonlinear(3.5)
    for x in rng.uniform(-3, 5, size=(100, 2)):
        np.testing.assert_allclose(sys_.jac(x), fd_jacobian(sys_.F, x), rtol=1e-6, atol=1e-6)


def test_fd_jacobian_used_without_analytic():
    sys_ = NonlinearSystem(lambda x: np.array([np.sin(x[0]) * x[1], x[0] ** 2]), [[0.0], [1.0]])
    x = np.array([0.4, 1.5])
    np.testing.assert_allclose(sys_.jac(x), [[np.cos(0.4) * 1.5, np.sin(0.4)], [0.8, 0.0]], atol=1e-8)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(-2, 4),
    st.floats(-2, 4),
    st.floats(-0.5, 0.5),
    st.floats(-0.5, 0.5),
)
def test_residual_equals_taylor_remainder(x1, x2, d1, d2):
    # F is cubic, so the remainder is exactly its quadratic and cubic terms
    region = ValidRegion.at(fig2_nonlinear(), [x1, x2], 1.0)
    rem = np.array([d1 * d2, (2 * x2 - 1) * d1 * d2 + (x1 - 1) * d2**2 + d1 * d2**2])
    r = region.residual(np.array([x1 + d1, x2 + d2]))
    assert r == pytest.approx(np.linalg.norm(rem), rel=1e-9, abs=1e-12)


# --- containment ------------------------------------------------------------


def test_linear_system_region_everything_contained():
    sys_ = fig1_linear()
    region = ValidRegion.at(sys_, [0.0, 0.0], 1e-6)
    ell = energy_ellipsoid(region.base, [0, 0], 0.0, 1.0, 100.0)
    res = ellipsoid_within_region(ell, region)
    assert res.contained and res.worst_residual < 1e-12


def test_small_ellipsoid_contained_large_not():
    sys_ = fig2_nonlinear()
    region = ValidRegion.at(sys_, [1.0, 1.2], 0.1)
    small = energy_ellipsoid(region.base, [1.0, 1.2], 0.0, 0.05, 1e-3)
    big = energy_ellipsoid(region.base, [1.0, 1.2], 0.0, 0.5, 50.0)
    assert ellipsoid_within_region(small, region).contained
    out = ellipsoid_within_region(big, region)
    assert not out.contained
    assert region.residual(out.worst_point) == pytest.approx(out.worst_residual)


def test_containment_is_seeded():
    region = ValidRegion.at(fig2_nonlinear(), [1.0, 1.2], 0.1)
    ell = energy_ellipsoid(region.base, [1.0, 1.2], 0.0, 0.2, 1.0)
    a = ellipsoid_within_region(ell, region, rng_seed=4)
    b = ellipsoid_within_region(ell, region, rng_seed=4)
    assert a.worst_residual == b.worst_residual


def test_region_rejects_nonpositive_epsilon():
    with pytest.raises(InvalidInputError):
        ValidRegion.at(fig1_linear(), [0, 0], 0.0)


# --- catalog ----------------------------------------------------------------


def test_catalog_contents():
    assert set(builtin_models()) == {"fig1_linear", "fig2_nonlinear"}
    assert get_model("fig2_nonlinear", a=3.5).parameters["a"] == 3.5
    with pytest.raises(KeyError, match="available"):
        get_model("nope")


@pytest.mark.parametrize("a", [3.0, 3.5])
def test_fig2_fixed_points(a):
    sys_ = fig2_nonlinear(a)
    for p in [(1.0, 2.0), (a, 0.0), (a, 1.0)]:
        np.testing.assert_allclose(sys_.vector_field(np.array(p)), 0.0, atol=1e-15)


def test_fig2_stability_types():
    sys_ = fig2_nonlinear()
    center = np.linalg.eigvals(sys_.jac(np.array([1.0, 2.0])))
    np.testing.assert_allclose(center.real, 0.0, atol=1e-15)
    assert np.all(np.linalg.eigvals(sys_.jac(np.array([3.0, 0.0]))).real < 0)
    saddle = np.linalg.eigvals(sys_.jac(np.array([3.0, 1.0]))).real
    assert saddle.min() < 0 < saddle.max()


def test_fig2_driver_node():
    np.testing.assert_array_equal(fig2_nonlinear().driver_nodes, [1])


def test_vector_field_batched():
    sys_ = fig2_nonlinear()
    X = np.random.default_rng(1).standard_normal((7, 2))
    np.testing.assert_allclose(sys_.vector_field(X), np.array([sys_.vector_field(x) for x in X]))


# --- polynomial systems -----------------------------------------------------


def test_polynomial_matches_closed_form_model():
    poly, ref = fig2_as_polynomial(3.25), fig2_nonlinear(3.25)
    X = np.random.default_rng(2).uniform(-2, 4, size=(50, 2))
    np.testing.assert_allclose(poly.vector_field(X), ref.vector_field(X), atol=1e-12)
    for x in X[:10]:
        np.testing.assert_allclose(poly.jac(x), ref.jac(x), atol=1e-12)
    np.testing.assert_array_equal(poly.B, ref.B)


def test_polynomial_jacobian_at_zero():
    poly = polynomial_system(2, [[Monomial(3.0, (2, 0))], [Monomial(1.0, (0, 1)), Monomial(-1.0, (1, 0))]], [(0, 0)])
    np.testing.assert_allclose(poly.jac(np.zeros(2)), [[0.0, 0.0], [-1.0, 1.0]])


def test_polynomial_validation():
    with pytest.raises(InvalidInputError):
        polynomial_system(2, [[Monomial(1.0, (1, 0))]], [(0, 0)])
    with pytest.raises(InvalidInputError):
        polynomial_system(1, [[Monomial(1.0, (-1,))]], [(0, 0)])
    with pytest.raises(InvalidInputError):
        polynomial_system(1, [[Monomial(1.0, (1,))]], [(3, 0)])


# --- target sets ------------------------------------------------------------


def test_ball_and_box_membership():
    ball = TargetSet.ball((3.0, 0.0), 0.25)
    assert ball.contains([3.1, 0.1]) and not ball.contains([3.3, 0.0])
    box = TargetSet.box((0, 0), (1, 2))
    assert box.contains([1.0, 2.0]) and not box.contains([1.01, 0.0])
    np.testing.assert_array_equal(box.anchor, [0.5, 1.0])


def test_target_round_trip():
    for t in (TargetSet.ball((3.0, 0.0), 0.25), TargetSet.box((0, 0), (1, 2))):
        assert TargetSet.from_dict(t.to_dict()) == t


def test_custom_target():
    t = TargetSet.custom(lambda x: x[0] > 2, center=(3.0, 0.0))
    assert t.contains([2.5, 9.0]) and not t.contains([1.0, 0.0])
    with pytest.raises(InvalidInputError):
        t.to_dict()
    with pytest.raises(InvalidInputError):
        TargetSet.ball((0, 0), 0.0)
