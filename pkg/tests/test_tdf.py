import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from tailmarkov import tdf as T
from tailmarkov.errors import DomainError, SpecError

SIMPLEX = np.linspace(0.0, 1.0, 21)


def family_members():
    return [T.comonotone(), T.independence(), T.plateau(1 / 3), T.linear_min(0.5, 1.0),
            T.clayton(1.0), T.clayton(3.0), T.piecewise_linear([0, 0.4, 1], [0, 0.2, 0])]


def test_hand_values():
    assert T.comonotone()(0.3, 0.7) == 0.3
    assert T.independence()(0.3, 0.7) == 0.0
    assert_allclose(T.clayton(1.0)(1.0, 1.0), 0.5)
    assert_allclose(T.linear_min(0.5, 1.0)(0.5, 0.5), 0.25)
    assert_allclose(T.plateau(1 / 3)(0.5, 0.5), 1 / 3)


def test_origin_is_zero():
    for lam in family_members():
        assert lam(0.0, 0.0) == 0.0


@pytest.mark.parametrize("lam", family_members(), ids=lambda f: f.angular.kind)
def test_members_validate(lam):
    assert T.validate(lam).valid


@pytest.mark.parametrize("lam", family_members(), ids=lambda f: f.angular.kind)
def test_homogeneity(lam, rng):
    x, y, s = rng.uniform(0, 3, 50), rng.uniform(0, 3, 50), rng.uniform(0.01, 10, 50)
    assert_allclose(lam(s * x, s * y), s * lam(x, y), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("lam", family_members(), ids=lambda f: f.angular.kind)
def test_two_increasing(lam, rng):
    assert np.min(T.rectangle_volumes(lam, rng, 500)) >= -1e-12


@pytest.mark.parametrize("lam", family_members(), ids=lambda f: f.angular.kind)
def test_euler_identity(lam, rng):
    # a 1-homogeneous function is x d1 + y d2
    x, y = rng.uniform(0.1, 3, 30), rng.uniform(0.1, 3, 30)
    assert_allclose(x * lam.d1(x, y) + y * lam.d2(x, y), lam(x, y), atol=1e-12)


def test_right_derivative_convention_at_kink():
    lam = T.linear_min(0.5, 1.0)
    # kink of min(x/2, y) at x = 2y: raising x from there leaves the value at y
    assert lam.d1(2.0, 1.0) == 0.0
    assert lam.d1(1.9, 1.0) == 0.5
    assert lam.d2(2.0, 1.0) == 0.0
    assert_allclose(lam.d2(2.0, 0.99), 1.0)


def test_partials_reject_origin():
    with pytest.raises(DomainError):
        T.clayton(1.0).d1(0.0, 0.0)


def test_clayton_partials_match_differences():
    lam = T.clayton(1.7)
    x, y, h = 0.3, 0.8, 1e-6
    assert_allclose(lam.d1(x, y), (lam(x + h, y) - lam(x - h, y)) / (2 * h), rtol=1e-8)
    assert_allclose(lam.d12(x, y), (lam.d1(x, y + h) - lam.d1(x, y - h)) / (2 * h), rtol=1e-7)


def test_clayton_limits():
    assert T.clayton(np.inf).angular.kind == "comonotone"
    assert_allclose(T.clayton(60.0)(1.0, 1.0), 2 ** (-1 / 60), rtol=1e-12)


def test_transpose():
    lam = T.linear_min(0.5, 1.0)
    lt = lam.transpose()
    assert_allclose(lt(1.0, 0.3), lam(0.3, 1.0))
    assert lt.to_spec() == {"family": "linear_min", "alpha": 1.0, "beta": 0.5}


def test_d1_at_infinity_is_slope_at_zero():
    assert_allclose(T.linear_min(0.5, 1.0).d1_at_infinity(2.0), 0.5)
    assert_allclose(T.clayton(2.0).d1_at_infinity(2.0), 1.0)


@pytest.mark.parametrize("spec", [
    {"family": "comonotone"}, {"family": "independence"}, {"family": "clayton", "alpha": 1.0},
    {"family": "linear_min", "alpha": 0.5, "beta": 1.0}, {"family": "plateau", "p": 0.3333},
    {"family": "piecewise_linear", "t": [0, 0.4, 1], "v": [0, 0.2, 0]},
])
def test_spec_round_trip(spec):
    lam = T.tdf_from_spec(spec)
    again = T.tdf_from_spec(lam.to_spec())
    assert_allclose(again(SIMPLEX, 1 - SIMPLEX), lam(SIMPLEX, 1 - SIMPLEX))


@pytest.mark.parametrize("spec, field", [
    ({"family": "plateau", "p": 0.9}, "p"),
    ({"family": "clayton"}, "alpha"),
    ({"family": "linear_min", "alpha": "x", "beta": 1}, "alpha"),
    ({"family": "piecewise_linear", "t": [0, 1]}, "v"),
    ({"family": "gumbel"}, "family"),
])
def test_spec_errors_name_field(spec, field):
    with pytest.raises(SpecError) as info:
        T.tdf_from_spec(spec)
    assert info.value.field == field


def test_validate_flags_violations():
    with pytest.raises(DomainError):
        T.piecewise_linear([0, 0.5, 1], [0, 0.6, 0])
    convex = T.PiecewiseLinear([0, 0.25, 0.5, 0.75, 1], [0, 0.1, 0.05, 0.1, 0])
    report = T.validate(convex)
    assert not report.valid
    assert any(v.invariant == "concavity" for v in report.violations)


def test_concave_majorant():
    t = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    ht, hv = T.concave_majorant(t, np.array([0.0, 0.2, 0.1, 0.2, 0.0]))
    assert_allclose(ht, [0.0, 0.25, 0.75, 1.0])
    assert_allclose(hv, [0.0, 0.2, 0.2, 0.0])


def test_from_samples_reenters_class():
    t = np.linspace(0, 1, 33)
    noisy = T.clayton(1.0).angular(t) + 1e-3 * np.sin(40 * t)
    lam = T.PiecewiseLinear.from_samples(t, noisy)
    assert T.validate(lam).valid


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 8))
def test_random_members_validate(seed, knots):
    lam = T.random_piecewise_linear(np.random.default_rng(seed), knots)
    assert T.validate(lam).valid


def test_strictness():
    assert T.is_strict(T.clayton(2.0)).strict
    assert T.is_strict(T.plateau(0.2)).strict
    assert not T.is_strict(T.linear_min(0.5, 1.0)).strict
    assert not T.is_strict(T.independence()).strict


def test_zero_one_classification():
    res = T.classify_zero_one_derivative(T.linear_min(1.0, 0.4))
    assert res.comonotone_scaled
    assert_allclose(res.alpha, 0.4, rtol=1e-6)
    assert not T.classify_zero_one_derivative(T.clayton(1.0)).comonotone_scaled


def test_capped_min_is_subdistribution_but_not_homogeneous(rng):
    F = T.CappedMin(1.0)
    assert T.is_subdistribution(F, rng)
    assert F(2.0, 3.0) == 1.0 and 2 * F(1.0, 1.5) == 2.0
    assert not F.homogeneous
