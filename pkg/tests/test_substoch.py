import numpy as np
import pytest
from numpy.testing import assert_allclose

from tailmarkov import tdf as T
from tailmarkov.errors import DomainError
from tailmarkov.numerics import StepFunction
from tailmarkov.substoch import (adjoint_pairing, apply_operator, check_equivariance,
                                 column_kinks, compose_check, is_markov_operator, kinks,
                                 majorization_check, materialize, operator_norms,
                                 operator_to_subdistribution)

F_STEP = StepFunction([0.0, 0.5, 1.5], [1.0, 0.4])
G_STEP = StepFunction([0.2, 0.7, 1.0, 2.6], [0.3, 1.0, 0.6])
XS = np.array([0.3, 0.9, 1.7, 4.0])


def kernels():
    return [T.comonotone(), T.independence(), T.plateau(1 / 3), T.linear_min(0.5, 1.0),
            T.clayton(1.0), T.CappedMin(1.0)]


def test_comonotone_is_identity():
    x = np.array([0.1, 0.6, 1.2, 3.0])
    assert_allclose(apply_operator(T.comonotone(), F_STEP, x), F_STEP(x))


def test_independence_is_zero():
    assert_allclose(apply_operator(T.independence(), F_STEP, XS), 0.0)


def test_indicator_action():
    # T 1_[a,b)(x) = d1 F(x, b) - d1 F(x, a)
    F = T.clayton(1.0)
    ind = StepFunction.indicator(0.5, 2.0)
    assert_allclose(apply_operator(F, ind, 0.8), F.d1(0.8, 2.0) - F.d1(0.8, 0.5))


def test_kink_locations():
    lam = T.linear_min(0.5, 1.0)
    assert_allclose(kinks(lam, 1.0), [2.0])
    assert_allclose(column_kinks(lam, 2.0), [1.0])
    assert kinks(T.clayton(1.0), 1.0) == []


@pytest.mark.parametrize("F", kernels(), ids=lambda k: type(k).__name__)
def test_positivity_and_contraction(F):
    for f in (F_STEP, G_STEP):
        nm = operator_norms(F, f)
        assert nm.min_value >= -1e-12
        assert nm.norm1_out <= nm.norm1_in * (1 + 1e-10)
        assert nm.sup_out <= nm.sup_in * (1 + 1e-10)


@pytest.mark.parametrize("F", kernels(), ids=lambda k: type(k).__name__)
def test_majorization(F):
    assert majorization_check(F, F_STEP)
    assert majorization_check(F, G_STEP)


def test_materialize_keeps_mass_for_compact_kernels():
    g = materialize(T.plateau(1 / 3), F_STEP)
    assert_allclose(g.integral(), operator_norms(T.plateau(1 / 3), F_STEP).norm1_out, rtol=1e-10)


@pytest.mark.parametrize("F", [T.plateau(1 / 3), T.clayton(1.0), T.CappedMin(1.0)],
                         ids=["plateau", "clayton", "capped_min"])
def test_round_trips(F):
    K = operator_to_subdistribution(F)
    assert_allclose(K(XS, XS[::-1]), F(XS, XS[::-1]), atol=1e-6)
    assert_allclose(apply_operator(K, F_STEP, XS), apply_operator(F, F_STEP, XS), atol=1e-6)


@pytest.mark.parametrize("F, G", [
    (T.plateau(1 / 3), T.linear_min(0.5, 1.0)),
    (T.plateau(1 / 3), T.clayton(1.0)),
    (T.clayton(1.0), T.plateau(1 / 3)),
    (T.clayton(1.0), T.clayton(2.5)),
])
def test_composition(F, G):
    for x in (0.3, 0.9, 1.9):
        assert compose_check(F, G, G_STEP, x).defect < 1e-5


@pytest.mark.parametrize("F", kernels(), ids=lambda k: type(k).__name__)
def test_adjoint_pairing(F):
    pair = adjoint_pairing(F, F_STEP, G_STEP)
    assert pair.defect <= 1e-6


def test_adjoint_needs_compact_g():
    with pytest.raises(DomainError):
        adjoint_pairing(T.comonotone(), F_STEP, StepFunction.constant(1.0))


@pytest.mark.parametrize("F", [T.comonotone(), T.plateau(0.2), T.clayton(1.0), T.clayton(3.0),
                               T.linear_min(0.5, 1.0), T.linear_min(1.0, 0.5), T.independence()],
                         ids=lambda k: k.angular.kind)
def test_strict_iff_markov(F):
    assert T.is_strict(F).strict == is_markov_operator(F).markov


def test_linear_min_markov_defects():
    rep = is_markov_operator(T.linear_min(0.5, 1.0))
    assert not rep.markov
    assert_allclose(rep.constant_defect, 0.5, atol=1e-9)
    assert_allclose(rep.transpose_mass_defect, 1.5, atol=1e-9)


@pytest.mark.parametrize("F", kernels()[:5], ids=lambda k: k.angular.kind)
def test_equivariance_of_homogeneous_kernels(F):
    for s in (0.5, 2.0, 3.7):
        assert check_equivariance(F, G_STEP, s, XS) <= 1e-8


def test_capped_min_breaks_equivariance():
    f = StepFunction.indicator(0.0, 1.0)
    assert check_equivariance(T.CappedMin(1.0), f, 2.0, [0.6]) == 0.0
    assert check_equivariance(T.CappedMin(1.0), f, 2.0, [1.5]) == 1.0
    with pytest.raises(DomainError):
        check_equivariance(T.CappedMin(1.0), f, 0.0, [1.5])
