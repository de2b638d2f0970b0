import numpy as np
import pytest
from numpy.testing import assert_allclose

from tailmarkov import tdf as T
from tailmarkov.errors import DomainError
from tailmarkov.iterates import (cesaro_mean, certified_iterations, classify_limit, is_idempotent,
                                 iterate_n, iterates, lambda_p_value, plateau_midpoint_bound,
                                 trace_iterates)

S = np.linspace(0.0, 1.0, 21)


def test_closed_form_first_members():
    assert_allclose(lambda_p_value(1 / 3, 0, 0.5, 0.5), 1 / 3)
    assert_allclose(lambda_p_value(1 / 3, 1, 0.5, 0.5), 1 / 3)
    assert_allclose(lambda_p_value(1 / 3, 2, 0.5, 0.5), 7 / 27)
    assert_allclose(lambda_p_value(0.0, 3, 0.5, 0.5), 0.0)


@pytest.mark.parametrize("p", [0.25, 1 / 3, 0.5])
def test_iterates_match_closed_form(p):
    for n, res in enumerate(iterates(T.plateau(p), 8), 1):
        assert_allclose(res(S, 1 - S), lambda_p_value(p, n - 1, S, 1 - S), atol=1e-12)


def test_half_plateau_is_fixed():
    for res in iterates(T.plateau(0.5), 6):
        assert_allclose(res(0.5, 0.5), 0.5, atol=1e-12)


def test_iterate_n():
    assert_allclose(iterate_n(T.plateau(1 / 3), 3)(0.5, 0.5), 7 / 27)
    with pytest.raises(DomainError):
        iterates(T.plateau(0.2), 0)


def test_bound_dominates_iterates():
    p = 1 / 3
    for k in range(4):
        value = lambda_p_value(p, 2 * k, 0.5, 0.5)
        assert value <= plateau_midpoint_bound(p, k) + 1e-15


def test_certificate():
    n = certified_iterations(1 / 3, 1e-3)
    assert n % 2 == 1
    assert plateau_midpoint_bound(1 / 3, (n - 1) // 2) < 1e-3
    with pytest.raises(DomainError):
        certified_iterations(0.5, 1e-3)


def test_classify_plateau():
    res = classify_limit(T.plateau(1 / 3), tol=1e-3)
    assert res.limit == "independence" and res.converged
    assert res.n_reached <= res.n_certified
    sups = [s for _, s in res.trace]
    assert all(b <= a + 1e-15 for a, b in zip(sups, sups[1:]))


def test_classify_comonotone_and_clayton():
    assert classify_limit(T.comonotone()).limit == "comonotone"
    res = classify_limit(T.clayton(1.0), tol=1e-3)
    assert res.limit == "independence" and res.converged
    assert res.n_reached <= res.n_certified


def test_idempotents():
    assert is_idempotent(T.comonotone())
    assert is_idempotent(T.independence())
    for lam in (T.plateau(0.3), T.linear_min(0.5, 1.0), T.clayton(2.0)):
        assert not is_idempotent(lam)


def test_cesaro_mean_averages():
    mean = cesaro_mean(T.plateau(1 / 3), 3)
    assert_allclose(mean(0.5, 0.5), (1 / 3 + 1 / 3 + 7 / 27) / 3)
    assert_allclose(mean.angular_values(S), mean(S, 1 - S))


def test_trace():
    trace = trace_iterates(T.plateau(0.25), 4)
    assert [r.n for r in trace] == [1, 2, 3, 4]
    assert trace[-1].sup_norm < trace[0].sup_norm
