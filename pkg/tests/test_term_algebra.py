import math

import pytest
import sympy
from numpy.testing import assert_allclose

from src.algebra.term_algebra import (
    ExpSeries,
    Half,
    Monomial,
    classify_integrability,
    derive,
    evaluate,
    expansion_W,
    second_order_kernel,
    third_derivative_X2,
    truncation_bound,
)
from src.group.group_core import GroupPoint
from src.kernels.kernels import kernel_W
from src.utils.errors import InvalidParameterError, OrderExhaustedError, OutOfDomainError

PAIRS = [(i, j) for i in range(3) for j in range(3)]


def is_exactly(value, expected) -> bool:
    return sympy.simplify(value - expected) == 0


def test_series_arithmetic():
    S = ExpSeries.geometric(4)
    assert S.is_s_type
    assert S.derivative().is_r_type
    product = S * S
    assert product.coefficients == tuple(sympy.Integer(k + 1) for k in range(5))
    assert product.truncated
    assert (S - S).is_zero
    assert ExpSeries.coth(3).coefficients == (1, 2, 2, 2)


def test_series_evaluates_geometric_sum():
    S = ExpSeries.geometric(30)
    assert_allclose(S.evaluate(2.0), 1.0 / (1.0 - math.exp(-4.0)), rtol=1e-14)


def test_monomial_validation():
    with pytest.raises(InvalidParameterError):
        Monomial(1, (-2, 0, 0), 1, ExpSeries.one(2))
    with pytest.raises(InvalidParameterError):
        Monomial(1, (0, 0, 0), -1, ExpSeries.one(2))
    assert Monomial(sympy.Rational(1, 3), (0, 1, 0), 2, ExpSeries.one(2)).degree == 1


def test_integrability_classification():
    assert not classify_integrability((0, 0, 0), 2, Half.PLUS)
    assert classify_integrability((0, 0, 0), 3, Half.PLUS)
    assert classify_integrability((0, 0, 0), 2, Half.MINUS)
    assert not classify_integrability((-1, 0, 0), 1, Half.MINUS)
    assert classify_integrability((-1, 2, 0), 4, "G+")
    with pytest.raises(ValueError):
        classify_integrability((0, 0, 0), 2, "G0")
    with pytest.raises(InvalidParameterError):
        classify_integrability((0, 0, 0), -1, Half.PLUS)


def test_expansion_of_W():
    W = expansion_W(12)
    assert is_exactly(W.prefactor, 1 / (2 * sympy.pi))
    leading = W.principal[0]
    assert leading.m == (-1, 0, 0) and leading.p == 1
    with pytest.raises(OrderExhaustedError):
        expansion_W(0)


def test_W_series_against_closed_form():
    p = GroupPoint(0.0, 0.0, math.e ** 3)
    assert_allclose(evaluate(expansion_W(20), p), kernel_W(p), rtol=1e-10)
    with pytest.raises(OutOfDomainError):
        evaluate(expansion_W(4), GroupPoint(0.0, 0.0, math.exp(0.5)))


def test_truncation_bound_dominates_the_tail():
    p = GroupPoint(1.0, -2.0, 3.0)
    short = expansion_W(3)
    assert abs(evaluate(short, p) - kernel_W(p)) <= truncation_bound(short, p)


def test_first_derivatives_of_W():
    X1W = derive(expansion_W(), 1)
    (term,) = X1W.principal
    assert term.m == (-1, 1, 0) and term.p == 2
    assert is_exactly(X1W.prefactor * term.coeff, -1 / sympy.pi)

    X0W = derive(expansion_W(), 0)
    (term,) = X0W.principal
    assert term.m == (0, 0, 0) and term.p == 2
    assert is_exactly(X0W.prefactor * term.coeff, -1 / sympy.pi)

    with pytest.raises(InvalidParameterError):
        derive(expansion_W(), 3)


def test_second_order_constants_for_k00():
    k00 = second_order_kernel(0, 0)
    assert is_exactly(k00.alpha, -2 / sympy.pi)
    assert is_exactly(k00.beta, 4 / sympy.pi)
    assert k00.m == (0, 0, 0)
    assert k00.n == (1, 0, 0)


def test_k11_principal_part():
    k11 = second_order_kernel(1, 1)
    assert is_exactly(k11.alpha, -1 / sympy.pi)
    assert is_exactly(k11.beta, 4 / sympy.pi)
    assert k11.n == (-1, 2, 0)


@pytest.mark.parametrize("i,j", PAIRS)
def test_second_order_shapes(i, j):
    k = second_order_kernel(i, j)
    assert k.beta != 0
    assert sum(k.n) == 1
    assert k.m is None or sum(k.m) == 0
    for monomial in k.terms.q_bucket:
        p = monomial.effective_p
        assert classify_integrability(monomial.m, p, Half.PLUS)
        assert classify_integrability(monomial.m, p, Half.MINUS)


@pytest.mark.parametrize("i,j", PAIRS)
def test_third_order_shapes(i, j):
    expansion = third_derivative_X2(i, j)
    assert expansion.theta != 0
    assert sum(expansion.n) == 2
    assert expansion.h is None or sum(expansion.h) == 0
    constants = expansion.principal_constants()
    assert constants
    assert all(p in (2, 3, 4) for _, _, p in constants)


def test_swap_symmetry_of_k22_and_k11():
    k11, k22 = second_order_kernel(1, 1), second_order_kernel(2, 2)
    assert k22.terms.describe() == k11.terms.swapped().describe()


def test_describe_is_json_ready():
    description = second_order_kernel(0, 0).describe()
    assert description["constants"] == {"alpha": "-2/pi", "beta": "4/pi"}
    assert description["indices"] == [0, 0]
