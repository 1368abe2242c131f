"""
Truncated-series term algebra for far-field kernel expansions

An expression is a sum of monomials

    coeff * a^m0 x1^m1 x2^m2 * e^(-p r) * (c_0 + c_1 e^(-2r) + ... + c_K e^(-2Kr))

valid outside the closed unit ball around e. The engine differentiates such sums along
X_0, X_1, X_2 with the exact rules

    X_i r = 2 x_i e^-r G(r)            (i = 1, 2)
    X_0 r = 2 a e^-r G(r) - H(r)

where G = 1/(1 - e^-2r) and H = coth r, both expanded in e^-2r, and sorts the result into
a non-integrable principal part and an integrable remainder bucket.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from src.group.group_core import GroupPoint, radius
from src.utils.errors import InvalidParameterError, OrderExhaustedError, OutOfDomainError, ShapeMismatchError

logger = logging.getLogger(__name__)

Exponent = Tuple[int, int, int]

ZERO = sympy.Integer(0)
ONE = sympy.Integer(1)


def _exact(value) -> sympy.Expr:
    if isinstance(value, sympy.Basic):
        return value
    if isinstance(value, int):
        return sympy.Integer(value)
    return sympy.nsimplify(value, rational=True)


@dataclass(frozen=True)
class ExpSeries:
    """c_0 + c_1 e^-2r + ... + c_K e^-2Kr with exact coefficients"""

    coefficients: Tuple[sympy.Expr, ...]
    truncated: bool = False

    def __post_init__(self):
        coefficients = tuple(_exact(c) for c in self.coefficients)
        if not coefficients:
            raise InvalidParameterError("a series needs at least one coefficient")
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @classmethod
    def zero(cls, K: int) -> "ExpSeries":
        return cls((ZERO,) * (K + 1))

    @classmethod
    def one(cls, K: int) -> "ExpSeries":
        return cls((ONE,) + (ZERO,) * K)

    @classmethod
    def geometric(cls, K: int) -> "ExpSeries":
        """1/(1 - e^-2r)"""
        return cls((ONE,) * (K + 1))

    @classmethod
    def coth(cls, K: int) -> "ExpSeries":
        """coth r = 1 + 2 sum_k e^-2kr"""
        return cls((ONE,) + (sympy.Integer(2),) * K)

    @property
    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coefficients)

    @property
    def is_s_type(self) -> bool:
        return self.coefficients[0] == 1

    @property
    def is_r_type(self) -> bool:
        return self.coefficients[0] == 0

    @property
    def leading_index(self) -> Optional[int]:
        for k, c in enumerate(self.coefficients):
            if c != 0:
                return k
        return None

    def _aligned(self, other: "ExpSeries") -> int:
        return min(self.order, other.order)

    def __add__(self, other: "ExpSeries") -> "ExpSeries":
        K = self._aligned(other)
        coefficients = tuple(self.coefficients[k] + other.coefficients[k] for k in range(K + 1))
        return ExpSeries(coefficients, self.truncated or other.truncated or self.order != other.order)

    def __neg__(self) -> "ExpSeries":
        return self.scale(-1)

    def __sub__(self, other: "ExpSeries") -> "ExpSeries":
        return self + (-other)

    def scale(self, factor) -> "ExpSeries":
        factor = _exact(factor)
        return ExpSeries(tuple(factor * c for c in self.coefficients), self.truncated)

    def __mul__(self, other: "ExpSeries") -> "ExpSeries":
        K = self._aligned(other)
        product = [ZERO] * (K + 1)
        dropped = False
        for i, ci in enumerate(self.coefficients):
            if ci == 0:
                continue
            for j, cj in enumerate(other.coefficients):
                if cj == 0:
                    continue
                if i + j > K:
                    dropped = True
                    continue
                product[i + j] += ci * cj
        return ExpSeries(tuple(product), self.truncated or other.truncated or dropped)

    def derivative(self) -> "ExpSeries":
        """Termwise d/dr"""
        return ExpSeries(tuple(-2 * k * c for k, c in enumerate(self.coefficients)), self.truncated)

    def split_leading(self) -> Tuple[sympy.Expr, "ExpSeries"]:
        c0 = self.coefficients[0]
        return c0, ExpSeries((ZERO,) + self.coefficients[1:], self.truncated)

    def evaluate(self, r) -> np.ndarray:
        z = np.exp(-2.0 * np.asarray(r, dtype=float))
        total = np.zeros_like(z)
        for c in reversed(self.coefficients):
            total = total * z + float(c)
        return total

    def max_abs(self) -> float:
        return max(abs(float(c)) for c in self.coefficients)


def _check_exponent(m: Sequence[int]) -> Exponent:
    m = tuple(int(v) for v in m)
    if len(m) != 3 or m[0] < -1 or m[1] < 0 or m[2] < 0:
        raise InvalidParameterError(f"exponent must satisfy m0 >= -1, m1 >= 0, m2 >= 0 (got {m})")
    return m


@dataclass(frozen=True)
class Monomial:
    """coeff * a^m0 x1^m1 x2^m2 e^(-p r) * series(r)"""

    coeff: sympy.Expr
    m: Exponent
    p: int
    series: ExpSeries

    def __post_init__(self):
        object.__setattr__(self, "coeff", _exact(self.coeff))
        object.__setattr__(self, "m", _check_exponent(self.m))
        if self.p < 0:
            raise InvalidParameterError(f"exponential order must be nonnegative (got {self.p})")

    @property
    def degree(self) -> int:
        return sum(self.m)

    @property
    def key(self) -> Tuple[int, Exponent]:
        return self.p, self.m

    @property
    def effective_p(self) -> int:
        k = self.series.leading_index
        return self.p + 2 * (k or 0)

    @property
    def is_zero(self) -> bool:
        return self.coeff == 0 or self.series.is_zero

    def scaled_series(self) -> ExpSeries:
        return self.series.scale(self.coeff)

    def evaluate(self, x1, x2, a, r) -> np.ndarray:
        m0, m1, m2 = self.m
        return (float(self.coeff) * a ** m0 * x1 ** m1 * x2 ** m2
                * np.exp(-self.p * r) * self.series.evaluate(r))

    def describe(self) -> Dict:
        return {
            "coeff": str(self.coeff),
            "m": list(self.m),
            "p": self.p,
            "series": [str(c) for c in self.series.coefficients],
        }


class Half(str, Enum):
    PLUS = "G+"
    MINUS = "G-"


def classify_integrability(m: Sequence[int], p: int, region) -> bool:
    """Whether a^m0 x1^m1 x2^m2 e^(-p r) is rho-integrable on the part of B_1^c with a > 1 or a < 1"""
    m0, m1, m2 = _check_exponent(m)
    if p < 0:
        raise InvalidParameterError(f"exponential order must be nonnegative (got {p})")
    half = Half(region)
    horizontal = m1 + m2 - 2 * p < -2
    if half is Half.PLUS:
        return horizontal and (m0 + m1 + m2) - p < -2
    return horizontal and m0 + p > 0


def _integrable(monomial: Monomial) -> bool:
    p = monomial.effective_p
    return classify_integrability(monomial.m, p, Half.PLUS) and classify_integrability(monomial.m, p, Half.MINUS)


def _merge(monomials: Iterable[Monomial], K: int) -> Tuple[Monomial, ...]:
    combined: Dict[Tuple[int, Exponent], ExpSeries] = {}
    for monomial in monomials:
        if monomial.is_zero:
            continue
        series = monomial.scaled_series()
        combined[monomial.key] = combined[monomial.key] + series if monomial.key in combined else series
    merged = []
    for (p, m), series in sorted(combined.items()):
        if series.is_zero:
            continue
        if all(c == 0 for c in series.coefficients[1:]):
            merged.append(Monomial(series.coefficients[0], m, p, replace(ExpSeries.one(K), truncated=series.truncated)))
        else:
            merged.append(Monomial(ONE, m, p, series))
    return tuple(merged)


@dataclass(frozen=True)
class TermSum:
    """prefactor * (principal + q_bucket); q_bucket members are integrable on B_1^c"""

    principal: Tuple[Monomial, ...]
    q_bucket: Tuple[Monomial, ...]
    prefactor: sympy.Expr = ONE
    order: int = 12

    @classmethod
    def empty(cls, K: int = 12) -> "TermSum":
        return cls((), (), ONE, K)

    @property
    def truncated(self) -> bool:
        return any(m.series.truncated for m in self.principal + self.q_bucket)

    @property
    def monomials(self) -> Tuple[Monomial, ...]:
        return self.principal + self.q_bucket

    def principal_by_p(self) -> Dict[int, List[Monomial]]:
        groups: Dict[int, List[Monomial]] = {}
        for monomial in self.principal:
            groups.setdefault(monomial.p, []).append(monomial)
        return groups

    def swapped(self) -> "TermSum":
        """The same sum with the roles of x1 and x2 exchanged"""
        def swap(monomial: Monomial) -> Monomial:
            m0, m1, m2 = monomial.m
            return Monomial(monomial.coeff, (m0, m2, m1), monomial.p, monomial.series)

        return TermSum(_merge(map(swap, self.principal), self.order),
                       _merge(map(swap, self.q_bucket), self.order),
                       self.prefactor, self.order)

    def describe(self) -> Dict:
        return {
            "prefactor": str(self.prefactor),
            "order": self.order,
            "truncated": self.truncated,
            "principal": [m.describe() for m in self.principal],
            "q_bucket": [m.describe() for m in self.q_bucket],
        }


def expansion_W(K: int = 12) -> TermSum:
    """W = (1/4 pi) a^-1 / sinh r = (1/2 pi) a^-1 e^-r S(r), S = 1/(1 - e^-2r)"""
    if K < 1:
        raise OrderExhaustedError(f"truncation order must be >= 1 (got {K})")
    leading = Monomial(ONE, (-1, 0, 0), 1, ExpSeries.geometric(K))
    return TermSum((leading,), (), 1 / (2 * sympy.pi), K)


def _derive_monomial(monomial: Monomial, i: int, K: int) -> List[Monomial]:
    c, (m0, m1, m2), p, s = monomial.coeff, monomial.m, monomial.p, monomial.series
    G = ExpSeries.geometric(K)
    D = s.scale(-p) + s.derivative()
    out = []
    if i in (1, 2):
        power = m1 if i == 1 else m2
        if power > 0:
            lowered = (m0 + 1, m1 - 1, m2) if i == 1 else (m0 + 1, m1, m2 - 1)
            out.append(Monomial(c * power, lowered, p, s))
        raised = (m0, m1 + 1, m2) if i == 1 else (m0, m1, m2 + 1)
        out.append(Monomial(2 * c, raised, p + 1, D * G))
    else:
        H = ExpSeries.coth(K)
        same = s.scale(m0) + (s.scale(p) - s.derivative()) * H
        out.append(Monomial(c, (m0, m1, m2), p, same))
        out.append(Monomial(2 * c, (m0 + 1, m1, m2), p + 1, D * G))
    return [term for term in out if not term.is_zero]


def _normalise(raw: Iterable[Monomial], K: int) -> Tuple[List[Monomial], List[Monomial]]:
    principal, q_bucket = [], []
    for monomial in raw:
        c0, rest = monomial.series.split_leading()
        if c0 != 0:
            leading = Monomial(monomial.coeff * c0, monomial.m, monomial.p,
                               replace(ExpSeries.one(K), truncated=monomial.series.truncated))
            (q_bucket if _integrable(leading) else principal).append(leading)
        if not rest.is_zero:
            q_bucket.append(Monomial(monomial.coeff, monomial.m, monomial.p, rest))
    return principal, q_bucket


def derive(ts: TermSum, i: int) -> TermSum:
    """X_i applied to a term sum; remainders and integrable leading terms go to the Q bucket"""
    if i not in (0, 1, 2):
        raise InvalidParameterError(f"field index must be 0, 1 or 2 (got {i})")
    K = ts.order
    if K < 1:
        raise OrderExhaustedError("truncation order reached 0")

    from_principal = [t for monomial in ts.principal for t in _derive_monomial(monomial, i, K)]
    from_q = [t for monomial in ts.q_bucket for t in _derive_monomial(monomial, i, K)]
    principal, q_bucket = _normalise(from_principal, K)
    q_bucket.extend(from_q)

    merged_q = _merge(q_bucket, K)
    for monomial in merged_q:
        if not _integrable(monomial):
            raise ShapeMismatchError(f"non-integrable monomial routed to the Q bucket: {monomial.describe()}")
    return TermSum(_merge(principal, K), merged_q, ts.prefactor, K)


def evaluate(ts: TermSum, p: GroupPoint) -> np.ndarray:
    """Numeric value of prefactor * (principal + q_bucket) at points with r > 1"""
    r = np.asarray(radius(p), dtype=float)
    if np.any(r <= 1.0):
        raise OutOfDomainError("term expansions are valid only outside the closed unit ball")
    total = np.zeros(np.broadcast(r, np.asarray(p.x1), np.asarray(p.x2)).shape)
    for monomial in ts.monomials:
        total = total + monomial.evaluate(p.x1, p.x2, p.a, r)
    value = float(ts.prefactor) * total
    return float(value) if np.ndim(value) == 0 else value


def truncation_bound(ts: TermSum, p: GroupPoint) -> np.ndarray:
    """Bound on the dropped series tail, sum |term| * max|c| * e^(-2(K+1)r) / (1 - e^-2r)"""
    r = np.asarray(radius(p), dtype=float)
    tail = np.exp(-2.0 * (ts.order + 1) * r) / (1.0 - np.exp(-2.0 * r))
    bound = np.zeros_like(r)
    for monomial in ts.monomials:
        m0, m1, m2 = monomial.m
        size = np.abs(float(monomial.coeff) * p.a ** m0 * p.x1 ** m1 * p.x2 ** m2 * np.exp(-monomial.p * r))
        bound = bound + size * monomial.series.max_abs() * 4.0 * (ts.order + 1)
    return np.abs(float(ts.prefactor)) * bound * tail


@dataclass(frozen=True)
class SecondOrderExpansion:
    """k_ij = X_i X_j W with principal alpha x^m e^-2r + beta x^n e^-3r"""

    i: int
    j: int
    terms: TermSum
    alpha: sympy.Expr
    m: Optional[Exponent]
    beta: sympy.Expr
    n: Exponent

    def describe(self) -> Dict:
        return {
            "indices": [self.i, self.j],
            "constants": {"alpha": str(self.alpha), "beta": str(self.beta)},
            "exponents": {"m": list(self.m) if self.m else None, "n": list(self.n)},
            "terms": self.terms.describe(),
        }


@dataclass(frozen=True)
class ThirdOrderExpansion:
    """X_2 k_ij with principal gamma x^h e^-2r + eta x^l e^-3r + sigma x^m e^-3r + theta x^n e^-4r"""

    i: int
    j: int
    terms: TermSum
    gamma: sympy.Expr
    h: Optional[Exponent]
    eta: sympy.Expr
    ell: Optional[Exponent]
    sigma: sympy.Expr
    m: Optional[Exponent]
    theta: sympy.Expr
    n: Exponent

    def principal_constants(self) -> List[Tuple[sympy.Expr, Exponent, int]]:
        """(constant, exponent, p) for each principal monomial, prefactor included"""
        return [(self.terms.prefactor * t.coeff, t.m, t.p) for t in self.terms.principal]

    def describe(self) -> Dict:
        def exp(e):
            return list(e) if e else None

        return {
            "indices": [self.i, self.j],
            "constants": {
                "gamma": str(self.gamma), "eta": str(self.eta),
                "sigma": str(self.sigma), "theta": str(self.theta),
            },
            "exponents": {"h": exp(self.h), "l": exp(self.ell), "m": exp(self.m), "n": exp(self.n)},
            "terms": self.terms.describe(),
        }


def _single(groups: Dict[int, List[Monomial]], p: int, degree: int, required: bool, limit: int = 1) -> List[Monomial]:
    found = groups.get(p, [])
    if len(found) > limit or (required and not found):
        raise ShapeMismatchError(f"expected {'exactly' if required else 'at most'} {limit} principal term(s) with p={p}, found {len(found)}")
    for monomial in found:
        if monomial.degree != degree:
            raise ShapeMismatchError(f"principal term with p={p} has |m|={monomial.degree}, expected {degree}")
    return found


@lru_cache(maxsize=None)
def second_order_kernel(i: int, j: int, K: int = 12) -> SecondOrderExpansion:
    """Derive X_i X_j W and match its principal part"""
    terms = derive(derive(expansion_W(K), j), i)
    groups = terms.principal_by_p()
    extra = set(groups) - {2, 3}
    if extra:
        raise ShapeMismatchError(f"unexpected principal orders {sorted(extra)} in k_{i}{j}")
    alpha_terms = _single(groups, 2, 0, required=False)
    beta_terms = _single(groups, 3, 1, required=True)

    beta_term = beta_terms[0]
    beta = sympy.simplify(terms.prefactor * beta_term.coeff)
    if beta == 0:
        raise ShapeMismatchError(f"beta_{i}{j} vanishes")
    n = beta_term.m
    if not (n[1] + n[2] - 6 < -2 and n[0] + 3 > 0):
        raise ShapeMismatchError(f"beta exponent {n} violates the sign conditions")

    if alpha_terms:
        alpha, m = sympy.simplify(terms.prefactor * alpha_terms[0].coeff), alpha_terms[0].m
        if not (m[1] + m[2] - 4 < -2 and m[0] + 2 > 0):
            raise ShapeMismatchError(f"alpha exponent {m} violates the sign conditions")
    else:
        alpha, m = ZERO, None

    logger.debug(f"k_{i}{j}: alpha={alpha} m={m} beta={beta} n={n}")
    return SecondOrderExpansion(i, j, terms, alpha, m, beta, n)


@lru_cache(maxsize=None)
def third_derivative_X2(i: int, j: int, K: int = 12) -> ThirdOrderExpansion:
    """Derive X_2 k_ij and match its principal part"""
    terms = derive(second_order_kernel(i, j, K).terms, 2)
    groups = terms.principal_by_p()
    extra = set(groups) - {2, 3, 4}
    if extra:
        raise ShapeMismatchError(f"unexpected principal orders {sorted(extra)} in X_2 k_{i}{j}")
    gamma_terms = _single(groups, 2, 0, required=False)
    middle = _single(groups, 3, 1, required=False, limit=2)
    theta_terms = _single(groups, 4, 2, required=True)

    def constant(monomial: Optional[Monomial]) -> sympy.Expr:
        return sympy.simplify(terms.prefactor * monomial.coeff) if monomial else ZERO

    theta = constant(theta_terms[0])
    if theta == 0:
        raise ShapeMismatchError(f"theta_{i}{j} vanishes")
    gamma_term = gamma_terms[0] if gamma_terms else None
    eta_term = middle[0] if len(middle) > 0 else None
    sigma_term = middle[1] if len(middle) > 1 else None
    return ThirdOrderExpansion(
        i, j, terms,
        constant(gamma_term), gamma_term.m if gamma_term else None,
        constant(eta_term), eta_term.m if eta_term else None,
        constant(sigma_term), sigma_term.m if sigma_term else None,
        theta, theta_terms[0].m,
    )
