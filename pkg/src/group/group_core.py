"""
Group arithmetic, metric, Haar measures and vector fields on G = R^2 x| R^+

Points are (x1, x2, a) with a > 0 and product
(x1, x2, a)(y1, y2, b) = (x1 + a y1, x2 + a y2, a b).
Coordinates may be numpy arrays; every operation broadcasts.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np

from src.utils.errors import InvalidParameterError, InvalidPointError, NonFiniteError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

A_MIN = 1e-300
A_MAX = 1e300


def _coerce(value) -> ArrayLike:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr)
    return arr


@dataclass(frozen=True)
class GroupPoint:
    """A point (x1, x2, a) of G; fields may be broadcastable arrays"""

    x1: ArrayLike
    x2: ArrayLike
    a: ArrayLike

    def __post_init__(self):
        x1, x2, a = _coerce(self.x1), _coerce(self.x2), _coerce(self.a)
        if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2)) and np.all(np.isfinite(a))):
            raise InvalidPointError("group point coordinates must be finite")
        if np.any(a < A_MIN) or np.any(a > A_MAX):
            raise InvalidPointError(f"height a must lie in [{A_MIN}, {A_MAX}]")
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)
        object.__setattr__(self, "a", a)

    @classmethod
    def identity(cls) -> "GroupPoint":
        return cls(0.0, 0.0, 1.0)

    @property
    def u(self) -> ArrayLike:
        return np.log(self.a) if isinstance(self.a, np.ndarray) else math.log(self.a)

    @property
    def shape(self) -> Tuple[int, ...]:
        return np.broadcast(np.asarray(self.x1), np.asarray(self.x2), np.asarray(self.a)).shape

    def to_log(self) -> "LogCoords":
        return LogCoords(self.x1, self.x2, self.u)

    def as_tuple(self) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
        return self.x1, self.x2, self.a

    def __mul__(self, other: "GroupPoint") -> "GroupPoint":
        return multiply(self, other)

    def __getitem__(self, index) -> "GroupPoint":
        x1, x2, a = np.broadcast_arrays(np.asarray(self.x1), np.asarray(self.x2), np.asarray(self.a))
        return GroupPoint(x1[index], x2[index], a[index])


@dataclass(frozen=True)
class LogCoords:
    """Coordinates (x1, x2, u = log a) in which the right Haar measure is Lebesgue"""

    x1: ArrayLike
    x2: ArrayLike
    u: ArrayLike

    def to_point(self) -> GroupPoint:
        return GroupPoint(self.x1, self.x2, np.exp(self.u))


def _check_field(i: int) -> int:
    if i not in (0, 1, 2):
        raise InvalidParameterError(f"field index must be 0, 1 or 2 (got {i})")
    return i


def identity() -> GroupPoint:
    return GroupPoint.identity()


def multiply(p: GroupPoint, q: GroupPoint) -> GroupPoint:
    return GroupPoint(p.x1 + p.a * q.x1, p.x2 + p.a * q.x2, p.a * q.a)


def inverse(p: GroupPoint) -> GroupPoint:
    return GroupPoint(-p.x1 / p.a, -p.x2 / p.a, 1.0 / p.a)


def cosh_radius_minus_one(p: GroupPoint) -> ArrayLike:
    """cosh r(p) - 1 = ((1 - a)^2 + |x|^2) / (2a), free of cancellation near e"""
    a = p.a
    d = 0.5 * ((1.0 - a) * ((1.0 - a) / a) + (p.x1 * p.x1 + p.x2 * p.x2) / a)
    assert np.all(d >= 0.0), "cosh r must be >= 1"
    return d


def _arccosh1p(d: ArrayLike) -> ArrayLike:
    # arcosh(1 + d) = log(1 + d + sqrt(d (d + 2))); log1p keeps full precision for small d
    return np.log1p(d + np.sqrt(d * (d + 2.0)))


def radius(p: GroupPoint) -> ArrayLike:
    """r(p) = d(p, e)"""
    return _coerce(_arccosh1p(cosh_radius_minus_one(p)))


def radius_derivative(i: int, p: GroupPoint) -> ArrayLike:
    """X_i r in closed form: (a - cosh r) / sinh r for i = 0, x_i / sinh r for i = 1, 2"""
    _check_field(i)
    d = np.asarray(cosh_radius_minus_one(p), dtype=float)
    if np.any(d == 0.0):
        raise InvalidPointError("the distance from e is not differentiable at e")
    sinh_r = np.sqrt(d * (d + 2.0))
    if i == 0:
        return _coerce((p.a - 1.0 - d) / sinh_r)
    return _coerce((p.x1 if i == 1 else p.x2) / sinh_r)


def distance(p: GroupPoint, q: GroupPoint) -> ArrayLike:
    """Left-invariant distance, computed as r(p^-1 q)"""
    dx1 = q.x1 - p.x1
    dx2 = q.x2 - p.x2
    da = p.a - q.a
    d = (da * da + dx1 * dx1 + dx2 * dx2) / (2.0 * p.a * q.a)
    assert np.all(d >= 0.0), "cosh d(p, q) must be >= 1"
    return _coerce(_arccosh1p(d))


def modular(p: GroupPoint) -> ArrayLike:
    """delta(x1, x2, a) = a^-2"""
    return _coerce(1.0 / (p.a * p.a))


def euclidean_norm(p: GroupPoint) -> ArrayLike:
    """|(x1, x2, log a)|, the chart norm used near the identity"""
    u = np.log(p.a)
    return _coerce(np.sqrt(p.x1 * p.x1 + p.x2 * p.x2 + u * u))


def flow(i: int, t: ArrayLike) -> GroupPoint:
    """exp(t X_i) for X_0 = a d/da, X_1 = a d/dx1, X_2 = a d/dx2"""
    _check_field(i)
    t = _coerce(t)
    zero = np.zeros_like(t) if isinstance(t, np.ndarray) else 0.0
    one = np.ones_like(t) if isinstance(t, np.ndarray) else 1.0
    if i == 0:
        return GroupPoint(zero, zero, np.exp(t))
    if i == 1:
        return GroupPoint(t, zero, one)
    return GroupPoint(zero, t, one)


def _finite_or_raise(values, label: str):
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"{label} returned a non-finite value at a stencil point")
    return values


def _central(f: Callable[[GroupPoint], ArrayLike], plus: GroupPoint, minus: GroupPoint, h: float) -> ArrayLike:
    f_plus = _finite_or_raise(np.asarray(f(plus), dtype=float), "field derivative")
    f_minus = _finite_or_raise(np.asarray(f(minus), dtype=float), "field derivative")
    return (f_plus - f_minus) / (2.0 * h)


def field_derivative(
    i: int,
    f: Callable[[GroupPoint], ArrayLike],
    p: GroupPoint,
    h: float = 1e-5,
    richardson: bool = False,
) -> ArrayLike:
    """Central-difference approximation of X_i f(p) along t -> p exp(t X_i)"""
    _check_field(i)
    if not (1e-7 <= h <= 1e-3):
        raise InvalidParameterError(f"finite-difference step must lie in [1e-7, 1e-3] (got {h})")

    def estimate(step: float) -> ArrayLike:
        return _central(f, multiply(p, flow(i, step)), multiply(p, flow(i, -step)), step)

    coarse = estimate(h)
    if not richardson:
        return _coerce(coarse)
    fine = estimate(h / 2.0)
    return _coerce((4.0 * fine - coarse) / 3.0)


def right_invariant_derivative(
    j: int,
    f: Callable[[GroupPoint], ArrayLike],
    p: GroupPoint,
    h: float = 1e-5,
) -> ArrayLike:
    """Central-difference approximation of X_j^r f(p) along t -> exp(t X_j) p"""
    _check_field(j)
    if not (1e-7 <= h <= 1e-3):
        raise InvalidParameterError(f"finite-difference step must lie in [1e-7, 1e-3] (got {h})")
    return _coerce(_central(f, multiply(flow(j, h), p), multiply(flow(j, -h), p), h))


def sample_points(rng: np.random.Generator, n: int, spread: float = 1.0) -> GroupPoint:
    """n points with Gaussian (x1, x2, log a) of standard deviation `spread`"""
    coords = rng.normal(0.0, spread, size=(3, n))
    return GroupPoint(coords[0], coords[1], np.exp(coords[2]))


def ball_volume(r: float, tol: float = 1e-8) -> float:
    """rho-measure of the geodesic ball {d(., e) < r}, integrated over geodesic shells"""
    if not r > 0:
        raise InvalidParameterError(f"ball radius must be positive (got {r})")
    from src.quadrature.quadrature import ShellRegion, integrate_region

    result = integrate_region(lambda x1, x2, a: np.ones_like(a), ShellRegion("both"), 0.0, r, tol=tol)
    return result.value


def euclidean_comparison(n: int = 2000, max_radius: float = 1.0, seed: int = 0) -> Tuple[float, float]:
    """Empirical constants c, C with c |x| <= r(x) <= C |x| on {0 < r < max_radius}"""
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(3, n))
    directions /= np.linalg.norm(directions, axis=0)
    lengths = max_radius * rng.uniform(0.01, 1.0, size=n)
    coords = directions * lengths
    p = GroupPoint(coords[0], coords[1], np.exp(coords[2]))
    ratio = np.asarray(radius(p)) / lengths
    inside = np.asarray(radius(p)) < max_radius
    if not np.any(inside):
        raise InvalidParameterError("no samples fell inside the requested ball")
    lower, upper = float(ratio[inside].min()), float(ratio[inside].max())
    logger.debug(f"Euclidean comparison on r < {max_radius}: {lower:.4f} <= r/|x| <= {upper:.4f}")
    return lower, upper
