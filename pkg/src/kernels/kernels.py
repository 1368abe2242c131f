"""
Closed-form kernels of the distinguished Laplacian on G and of its Riesz transforms

All routines accept GroupPoint arguments with scalar or array coordinates.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate as sp_integrate
from scipy.special import gamma as gamma_function

from src.algebra.term_algebra import evaluate as evaluate_terms
from src.algebra.term_algebra import second_order_kernel
from src.group.group_core import (
    GroupPoint,
    cosh_radius_minus_one,
    field_derivative,
    inverse,
    modular,
    multiply,
    radius,
    right_invariant_derivative,
)
from src.quadrature.quadrature import ShellRegion, integrate_region
from src.utils.errors import InvalidParameterError, SingularPointError, StrategyDisagreementError

logger = logging.getLogger(__name__)

SMALL_R = 1e-6
CROSSOVER_RADIUS = 3.0
OVERLAP_BAND = (2.5, 3.5)
A0 = 1.0

Kernel = Callable[[GroupPoint], np.ndarray]


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def _hyperbolic(p: GroupPoint) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(r, sinh r, cosh r) of p without cancellation near e"""
    d = np.asarray(cosh_radius_minus_one(p), dtype=float)
    sinh_r = np.sqrt(d * (d + 2.0))
    r = np.log1p(d + sinh_r)
    return r, sinh_r, 1.0 + d


def _nonsingular(p: GroupPoint, name: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    r, sinh_r, cosh_r = _hyperbolic(p)
    if np.any(r == 0.0):
        raise SingularPointError(f"{name} is singular at the identity")
    return r, sinh_r, cosh_r


def _r_over_sinh(r: np.ndarray, sinh_r: np.ndarray) -> np.ndarray:
    small = r < SMALL_R
    safe = np.where(small, 1.0, sinh_r)
    return np.where(small, 1.0 - r * r / 6.0, r / safe)


def heat_kernel(t: float, p: GroupPoint) -> np.ndarray:
    """p_t = (8 pi^3/2)^-1 delta^1/2 (r / sinh r) t^-3/2 e^(-r^2 / 4t)"""
    if not t > 0:
        raise InvalidParameterError(f"heat time must be positive (got {t})")
    r, sinh_r, _ = _hyperbolic(p)
    value = _r_over_sinh(r, sinh_r) * t ** -1.5 * np.exp(-r * r / (4.0 * t)) / (8.0 * math.pi ** 1.5 * p.a)
    return _out(value)


def kernel_U(p: GroupPoint) -> np.ndarray:
    """Convolution kernel of Delta^-1/2"""
    r, sinh_r, _ = _nonsingular(p, "U")
    return _out(1.0 / (2.0 * math.pi ** 2 * p.a * r * sinh_r))


def kernel_W(p: GroupPoint) -> np.ndarray:
    """Convolution kernel of Delta^-1"""
    _, sinh_r, _ = _nonsingular(p, "W")
    return _out(1.0 / (4.0 * math.pi * p.a * sinh_r))


def first_derivative_W(i: int, p: GroupPoint) -> np.ndarray:
    """X_i W in closed form"""
    _, s, c = _nonsingular(p, "X_i W")
    if i == 0:
        value = -(1.0 / s + c * (p.a - c) / s ** 3) / (4.0 * math.pi * p.a)
    elif i in (1, 2):
        x = p.x1 if i == 1 else p.x2
        value = -x * c / (4.0 * math.pi * p.a * s ** 3)
    else:
        raise InvalidParameterError(f"field index must be 0, 1 or 2 (got {i})")
    return _out(value)


def _radial_factor(r, s, c):
    # (sinh r + r cosh r) / (r^2 sinh^3 r)
    return (s + r * c) / (r * r * s ** 3)


def _second_radial_factor(r, s, c):
    # 2 r^2 cosh^2 r + r^2 + 2 sinh^2 r + 3 r sinh r cosh r
    return 2.0 * r * r * c * c + r * r + 2.0 * s * s + 3.0 * r * s * c


def kernel_k(i: int, p: GroupPoint) -> np.ndarray:
    """Convolution kernel k_i = X_i U of the first-order Riesz transform R_i"""
    r, s, c = _nonsingular(p, "k_i")
    F = _radial_factor(r, s, c)
    if i in (1, 2):
        x = p.x1 if i == 1 else p.x2
        value = -x * F / (2.0 * math.pi ** 2 * p.a)
    elif i == 0:
        shape = 0.5 * (-1.0 + (1.0 + p.x1 ** 2 + p.x2 ** 2) / p.a ** 2)
        value = -1.0 / (2.0 * math.pi ** 2 * p.a * r * s) + shape * F / (2.0 * math.pi ** 2)
    else:
        raise InvalidParameterError(f"field index must be 0, 1 or 2 (got {i})")
    return _out(value)


def kernel_X2k1(p: GroupPoint) -> np.ndarray:
    r, s, c = _nonsingular(p, "X_2 k_1")
    value = p.x1 * p.x2 * _second_radial_factor(r, s, c) / (2.0 * math.pi ** 2 * p.a * r ** 3 * s ** 5)
    return _out(value)


def kernel_X0k0(p: GroupPoint) -> np.ndarray:
    r, s, c = _nonsingular(p, "X_0 k_0")
    norm = 1.0 + p.x1 ** 2 + p.x2 ** 2
    w = p.a - norm / p.a
    value = (
        1.0 / (p.a * r * s)
        + 0.5 * (1.0 - 3.0 * norm / p.a ** 2) * _radial_factor(r, s, c)
        + 0.25 * w * w * _second_radial_factor(r, s, c) / (p.a * r ** 3 * s ** 5)
    ) / (2.0 * math.pi ** 2)
    return _out(value)


def subordinated_kernel(alpha: float, p: GroupPoint) -> float:
    """Gamma(alpha/2)^-1 int_0^inf t^(alpha/2 - 1) p_t dt: U for alpha = 1, W for alpha = 2"""
    if not 0 < alpha < 3:
        raise InvalidParameterError(f"subordination exponent must lie in (0, 3) (got {alpha})")
    r = float(radius(p))
    if r == 0.0:
        raise SingularPointError("subordinated kernels are singular at the identity")

    def integrand(t):
        return t ** (0.5 * alpha - 1.0) * heat_kernel(t, p)

    split = r * r
    head, _ = sp_integrate.quad(integrand, 0.0, split, epsabs=0.0, epsrel=1e-12, limit=200)
    tail, _ = sp_integrate.quad(integrand, split, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    return (head + tail) / gamma_function(0.5 * alpha)


def heat_mass(t: float, tol: float = 1e-9) -> float:
    """rho-integral of p_t, computed over geodesic shells up to where the Gaussian factor vanishes"""
    r_max = 2.0 + 14.0 * math.sqrt(t)
    result = integrate_region(
        lambda x1, x2, a: heat_kernel(t, GroupPoint(x1, x2, a)), ShellRegion("both"), 0.0, r_max, tol=tol
    )
    return result.value


def group_convolution(f: Kernel, k: Kernel, x: GroupPoint, r_max: float, tol: float = 1e-9) -> float:
    """(f * k)(x) = int f(x y^-1) k(y) d rho(y) over the geodesic ball of radius r_max around e"""

    def integrand(y1, y2, b):
        y = GroupPoint(y1, y2, b)
        return f(multiply(x, inverse(y))) * k(y)

    return integrate_region(integrand, ShellRegion("both"), 0.0, r_max, tol=tol).value


def integral_kernel(op: str, x: GroupPoint, y: GroupPoint, i: int, j: Optional[int] = None) -> np.ndarray:
    """Integral kernels of R_i, S_i, R_ij and S_ij"""
    if op == "R":
        return _out(modular(y) * kernel_k(i, multiply(inverse(y), x)))
    if op == "S":
        return _out(-modular(x) * kernel_k(i, multiply(inverse(x), y)))
    if j is None:
        raise InvalidParameterError(f"operator {op} needs two field indices")
    if op == "Rij":
        return _out(modular(y) * kernel_kij(i, j, multiply(inverse(y), x)))
    if op == "Sij":
        return _out(modular(x) * kernel_kij(j, i, multiply(inverse(x), y)))
    raise InvalidParameterError(f"unknown operator {op!r}")


def _near_kij(i: int, j: int, p: GroupPoint) -> np.ndarray:
    return field_derivative(i, lambda q: first_derivative_W(j, q), p, h=1e-4, richardson=True)


def _far_kij(i: int, j: int, p: GroupPoint, K: int) -> np.ndarray:
    return evaluate_terms(second_order_kernel(i, j, K).terms, p)


def kernel_kij(i: int, j: int, p: GroupPoint, K: int = 12) -> np.ndarray:
    """k_ij = X_i X_j W: finite differences of X_j W for r <= 3, series expansion beyond"""
    r = np.asarray(_nonsingular(p, "k_ij")[0])
    if r.ndim == 0:
        return _out(_near_kij(i, j, p) if r <= CROSSOVER_RADIUS else _far_kij(i, j, p, K))
    x1, x2, a = np.broadcast_arrays(np.asarray(p.x1), np.asarray(p.x2), np.asarray(p.a))
    out = np.empty(r.shape)
    near = r <= CROSSOVER_RADIUS
    if np.any(near):
        out[near] = _near_kij(i, j, GroupPoint(x1[near], x2[near], a[near]))
    if np.any(~near):
        out[~near] = _far_kij(i, j, GroupPoint(x1[~near], x2[~near], a[~near]), K)
    return out


def check_kij_overlap(i: int, j: int, p: GroupPoint, rtol: float = 1e-3, K: int = 12) -> float:
    """Largest relative disagreement of the two k_ij strategies at points of the overlap band"""
    r = np.asarray(radius(p))
    if np.any(r < OVERLAP_BAND[0]) or np.any(r > OVERLAP_BAND[1]):
        raise InvalidParameterError(f"overlap points must satisfy {OVERLAP_BAND[0]} <= r <= {OVERLAP_BAND[1]}")
    near = np.asarray(_near_kij(i, j, p))
    far = np.asarray(_far_kij(i, j, p, K))
    scale = np.maximum(np.abs(near), np.max(np.abs(near)) * 1e-6)
    worst = float(np.max(np.abs(near - far) / scale))
    if worst > rtol:
        raise StrategyDisagreementError(f"k_{i}{j} strategies disagree by {worst:.2e}", worst)
    return worst


def modular_derivative_at_identity(j: int) -> float:
    """X_j delta(e)"""
    return -2.0 if j == 0 else 0.0


def kernel_gij(i: int, j: int, p: GroupPoint) -> np.ndarray:
    """Convolution kernel of T_ij: -X_j^r X_i W + X_j delta(e) X_i W"""
    _nonsingular(p, "g_ij")
    value = -right_invariant_derivative(j, lambda q: first_derivative_W(i, q), p, h=1e-4)
    c = modular_derivative_at_identity(j)
    if c != 0.0:
        value = value + c * first_derivative_W(i, p)
    return _out(value)


def kernel_lij(i: int, j: int, p: GroupPoint) -> np.ndarray:
    """Convolution kernel of S_ij: delta(w) k_ji(w^-1)"""
    return _out(modular(p) * kernel_kij(j, i, inverse(p)))


def cutoff(s) -> np.ndarray:
    """Smooth radial profile equal to 1 on [0, 1] and 0 on [2, inf)"""
    s = np.asarray(s, dtype=float)

    def bump(v):
        positive = v > 0
        return np.where(positive, np.exp(-1.0 / np.where(positive, v, 1.0)), 0.0)

    inner, outer = bump(2.0 - s), bump(s - 1.0)
    return _out(inner / (inner + outer))


_LOCAL = {
    "k": kernel_kij,
    "g": kernel_gij,
    "l": kernel_lij,
}


def local_kernel(tag: str, i: int, j: int) -> Kernel:
    """Cut-off part (supported in B_2) of k_ij, g_ij or l_ij"""
    if tag not in _LOCAL:
        raise InvalidParameterError(f"local kernel tag must be one of {sorted(_LOCAL)} (got {tag!r})")
    base = _LOCAL[tag]

    def evaluate(p: GroupPoint) -> np.ndarray:
        return _out(base(i, j, p) * cutoff(radius(p)))

    evaluate.__name__ = f"{tag}{i}{j}_local"
    return evaluate


def beta_local(kernel: Kernel, X, Y, a0: float = A0) -> np.ndarray:
    """delta(y) k(y^-1 x) written in (x1, x2, log a) coordinates: e^-2t k(e^-t (x - y), e^(s - t))"""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if np.any(np.linalg.norm(Y, axis=-1) >= 2.0 * a0):
        raise InvalidParameterError(f"second argument must satisfy |Y| < {2.0 * a0}")
    if np.any(np.all(X == Y, axis=-1)):
        raise SingularPointError("beta kernel is singular on the diagonal")
    t = Y[..., 2]
    scale = np.exp(-t)
    w = GroupPoint(scale * (X[..., 0] - Y[..., 0]), scale * (X[..., 1] - Y[..., 1]), np.exp(X[..., 2] - t))
    return _out(np.exp(-2.0 * t) * kernel(w))


def beta_gradient_Y(kernel: Kernel, X, Y, h: float = 1e-6, a0: float = A0) -> np.ndarray:
    """Central-difference gradient of beta_local in its second argument"""
    Y = np.asarray(Y, dtype=float)
    columns = []
    for axis in range(3):
        step = np.zeros(3)
        step[axis] = h
        columns.append((beta_local(kernel, X, Y + step, a0) - beta_local(kernel, X, Y - step, a0)) / (2.0 * h))
    return np.stack(columns, axis=-1)


def local_kernel_bounds(kernel: Kernel, n: int = 2000, seed: int = 0, h: float = 1e-6) -> Tuple[float, float]:
    """max |k| |x|^3 and max |grad k| |x|^4 over samples of B_2 minus e, |x| = |(x1, x2, log a)|"""
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(n, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    coords = directions * rng.uniform(0.02, 2.0, size=(n, 1))

    def at(c):
        return np.asarray(kernel(GroupPoint(c[:, 0], c[:, 1], np.exp(c[:, 2]))))

    norms = np.linalg.norm(coords, axis=1)
    values = at(coords)
    gradient = np.stack([(at(coords + h * e) - at(coords - h * e)) / (2.0 * h) for e in np.eye(3)], axis=1)
    return float(np.max(np.abs(values) * norms ** 3)), float(np.max(np.linalg.norm(gradient, axis=1) * norms ** 4))


@dataclass(frozen=True)
class PsiProfile:
    """psi(y) = alpha y^m / (1 + |y|^2)^2 + beta y^n / (1 + |y|^2)^3 on R^2"""

    i: int
    j: int
    alpha: float
    m: Tuple[int, int]
    beta: float
    n: Tuple[int, int]

    def __call__(self, y1, y2) -> np.ndarray:
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        q = 1.0 + y1 * y1 + y2 * y2
        value = self.beta * y1 ** self.n[0] * y2 ** self.n[1] / q ** 3
        if self.alpha != 0.0:
            value = value + self.alpha * y1 ** self.m[0] * y2 ** self.m[1] / q ** 2
        return value

    def decay_constant(self, max_radius: float = 100.0, samples: int = 400) -> float:
        """max over a polar grid of |psi(y)| (1 + |y|)^3"""
        radii = np.linspace(0.0, max_radius, samples)
        angles = np.linspace(0.0, 2.0 * np.pi, 72, endpoint=False)
        R, A = np.meshgrid(radii, angles, indexing="ij")
        values = np.abs(self(R * np.cos(A), R * np.sin(A))) * (1.0 + R) ** 3
        return float(values.max())


def psi_ij(i: int, j: int, K: int = 12) -> PsiProfile:
    """Dilation profile of the principal part of k_ij on {a >= 1}"""
    expansion = second_order_kernel(i, j, K)
    m = expansion.m[1:] if expansion.m else (0, 0)
    return PsiProfile(i, j, float(expansion.alpha), tuple(m), float(expansion.beta), tuple(expansion.n[1:]))


@dataclass(frozen=True)
class KernelSplit:
    """k_ij^inf = (1 - cutoff) k_ij split into k1 (a <= 1), k3 = a^-2 psi(x / a) and k2 = k^inf - k3 (a > 1)"""

    i: int
    j: int
    psi: PsiProfile

    @classmethod
    def build(cls, i: int, j: int, K: int = 12) -> "KernelSplit":
        return cls(i, j, psi_ij(i, j, K))

    def k_inf(self, p: GroupPoint) -> np.ndarray:
        r = radius(p)
        weight = 1.0 - np.asarray(cutoff(r))
        if np.ndim(r) == 0 and weight == 0.0:
            return 0.0
        return _out(weight * kernel_kij(self.i, self.j, p))

    def k3(self, p: GroupPoint, restricted: bool = True) -> np.ndarray:
        value = self.psi(p.x1 / p.a, p.x2 / p.a) / p.a ** 2
        if restricted:
            value = np.where((np.asarray(radius(p)) > 1.0) & (np.asarray(p.a) > 1.0), value, 0.0)
        return _out(value)

    def k1(self, p: GroupPoint) -> np.ndarray:
        return _out(np.where(np.asarray(p.a) <= 1.0, self.k_inf(p), 0.0))

    def k2(self, p: GroupPoint) -> np.ndarray:
        return _out(np.where(np.asarray(p.a) > 1.0, np.asarray(self.k_inf(p)) - np.asarray(self.k3(p)), 0.0))
