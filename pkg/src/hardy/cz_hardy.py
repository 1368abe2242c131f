"""
Calderon-Zygmund sets, Hardy-space atoms and the counterexample constructions

A CZ set is a box [b1 - L/2, b1 + L/2] x [b2 - L/2, b2 + L/2] x [a e^-r, a e^r] whose side
is tied to its height by the admissibility inequalities. Atoms are mean-zero functions
supported in a CZ set and bounded by the inverse of its measure.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import sympy
from scipy import integrate as sp_integrate

from src.algebra.term_algebra import evaluate as evaluate_terms
from src.algebra.term_algebra import third_derivative_X2
from src.group.group_core import GroupPoint, distance, flow, inverse, modular, multiply
from src.kernels.kernels import PsiProfile, kernel_k, kernel_kij, kernel_U, kernel_X0k0, kernel_X2k1, psi_ij
from src.quadrature.quadrature import Box, GridFunction, ScanReport, convolve2d, integrate, kernel_gradient, kernel_radius, scan_tail
from src.utils.errors import GridTooCoarseError, InvalidParameterError, SearchFailureError

logger = logging.getLogger(__name__)

E2 = math.e ** 2
ADMISSIBLE_RTOL = 1e-12


@dataclass(frozen=True)
class CZSet:
    """Box of side L centred at (b1, b2) with heights a e^-r < a' < a e^r"""

    b1: float
    b2: float
    L: float
    a: float
    r: float

    def __post_init__(self):
        if not (self.L > 0 and self.a > 0 and self.r > 0):
            raise InvalidParameterError(f"CZ set needs positive L, a, r (got L={self.L}, a={self.a}, r={self.r})")

    @property
    def measure(self) -> float:
        return 2.0 * self.r * self.L * self.L

    @property
    def is_admissible(self) -> bool:
        if self.r < 1.0:
            lower, upper = E2 * self.a * self.r, math.e ** 8 * self.a * self.r
        else:
            lower, upper = self.a * math.exp(2.0 * self.r), self.a * math.exp(8.0 * self.r)
        return lower * (1.0 - ADMISSIBLE_RTOL) <= self.L < upper

    @property
    def heights(self) -> Tuple[float, float]:
        return self.a * math.exp(-self.r), self.a * math.exp(self.r)

    @property
    def center(self) -> GroupPoint:
        return GroupPoint(self.b1, self.b2, self.a)

    def log_box(self) -> Box:
        half = 0.5 * self.L
        u = math.log(self.a)
        return Box((self.b1 - half, self.b2 - half, u - self.r), (self.b1 + half, self.b2 + half, u + self.r))

    def contains(self, x1, x2, a, tol: float = 0.0) -> np.ndarray:
        half = 0.5 * self.L * (1.0 + tol)
        lo, hi = self.heights
        return ((np.abs(np.asarray(x1) - self.b1) <= half) & (np.abs(np.asarray(x2) - self.b2) <= half)
                & (np.asarray(a) >= lo * (1.0 - tol)) & (np.asarray(a) <= hi * (1.0 + tol)))

    def left_translate(self, g: GroupPoint) -> "CZSet":
        return CZSet(g.x1 + g.a * self.b1, g.x2 + g.a * self.b2, g.a * self.L, g.a * self.a, self.r)

    def to_dict(self) -> Dict:
        return {"b1": self.b1, "b2": self.b2, "L": self.L, "a": self.a, "r": self.r,
                "measure": self.measure, "admissible": self.is_admissible}


def is_cz_set(R: CZSet) -> bool:
    return R.is_admissible


def standard_set() -> CZSet:
    """The set [-e^2 log2 / 2, e^2 log2 / 2]^2 x [1/2, 2]; its side attains the lower bound"""
    r = math.log(2.0)
    return CZSet(0.0, 0.0, E2 * r, 1.0, r)


def distance_to_set(R: CZSet, x1, x2, a) -> np.ndarray:
    """Exact distance from points to the box R"""
    dx1 = np.maximum(np.abs(np.asarray(x1, dtype=float) - R.b1) - 0.5 * R.L, 0.0)
    dx2 = np.maximum(np.abs(np.asarray(x2, dtype=float) - R.b2) - 0.5 * R.L, 0.0)
    horizontal = dx1 * dx1 + dx2 * dx2
    a = np.asarray(a, dtype=float)
    lo, hi = R.heights
    b = np.clip(np.sqrt(a * a + horizontal), lo, hi)
    d = ((a - b) ** 2 + horizontal) / (2.0 * a * b)
    value = np.log1p(d + np.sqrt(d * (d + 2.0)))
    return float(value) if np.ndim(value) == 0 else value


def dilated_contains(R: CZSet, p: GroupPoint) -> np.ndarray:
    """Membership in R* = {d(., R) < r}"""
    return np.asarray(distance_to_set(R, p.x1, p.x2, p.a)) < R.r


def dilated_measure(R: CZSet) -> float:
    """rho(R*) by integrating the area of each horizontal section over log-heights"""
    lo, hi = R.heights
    cosh_r = math.cosh(R.r)

    def section(u: float) -> float:
        height = math.exp(u)
        b = min(max(height * cosh_r, lo), hi)
        reach = 2.0 * height * b * cosh_r - height * height - b * b
        if reach < 0.0:
            return 0.0
        D = math.sqrt(reach)
        return R.L * R.L + 4.0 * R.L * D + math.pi * D * D

    u0 = math.log(R.a)
    kinks = [u0 - R.r - math.log(cosh_r), u0 - R.r, u0 + R.r, u0 + R.r - math.log(cosh_r)]
    value, _ = sp_integrate.quad(section, u0 - 2.0 * R.r, u0 + 2.0 * R.r, points=sorted(kinks),
                                 epsabs=0.0, epsrel=1e-10, limit=400)
    return value


def dilation_constant(R: CZSet, n: int = 4000, seed: int = 0) -> Tuple[float, float]:
    """(rho(R*) / rho(R), sampled max d(p, center) / r over p in R*)"""
    rng = np.random.default_rng(seed)
    lo, hi = R.heights
    u = rng.uniform(math.log(lo) - R.r, math.log(hi) + R.r, n)
    height = np.exp(u)
    spread = 0.5 * R.L + hi * math.sinh(R.r)
    x1 = R.b1 + rng.uniform(-1.0, 1.0, n) * spread
    x2 = R.b2 + rng.uniform(-1.0, 1.0, n) * spread
    points = GroupPoint(x1, x2, height)
    inside = dilated_contains(R, points)
    if not np.any(inside):
        raise SearchFailureError("no samples landed in the dilated set")
    radii = np.asarray(distance(R.center, points[inside]))
    return dilated_measure(R) / R.measure, float(radii.max()) / R.r


@dataclass(frozen=True)
class TranslatedBox:
    """Right translate B g of the box B = [x1lo, x1hi] x [x2lo, x2hi] x [alo, ahi]"""

    lower: Tuple[float, float, float]
    upper: Tuple[float, float, float]
    shift: Tuple[float, float, float] = (0.0, 0.0, 1.0)

    @property
    def measure(self) -> float:
        return ((self.upper[0] - self.lower[0]) * (self.upper[1] - self.lower[1])
                * math.log(self.upper[2] / self.lower[2]))

    def contains(self, x1, x2, a) -> np.ndarray:
        g1, g2, ga = self.shift
        b = np.asarray(a, dtype=float) / ga
        y1 = np.asarray(x1, dtype=float) - b * g1
        y2 = np.asarray(x2, dtype=float) - b * g2
        return ((y1 > self.lower[0]) & (y1 < self.upper[0]) & (y2 > self.lower[1]) & (y2 < self.upper[1])
                & (b > self.lower[2]) & (b < self.upper[2]))

    def corners(self) -> GroupPoint:
        g1, g2, ga = self.shift
        y = np.array([(x, z, b) for x in (self.lower[0], self.upper[0])
                      for z in (self.lower[1], self.upper[1]) for b in (self.lower[2], self.upper[2])])
        return GroupPoint(y[:, 0] + y[:, 2] * g1, y[:, 1] + y[:, 2] * g2, y[:, 2] * ga)

    def center(self) -> GroupPoint:
        g1, g2, ga = self.shift
        b = math.sqrt(self.lower[2] * self.upper[2])
        return GroupPoint(0.5 * (self.lower[0] + self.upper[0]) + b * g1,
                          0.5 * (self.lower[1] + self.upper[1]) + b * g2, b * ga)

    def log_box(self) -> Box:
        return Box((self.lower[0], self.lower[1], math.log(self.lower[2])),
                   (self.upper[0], self.upper[1], math.log(self.upper[2])))

    def translated(self, g: GroupPoint) -> "TranslatedBox":
        """(B s) g = B (s g)"""
        s = GroupPoint(*self.shift)
        t = multiply(s, g)
        return TranslatedBox(self.lower, self.upper, (t.x1, t.x2, t.a))

    def to_dict(self) -> Dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "shift": list(self.shift)}


class Atom(ABC):
    """A function on G with a supporting CZ set"""

    support: CZSet

    @abstractmethod
    def evaluate(self, x1, x2, a) -> np.ndarray:
        ...

    @abstractmethod
    def integral(self) -> float:
        ...

    @abstractmethod
    def sup_norm(self) -> float:
        ...

    @abstractmethod
    def support_margin(self) -> float:
        """Smallest relative slack of the function's support inside the CZ set (negative if it leaks)"""


def _box_margin(R: CZSet, points: GroupPoint) -> float:
    half = 0.5 * R.L
    lo, hi = R.heights
    x1, x2, a = (np.asarray(v, dtype=float) for v in (points.x1, points.x2, points.a))
    slack = np.minimum.reduce([
        (half - np.abs(x1 - R.b1)) / R.L,
        (half - np.abs(x2 - R.b2)) / R.L,
        np.log(a / lo) / (2.0 * R.r),
        np.log(hi / a) / (2.0 * R.r),
    ])
    return float(slack.min())


@dataclass(frozen=True)
class IndicatorAtom(Atom):
    """sum_k c_k 1_{B_k g_k} for right-translated boxes B_k g_k"""

    support: CZSet
    pieces: Tuple[Tuple[float, TranslatedBox], ...]

    def evaluate(self, x1, x2, a) -> np.ndarray:
        total = np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2), np.asarray(a)).shape)
        for coeff, box in self.pieces:
            total = total + coeff * box.contains(x1, x2, a)
        return total

    def integral(self) -> float:
        return math.fsum(coeff * box.measure for coeff, box in self.pieces)

    def sup_norm(self, samples: int = 20000, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        box = self.support.log_box()
        u = rng.uniform(box.lower, box.upper, size=(samples, 3))
        centers = [box_.center() for _, box_ in self.pieces]
        x1 = np.concatenate([u[:, 0], [c.x1 for c in centers]])
        x2 = np.concatenate([u[:, 1], [c.x2 for c in centers]])
        a = np.concatenate([np.exp(u[:, 2]), [c.a for c in centers]])
        return float(np.max(np.abs(self.evaluate(x1, x2, a))))

    def support_margin(self) -> float:
        return min(_box_margin(self.support, box.corners()) for _, box in self.pieces)

    def scaled(self, factor: float) -> "IndicatorAtom":
        return IndicatorAtom(self.support, tuple((factor * c, box) for c, box in self.pieces))

    def to_dict(self) -> Dict:
        return {"support": self.support.to_dict(),
                "pieces": [{"coeff": c, "box": box.to_dict()} for c, box in self.pieces]}


@dataclass(frozen=True)
class SquareAtom2D:
    """A function b on R^2 supported in the square of side `side` centred at `center`"""

    center: Tuple[float, float]
    side: float
    profile: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sup: float
    mean: float

    def __call__(self, x1, x2) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        inside = (np.abs(x1 - self.center[0]) <= 0.5 * self.side) & (np.abs(x2 - self.center[1]) <= 0.5 * self.side)
        return np.where(inside, self.profile(x1, x2), 0.0)

    @property
    def is_atom(self) -> bool:
        bound = self.side ** -2
        return self.sup <= bound * (1.0 + 1e-12) and abs(self.mean) <= 1e-10 * max(1.0, self.sup * self.side ** 2)


@dataclass(frozen=True)
class LiftedAtom(Atom):
    """(1 / 2r) 1_{[e^-r, e^r]}(a) b(x1, x2)"""

    support: CZSet
    base: SquareAtom2D

    def evaluate(self, x1, x2, a) -> np.ndarray:
        lo, hi = self.support.heights
        a = np.asarray(a, dtype=float)
        return np.where((a >= lo) & (a <= hi), self.base(x1, x2), 0.0) / (2.0 * self.support.r)

    def integral(self) -> float:
        return self.base.mean

    def sup_norm(self) -> float:
        return self.base.sup / (2.0 * self.support.r)

    def support_margin(self) -> float:
        half = 0.5 * self.base.side
        c1, c2 = self.base.center
        lo, hi = self.support.heights
        corners = GroupPoint(np.array([c1 - half, c1 + half, c1 - half, c1 + half]),
                             np.array([c2 - half, c2 - half, c2 + half, c2 + half]),
                             np.array([lo, lo, hi, hi]))
        return _box_margin(self.support, corners)


@dataclass
class AtomEvidence:
    """Per-condition outcome of an atom check"""

    support_margin: float
    support_ok: bool
    sup_norm: float
    sup_bound: float
    sup_ok: bool
    integral: float
    integral_ok: bool
    admissible: bool
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def validate_atom(f: Atom, integral_tol: float = 1e-10) -> AtomEvidence:
    """Check support, sup bound and vanishing integral; failures are reported, never raised"""
    failures = []
    try:
        margin = f.support_margin()
    except Exception as e:
        logger.error(f"Support check failed: {e}")
        margin = -math.inf
    support_ok = margin >= -1e-12
    bound = 1.0 / f.support.measure
    sup = f.sup_norm()
    sup_ok = sup <= bound * (1.0 + 1e-12)
    integral = f.integral()
    integral_ok = abs(integral) <= integral_tol
    admissible = f.support.is_admissible
    if not support_ok:
        failures.append("support")
    if not sup_ok:
        failures.append("sup_norm")
    if not integral_ok:
        failures.append("mean_zero")
    if not admissible:
        failures.append("admissible")
    return AtomEvidence(margin, support_ok, sup, bound, sup_ok, integral, integral_ok, admissible, failures)


def difference_atom(support: CZSet, block: TranslatedBox, shift: GroupPoint) -> IndicatorAtom:
    """rho(R)^-1 (1_B - 1_{B exp}) for a block B and its right translate"""
    c = 1.0 / support.measure
    return IndicatorAtom(support, ((c, block), (-c, block.translated(shift))))


def halves_atom(support: CZSet, split: str) -> IndicatorAtom:
    """rho(R)^-1 (1_{R+} - 1_{R-}) for the halves of R cut across x1 ("x1") or across log a ("u")"""
    half = 0.5 * support.L
    lo_a, hi_a = support.heights
    lower = (support.b1 - half, support.b2 - half, lo_a)
    upper = (support.b1 + half, support.b2 + half, hi_a)
    if split == "x1":
        minus = TranslatedBox(lower, (support.b1, upper[1], hi_a))
        plus = TranslatedBox((support.b1, lower[1], lo_a), upper)
    elif split == "u":
        minus = TranslatedBox(lower, (upper[0], upper[1], support.a))
        plus = TranslatedBox((lower[0], lower[1], support.a), upper)
    else:
        raise InvalidParameterError(f"split must be x1 or u (got {split!r})")
    c = 1.0 / support.measure
    return IndicatorAtom(support, ((c, plus), (-c, minus)))


def _panel_rule(lo: float, hi: float, panels: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    return (mid + half * nodes).ravel(), (half * weights).ravel()


def riesz_image(i: int, f: IndicatorAtom, x1, x2, a, panels: int = 3, order: int = 4, chunk: int = 2048) -> np.ndarray:
    """R_i f(x) = int f(y) delta(y) k_i(y^-1 x) d rho(y) for an atom made of unshifted boxes, i = 1, 2

    The y_i-integral across a box is exact: delta(y) k_i(y^-1 x) = -a b^-2 d/dy_i U(y^-1 x), so it
    reduces to a b^-2 (U(y_lo^-1 x) - U(y_hi^-1 x)) on the two faces y_i = lo, hi. The faces
    are integrated over the other horizontal coordinate and log b by composite Gauss-Legendre.
    The result is only log-singular on the faces themselves.
    """
    if i not in (1, 2):
        raise InvalidParameterError(f"the face reduction covers R_1 and R_2 (got i={i})")
    x1, x2, a = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, a)))
    shape = x1.shape
    x1, x2, a = x1.ravel()[:, None], x2.ravel()[:, None], a.ravel()[:, None]
    total = np.zeros(x1.shape[0])
    other = 2 - i
    for coeff, box in f.pieces:
        if box.shift != (0.0, 0.0, 1.0):
            raise InvalidParameterError("the face reduction needs unshifted boxes")
        s, ws = _panel_rule(box.lower[other], box.upper[other], panels, order)
        u, wu = _panel_rule(math.log(box.lower[2]), math.log(box.upper[2]), panels, order)
        s = np.repeat(s, len(u))
        b = np.exp(np.tile(u, len(ws)))
        weights = np.outer(ws, wu).ravel()
        for face, sign in ((box.lower[i - 1], 1.0), (box.upper[i - 1], -1.0)):
            y1, y2 = (face, s) if i == 1 else (s, face)
            for start in range(0, len(total), chunk):
                rows = slice(start, start + chunk)
                p = GroupPoint((x1[rows] - y1) / b, (x2[rows] - y2) / b, a[rows] / b)
                values = np.asarray(kernel_U(p)) * a[rows] / (b * b)
                total[rows] += coeff * sign * (values @ weights)
    return total.reshape(shape)


# Regions used by the counterexamples. Each exposes the chart interface of the quadrature module.

@dataclass(frozen=True)
class WedgeRegion:
    """{x1 > slope a, |x2 / x1 - 1| < width, a > floor}"""

    width: float
    slope: float
    floor: float

    @property
    def t_min(self) -> float:
        return math.log(self.floor)

    def contains(self, x1, x2, a) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        positive = x1 > self.slope * np.asarray(a)
        ratio = np.asarray(x2) / np.where(positive, x1, 1.0)
        return positive & (np.abs(ratio - 1.0) < self.width) & (np.asarray(a) > self.floor)

    def chart(self, s1, s2, t):
        a = np.exp(t)
        x1 = self.slope * a / s1
        x2 = x1 * (1.0 - self.width + 2.0 * self.width * s2)
        jac = (self.slope * a / (s1 * s1)) * 2.0 * self.width * x1
        return x1, x2, a, jac


@dataclass(frozen=True)
class ColumnRegion:
    """{x1^2 + x2^2 < (ratio a)^2, a > floor}"""

    ratio: float
    floor: float

    @property
    def t_min(self) -> float:
        return math.log(self.floor)

    def contains(self, x1, x2, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        return (np.asarray(x1) ** 2 + np.asarray(x2) ** 2 < (self.ratio * a) ** 2) & (a > self.floor)

    def chart(self, s1, s2, t):
        a = np.exp(t)
        rho = self.ratio * a * s1
        theta = 2.0 * np.pi * s2
        jac = (self.ratio * a) ** 2 * s1 * 2.0 * np.pi
        return rho * np.cos(theta), rho * np.sin(theta), a, jac


@dataclass(frozen=True)
class ConeRegion:
    """{|x_i / a - q_i| < width, a > floor}"""

    q1: float
    q2: float
    width: float
    floor: float

    @property
    def t_min(self) -> float:
        return math.log(self.floor)

    def contains(self, x1, x2, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        return ((np.abs(np.asarray(x1) / a - self.q1) < self.width) & (np.abs(np.asarray(x2) / a - self.q2) < self.width)
                & (a > self.floor))

    def chart(self, s1, s2, t):
        a = np.exp(t)
        x1 = a * (self.q1 + self.width * (2.0 * s1 - 1.0))
        x2 = a * (self.q2 + self.width * (2.0 * s2 - 1.0))
        jac = (2.0 * self.width * a) ** 2
        return x1, x2, a, jac


def sample_region(region, rng: np.random.Generator, n: int, span: float = 8.0) -> GroupPoint:
    """Points of a region drawn through its chart, with log-heights within `span` of the floor"""
    s = rng.uniform(0.01, 0.99, size=(2, n))
    t = region.t_min + rng.uniform(1e-6, span, size=n)
    x1, x2, a, _ = region.chart(s[0], s[1], t)
    return GroupPoint(x1, x2, a)


@dataclass
class CounterexampleKit:
    """Atom, nested regions, weight and lower-bound kernel of one unboundedness construction"""

    kind: str
    atom: Optional[IndicatorAtom]
    regions: Dict[str, object]
    region_order: Tuple[str, ...]
    weight: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    kernel: Optional[Callable[[GroupPoint], np.ndarray]]
    shift_field: int
    shift: float
    block: Optional[TranslatedBox]
    params: Dict[str, object]
    family: Optional["HNFamily"] = None

    @property
    def outer(self):
        return self.regions[self.region_order[0]]

    @property
    def core(self):
        return self.regions[self.region_order[-1]]

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "params": {k: (v if isinstance(v, (int, float, str, list, type(None))) else str(v))
                       for k, v in sorted(self.params.items())},
            "atom": self.atom.to_dict() if self.atom else None,
            "regions": {name: {"type": type(region).__name__, **asdict(region)} for name, region in self.regions.items()},
            "shift": self.shift,
        }


@dataclass
class RegionMembership:
    flags: Dict[str, bool]
    weight: float


def region_weight(kit: CounterexampleKit, p: GroupPoint) -> RegionMembership:
    flags = {name: bool(np.all(kit.regions[name].contains(p.x1, p.x2, p.a))) for name in kit.region_order}
    return RegionMembership(flags, float(kit.weight(p.x1, p.x2, p.a)))


def _wedge_weight(x1, x2, a):
    w = np.asarray(x1) ** 2 / np.asarray(a)
    return 1.0 / (np.log(w) * w * w)


def _column_weight(x1, x2, a):
    a = np.asarray(a, dtype=float)
    return 1.0 / (a * a * np.log(a))


def _cone_weight(x1, x2, a):
    return 1.0 / np.asarray(a, dtype=float) ** 2


def _build_s1(A: float = 10.0, B: float = 10.0, eps: float = 0.5, shift: float = 0.25) -> CounterexampleKit:
    eps1, B1 = eps / 2.0, 2.0 * B
    eps2 = eps1 / 2.0
    B2 = max(2.0 * B1 + 1.0, (1.25 + eps1) / (eps1 - eps2)) + 1.0
    if eps1 + shift / B1 >= eps:
        raise InvalidParameterError("shift too large for the wedge apertures")
    regions = {
        "cone": WedgeRegion(eps, B, A),
        "inner_cone": WedgeRegion(eps1, B1, A),
        "core_cone": WedgeRegion(eps2, B2, 2.0 * A),
    }
    R = standard_set()
    block = TranslatedBox((-0.5, -0.25, 1.0), (0.5, 0.0, 2.0))
    atom = difference_atom(R, block, flow(2, shift))
    params = {"A": A, "B": B, "B1": B1, "B2": B2, "eps": eps, "eps1": eps1, "eps2": eps2,
              "sigma": shift, "core_slope": eps2 / B2 ** 2}
    return CounterexampleKit("S1", atom, regions, ("cone", "inner_cone", "core_cone"), _wedge_weight,
                             kernel_X2k1, 2, shift, block, params)


def _build_s0(A: float = 10.0) -> CounterexampleKit:
    shift = 0.5 * math.log(2.0)
    regions = {"column": ColumnRegion(0.5, A), "core_column": ColumnRegion(0.125, math.sqrt(2.0) * A)}
    R = standard_set()
    block = TranslatedBox((-1.0 / 16, -1.0 / 16, 1.0), (1.0 / 16, 1.0 / 16, math.sqrt(2.0)))
    atom = difference_atom(R, block, flow(0, shift))
    params = {"A": A, "sigma": shift, "core_slope": math.pi / 64}
    return CounterexampleKit("S0", atom, regions, ("column", "core_column"), _column_weight,
                             kernel_X0k0, 0, shift, block, params)


def cone_polynomial(i: int, j: int, K: int = 12) -> sympy.Expr:
    """Homogeneous degree-6 numerator P with X_2 k_ij ~ P(x1, x2, a) / |x|^8 on the cone"""
    x1, x2, a = sympy.symbols("x1 x2 a", positive=True)
    norm = x1 ** 2 + x2 ** 2 + a ** 2
    expansion = third_derivative_X2(i, j, K)
    P = sympy.Integer(0)
    for constant, (m0, m1, m2), p in expansion.principal_constants():
        P += constant * x1 ** m1 * x2 ** m2 * a ** (m0 + p) * norm ** (4 - p)
    P = sympy.expand(P)
    poly = sympy.Poly(P, x1, x2, a)
    if P == 0 or not poly.is_homogeneous or poly.total_degree() != 6:
        raise SearchFailureError(f"cone polynomial of X_2 k_{i}{j} is not homogeneous of degree 6: {P}")
    return P


def _cone_direction(P: sympy.Expr, q_max: float = 3.0, step: float = 0.05) -> Tuple[float, float, Callable]:
    x1, x2, a = sympy.symbols("x1 x2 a", positive=True)
    f = sympy.lambdify((x1, x2), P.subs(a, 1), "numpy")
    grid = np.arange(step, q_max + step / 2, step)
    Q1, Q2 = np.meshgrid(grid, grid, indexing="ij")
    normalised = np.abs(f(Q1, Q2)) / (1.0 + Q1 ** 2 + Q2 ** 2) ** 4
    if not np.any(normalised > 0):
        raise SearchFailureError("cone polynomial vanishes on the whole search grid")
    k = np.unravel_index(np.argmax(normalised), normalised.shape)
    return float(Q1[k]), float(Q2[k]), f


def _cone_aperture(f: Callable, q1: float, q2: float, cap: float = 0.25, points: int = 21) -> float:
    target = abs(float(f(q1, q2))) / 2.0
    offsets = np.linspace(-1.0, 1.0, points)
    O1, O2 = np.meshgrid(offsets, offsets)

    def good(eps: float) -> bool:
        return bool(np.min(np.abs(f(q1 + eps * O1, q2 + eps * O2))) > target)

    if good(cap):
        return cap
    lo, hi = 0.0, cap
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if good(mid) else (lo, mid)
    if lo == 0.0:
        raise SearchFailureError("no cone aperture keeps |P| above half its peak")
    return lo


def _build_sij(i: int, j: int, A: float = 20.0, K: int = 12) -> CounterexampleKit:
    P = cone_polynomial(j, i, K)
    q1, q2, f = _cone_direction(P)
    eps = _cone_aperture(f, q1, q2)
    delta = eps / 16.0
    beta = 1.0 + eps / (16.0 * (max(q1, q2) + 1.0))
    shift = eps / 4.0
    regions = {
        "cone": ConeRegion(q1, q2, eps, A),
        "inner_cone": ConeRegion(q1, q2, eps / 2.0, A),
        "core_cone": ConeRegion(q1, q2, eps / 4.0, 2.0 * A),
    }
    R = standard_set()
    block = TranslatedBox((0.0, -delta, 1.0), (delta, 0.0, beta))
    atom = difference_atom(R, block, flow(2, shift))

    def kernel(p: GroupPoint) -> np.ndarray:
        return np.abs(np.asarray(kernel_kij_X2(j, i, p, K)))

    params = {"i": i, "j": j, "A": A, "q1": q1, "q2": q2, "eps": eps, "delta": delta, "beta": beta,
              "tau": shift, "P": str(P), "core_slope": eps * eps / 4.0}
    return CounterexampleKit(f"S{i}{j}", atom, regions, ("cone", "inner_cone", "core_cone"), _cone_weight,
                             kernel, 2, shift, block, params)


def kernel_kij_X2(i: int, j: int, p: GroupPoint, K: int = 12) -> np.ndarray:
    """X_2 k_ij from its series expansion (points with r > 1)"""
    return evaluate_terms(third_derivative_X2(i, j, K).terms, p)


def build_kit(kind: str, **params) -> CounterexampleKit:
    """Construct the S1, S0, Sij or Rij counterexample with optional parameter overrides"""
    kind = kind.lower()
    if kind == "s1":
        return _build_s1(**params)
    if kind == "s0":
        return _build_s0(**params)
    if kind == "sij":
        i, j = params.pop("i", 0), params.pop("j", 0)
        return _build_sij(i, j, **params)
    if kind == "rij":
        i, j = params.pop("i", 0), params.pop("j", 0)
        psi = psi_ij(i, j)
        bump = choose_bump(psi)
        family = build_hN(params.pop("N", 2), params.pop("L", None), params.pop("p", 4), params.pop("q", 2),
                          params.pop("signs", 0), bump)
        return CounterexampleKit(f"R{i}{j}", None, {}, (), lambda x1, x2, a: np.zeros_like(a), None, 2, 0.0,
                                 None, {"i": i, "j": j, "bump": bump.name, **family.params()}, family)
    raise InvalidParameterError(f"unknown counterexample kind {kind!r}")


def check_nesting(kit: CounterexampleKit, n: int = 10000, seed: int = 0) -> int:
    """Number of sampled points of an inner region falling outside the next outer region"""
    rng = np.random.default_rng(seed)
    violations = 0
    for outer_name, inner_name in zip(kit.region_order, kit.region_order[1:]):
        points = sample_region(kit.regions[inner_name], rng, n)
        violations += int(np.sum(~kit.regions[outer_name].contains(points.x1, points.x2, points.a)))
    return violations


def _block_samples(block: TranslatedBox, rng: np.random.Generator, n: int) -> GroupPoint:
    y1 = rng.uniform(block.lower[0], block.upper[0], n)
    y2 = rng.uniform(block.lower[1], block.upper[1], n)
    b = np.exp(rng.uniform(math.log(block.lower[2]), math.log(block.upper[2]), n))
    g1, g2, ga = block.shift
    return GroupPoint(y1 + b * g1, y2 + b * g2, b * ga)


def check_inclusion(kit: CounterexampleKit, n: int = 10000, seed: int = 0) -> int:
    """Violations of core * block^-1 * block inside the middle region"""
    rng = np.random.default_rng(seed)
    middle = kit.regions[kit.region_order[-2]]
    x = sample_region(kit.core, rng, n)
    y = _block_samples(kit.block, rng, n)
    z = _block_samples(kit.block, rng, n)
    moved = multiply(multiply(x, inverse(y)), z)
    return int(np.sum(~middle.contains(moved.x1, moved.x2, moved.a)))


def check_translation(kit: CounterexampleKit, n: int = 10000, seed: int = 0) -> Tuple[int, float]:
    """Violations of middle * exp(s X) inside the outer region for s in [0, shift], and min weight ratio"""
    rng = np.random.default_rng(seed)
    middle = kit.regions[kit.region_order[-2]]
    p = sample_region(middle, rng, n)
    moved = multiply(p, flow(kit.shift_field, rng.uniform(0.0, kit.shift, n)))
    violations = int(np.sum(~kit.outer.contains(moved.x1, moved.x2, moved.a)))
    ratio = np.asarray(kit.weight(moved.x1, moved.x2, moved.a)) / np.asarray(kit.weight(p.x1, p.x2, p.a))
    return violations, float(ratio.min())


def pointwise_lower_bound(kit: CounterexampleKit, n: int = 10000, seed: int = 0) -> Tuple[float, int]:
    """(min kernel / weight over samples of the outer region, number of nonpositive kernel values)"""
    rng = np.random.default_rng(seed)
    p = sample_region(kit.outer, rng, n)
    values = np.asarray(kit.kernel(p))
    ratio = values / np.asarray(kit.weight(p.x1, p.x2, p.a))
    return float(ratio.min()), int(np.sum(values <= 0.0))


def _image_kernel(kit: CounterexampleKit) -> Callable[[GroupPoint], np.ndarray]:
    if kit.kind == "S1":
        return lambda w: kernel_k(1, w)
    if kit.kind == "S0":
        return lambda w: kernel_k(0, w)
    i, j = kit.params["i"], kit.params["j"]
    return lambda w: kernel_kij(j, i, w)


def mean_value_defect(kit: CounterexampleKit, points: GroupPoint, tol: float = 1e-10, t_nodes: int = 8) -> float:
    """Largest relative gap between S a(x) as a kernel integral and the shifted-segment form"""
    kernel = _image_kernel(kit)
    shift = flow(kit.shift_field, kit.shift)
    box = kit.block.log_box()
    scale = 1.0 / kit.atom.support.measure
    nodes, weights = np.polynomial.legendre.leggauss(t_nodes)
    nodes = 0.5 * kit.shift * (nodes + 1.0)
    weights = 0.5 * kit.shift * weights
    worst = 0.0
    count = int(np.prod(points.shape))
    for idx in range(count):
        x = points[idx] if points.shape else points
        x_inv = inverse(x)

        def difference(y1, y2, u):
            w = multiply(x_inv, GroupPoint(y1, y2, np.exp(u)))
            return kernel(multiply(w, shift)) - kernel(w)

        def segment(y1, y2, u):
            w = multiply(x_inv, GroupPoint(y1, y2, np.exp(u)))
            total = np.zeros_like(np.asarray(u, dtype=float))
            for node, weight in zip(nodes, weights):
                step = flow(kit.shift_field, node)
                total = total + weight * _field_kernel(kit, multiply(w, step))
            return total

        direct = scale * float(modular(x)) * integrate(difference, box, tol=0.0, rel_tol=tol).value
        mean_form = scale * float(modular(x)) * integrate(segment, box, tol=0.0, rel_tol=tol).value
        worst = max(worst, abs(direct - mean_form) / max(abs(direct), 1e-300))
    return worst


def _field_kernel(kit: CounterexampleKit, w: GroupPoint) -> np.ndarray:
    if kit.kind == "S1":
        return kernel_X2k1(w)
    if kit.kind == "S0":
        return kernel_X0k0(w)
    i, j = kit.params["i"], kit.params["j"]
    return kernel_kij_X2(j, i, w)


def probe_points(kit: CounterexampleKit, n: int = 20, seed: int = 0) -> GroupPoint:
    """Points block * core^-1 where the operator image of the atom is bounded below"""
    rng = np.random.default_rng(seed)
    g = sample_region(kit.core, rng, n, span=3.0)
    e = _block_samples(kit.block, rng, n)
    return multiply(e, inverse(g))


def image_norm_scan(kit: CounterexampleKit, T_list: Sequence[float], inner_order: int = 3,
                    rel_tol: float = 1e-3, max_panels: Optional[int] = None) -> ScanReport:
    """Truncated lower bound for the L^1 norm of S a: int over core of |int_block [k(g e0^-1 v s) - k(g e0^-1 v)] dv|"""
    kernel = _image_kernel(kit)
    shift = flow(kit.shift_field, kit.shift)
    scale = 1.0 / kit.atom.support.measure
    box = kit.block.log_box()
    x, w = np.polynomial.legendre.leggauss(inner_order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    lo, hi = np.asarray(box.lower), np.asarray(box.upper)
    grid = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    nodes = lo + (hi - lo) * grid
    weights = np.prod(np.stack(np.meshgrid(w, w, w, indexing="ij"), axis=-1).reshape(-1, 3), axis=1) * np.prod(hi - lo)
    v = GroupPoint(nodes[:, 0], nodes[:, 1], np.exp(nodes[:, 2]))
    g1, g2, ga = kit.block.shift
    v = multiply(v, GroupPoint(g1, g2, ga))
    e0_inv = inverse(kit.block.center())

    def weight(x1, x2, a):
        g = multiply(GroupPoint(x1, x2, a), e0_inv)
        G1, V1 = np.meshgrid(np.asarray(g.x1), v.x1, indexing="ij")
        G2, V2 = np.meshgrid(np.asarray(g.x2), v.x2, indexing="ij")
        GA, VA = np.meshgrid(np.asarray(g.a), v.a, indexing="ij")
        gv = GroupPoint(G1 + GA * V1, G2 + GA * V2, GA * VA)
        values = np.asarray(kernel(multiply(gv, shift))) - np.asarray(kernel(gv))
        return scale * np.abs(values @ weights)

    return scan_tail(weight, kit.core, T_list, tol=0.0, rel_tol=rel_tol, max_panels=max_panels)


# The h_N family on R^2 and its lift to G.

def _base_bump(x1, x2):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    inside = (np.abs(x1) < 1.0) & (np.abs(x2) < 1.0)
    s1 = np.where(inside, 1.0 - x1 * x1, 1.0)
    s2 = np.where(inside, 1.0 - x2 * x2, 1.0)
    return np.where(inside, np.exp(-1.0 / s1 - 1.0 / s2), 0.0)


@dataclass(frozen=True)
class Bump:
    name: str
    profile: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sup: float
    l2: float
    mean: float
    psi_center: float

    def __call__(self, x1, x2) -> np.ndarray:
        return self.profile(x1, x2)


def _unit_grid(n: int) -> Tuple[np.ndarray, np.ndarray, float]:
    xs = np.linspace(-1.0, 1.0, n)
    X, Y = np.meshgrid(xs, xs)
    return X, Y, (xs[1] - xs[0]) ** 2


def bump_candidates(n: int = 201) -> List[Tuple[str, Callable]]:
    X, Y, cell = _unit_grid(n)
    base = _base_bump(X, Y)
    c = float(np.sum((X * X + Y * Y) * base) / np.sum(base))
    return [
        ("odd_x1", lambda x1, x2: np.asarray(x1) * _base_bump(x1, x2)),
        ("odd_x2", lambda x1, x2: np.asarray(x2) * _base_bump(x1, x2)),
        ("odd_x1x2", lambda x1, x2: np.asarray(x1) * np.asarray(x2) * _base_bump(x1, x2)),
        ("saddle", lambda x1, x2: (np.asarray(x1) ** 2 - np.asarray(x2) ** 2) * _base_bump(x1, x2)),
        ("radial", lambda x1, x2: (np.asarray(x1) ** 2 + np.asarray(x2) ** 2 - c) * _base_bump(x1, x2)),
    ]


def choose_bump(psi: PsiProfile, n: int = 201, threshold: float = 1e-6) -> Bump:
    """First mean-zero bump phi on [-1,1]^2 with (psi * phi)(0, 0) clearly nonzero"""
    X, Y, cell = _unit_grid(n)
    for name, profile in bump_candidates(n):
        values = profile(X, Y)
        mass = float(np.sum(np.abs(values)) * cell)
        mean = float(np.sum(values) * cell)
        if abs(mean) > 1e-10 * mass:
            logger.debug(f"Bump {name} rejected: mean {mean:.2e}")
            continue
        center = float(np.sum(psi(-X, -Y) * values) * cell)
        peak = float(np.max(np.abs(psi(X, Y))))
        if abs(center) > threshold * peak * mass:
            logger.info(f"Using bump {name} with (psi * phi)(0,0) = {center:.6e}")
            return Bump(name, profile, float(np.max(np.abs(values))), math.sqrt(float(np.sum(values ** 2) * cell)),
                        mean, center)
        logger.debug(f"Bump {name} rejected: (psi * phi)(0,0) = {center:.2e}")
    raise SearchFailureError(f"no candidate bump pairs nontrivially with psi_{psi.i}{psi.j}")


@lru_cache(maxsize=8)
def sign_table(seed: int, n: int, kmax: int) -> np.ndarray:
    """+-1 signs of level n, indexed by (k1 + kmax, k2 + kmax), drawn from a generator keyed by (seed, n)"""
    rng = np.random.default_rng([seed % 2 ** 63, n])
    signs = 2 * rng.integers(0, 2, size=(2 * kmax + 1, 2 * kmax + 1), dtype=np.int8) - 1
    signs.setflags(write=False)
    return signs


@dataclass(frozen=True)
class HNFamily:
    """h_N = sum_{n <= N} sum_k +- phi(2^(qn) x - p k), |k_i| < (2^(qn) L - 1) / p"""

    N: int
    L: float
    p: int
    q: int
    seed: int
    bump: Bump

    def scale(self, n: int) -> float:
        return 2.0 ** (-self.q * n)

    def kmax(self, n: int) -> int:
        bound = (2.0 ** (self.q * n) * self.L - 1.0) / self.p
        return int(math.ceil(bound)) - 1

    def term_count(self) -> int:
        return sum((2 * self.kmax(n) + 1) ** 2 for n in range(self.N + 1))

    def params(self) -> Dict[str, float]:
        return {"N": self.N, "L": self.L, "p": self.p, "q": self.q, "seed": self.seed, "terms": self.term_count()}

    def evaluate(self, x1, x2, levels: Optional[int] = None) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        total = np.zeros(np.broadcast(x1, x2).shape)
        top = self.N if levels is None else min(levels, self.N)
        for n in range(top + 1):
            dilation = 2.0 ** (self.q * n)
            k1 = np.rint(dilation * x1 / self.p)
            k2 = np.rint(dilation * x2 / self.p)
            kmax = self.kmax(n)
            valid = (np.abs(k1) <= kmax) & (np.abs(k2) <= kmax)
            values = self.bump(dilation * x1 - self.p * k1, dilation * x2 - self.p * k2)
            table = sign_table(self.seed, n, kmax)
            i1 = np.clip(k1, -kmax, kmax).astype(np.int64) + kmax
            i2 = np.clip(k2, -kmax, kmax).astype(np.int64) + kmax
            signs = table[i1, i2]
            total = total + np.where(valid, signs * values, 0.0)
        return total

    def grid(self, dx: Optional[float] = None, window: Optional[Tuple[float, float, float, float]] = None,
             max_points: int = 16_000_000) -> GridFunction:
        finest = self.scale(self.N)
        dx = finest / 8.0 if dx is None else dx
        if dx > finest / 4.0:
            raise GridTooCoarseError(f"grid step {dx:.3e} does not resolve the finest scale {finest:.3e}")
        x_lo, x_hi, y_lo, y_hi = window if window else (-self.L, self.L, -self.L, self.L)
        count = ((x_hi - x_lo) / dx + 1) * ((y_hi - y_lo) / dx + 1)
        if count > max_points:
            raise InvalidParameterError(f"grid of {count:.3e} points exceeds the limit {max_points}")
        return GridFunction.sample(self.evaluate, (x_lo, y_lo), (x_hi, y_hi), dx)

    def support_radius(self) -> float:
        return max((self.p * self.kmax(n) + 1.0) * self.scale(n) for n in range(self.N + 1))

    def expected_norm_sq(self) -> float:
        """E ||h_N||_2^2 over independent signs"""
        return sum((2 * self.kmax(n) + 1) ** 2 * self.scale(n) ** 2 for n in range(self.N + 1)) * self.bump.l2 ** 2

    def atom_terms(self, limit: Optional[int] = None) -> Iterator[Tuple[float, SquareAtom2D]]:
        """lambda_j b_j with b_j an L^inf atom of R^2 on a square of side 2 * 2^(-qn)"""
        produced = 0
        for n in range(self.N + 1):
            s = self.scale(n)
            side = 2.0 * s
            lam = self.bump.sup * side ** 2
            kmax = self.kmax(n)
            table = sign_table(self.seed, n, kmax)
            for k1 in range(-kmax, kmax + 1):
                for k2 in range(-kmax, kmax + 1):
                    if limit is not None and produced >= limit:
                        return
                    sign = float(table[k1 + kmax, k2 + kmax])
                    c1, c2 = self.p * k1 * s, self.p * k2 * s

                    def profile(x1, x2, c1=c1, c2=c2, s=s, sign=sign):
                        return sign * self.bump((np.asarray(x1) - c1) / s, (np.asarray(x2) - c2) / s) / lam

                    yield lam, SquareAtom2D((c1, c2), side, profile, self.bump.sup / lam, self.bump.mean * s * s / lam)
                    produced += 1


def build_hN(N: int, L: Optional[float], p: int, q: int, signs: int, bump: Bump) -> HNFamily:
    """The h_N family; L defaults to 1.05 e^N so that N < log L"""
    if N < 0 or p < 2 or q < 1:
        raise InvalidParameterError(f"h_N needs N >= 0, p >= 2, q >= 1 (got N={N}, p={p}, q={q})")
    L = 1.05 * math.exp(N) if L is None else float(L)
    if not (L > 1.0 and N < math.log(L)):
        raise InvalidParameterError(f"h_N needs L > 1 and N < log L (got N={N}, L={L})")
    if abs(bump.psi_center) == 0.0:
        raise InvalidParameterError("bump pairs trivially with psi at the origin")
    return HNFamily(N, L, p, q, int(signs), bump)


def lift_radius(side: float) -> float:
    """log-half-height making the square of this side the base of an admissible CZ set at a = 1"""
    return 0.5 * math.log(side) if side >= E2 else side / E2


@dataclass
class LiftedFunction:
    """f = sum_j lambda_j a_j on G with int_0^inf f(x, a) da / a = sum_j lambda_j b_j(x)"""

    terms: List[Tuple[float, LiftedAtom]]
    norm_bound: float

    def evaluate(self, x1, x2, a) -> np.ndarray:
        total = np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2), np.asarray(a)).shape)
        for lam, atom in self.terms:
            total = total + lam * atom.evaluate(x1, x2, a)
        return total

    def vertical_integral(self, x1: float, x2: float) -> float:
        """int f(x1, x2, e^u) du by adaptive quadrature with the atoms' height breakpoints"""
        breaks = sorted({s * atom.support.r for _, atom in self.terms for s in (-1.0, 1.0)})
        edges = [breaks[0] - 1.0] + breaks + [breaks[-1] + 1.0]
        total = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            value, _ = sp_integrate.quad(lambda u: float(self.evaluate(x1, x2, math.exp(u))), lo, hi,
                                         epsabs=1e-13, epsrel=1e-12)
            total.append(value)
        return math.fsum(total)


def lift_to_H1(h: Sequence[Tuple[float, SquareAtom2D]]) -> LiftedFunction:
    """Lift a planar atomic decomposition to G, one CZ atom per planar atom"""
    terms = []
    for lam, b in h:
        if not b.is_atom:
            raise InvalidParameterError(f"planar term centred at {b.center} is not an atom")
        r = lift_radius(b.side)
        support = CZSet(b.center[0], b.center[1], b.side, 1.0, r)
        terms.append((lam, LiftedAtom(support, b)))
    return LiftedFunction(terms, math.fsum(abs(lam) for lam, _ in h))


@dataclass
class LevelSetEstimate:
    """Band n of the estimate measures psi_a * h_N with h_N truncated to levels <= n"""

    measure: float
    stderr: float
    per_level: List[float]
    truncation: str = "band n samples h_N restricted to levels <= n"


def level_set_measure(family: HNFamily, psi: PsiProfile, t: float, patches: int = 16, heights: int = 4,
                      seed: int = 0, tail_tol: float = 1e-3) -> LevelSetEstimate:
    """Lower estimate of rho{(x, a): |psi_a * h_N(x)| > t} over the bands a in [s_n / 2, 2 s_n]

    Each band is estimated from random square patches of four periods of level n; levels finer than
    n are left out of h_N there, since psi_a averages them out. The pieces of h_N are mean-zero, so
    the patch margin is set by the tail of |grad psi| rather than of |psi|.
    """
    rng = np.random.default_rng(seed)
    du = 2.0 * math.log(2.0) / heights
    reach = kernel_radius(kernel_gradient(psi), tail_tol)
    per_level, variances = [], []
    for n in range(family.N + 1):
        s = family.scale(n)
        dx = s / 8.0
        cells = 32 * family.p
        width = cells * dx
        a_values = s * 2.0 ** (2.0 * (np.arange(heights) + 0.5) / heights - 1.0)
        margin = int(math.ceil(a_values.max() * reach / dx))
        span = max(family.L - 0.5 * width, 0.0)
        area = max(2.0 * family.L, width) ** 2
        fractions = np.zeros((patches, heights))
        for k in range(patches):
            c1, c2 = rng.uniform(-span, span, size=2)
            lower = (c1 - 0.5 * width - margin * dx, c2 - 0.5 * width - margin * dx)
            upper = (lower[0] + (cells + 2 * margin) * dx, lower[1] + (cells + 2 * margin) * dx)
            g = GridFunction.sample(lambda x1, x2: family.evaluate(x1, x2, levels=n), lower, upper, dx)
            for jdx, a in enumerate(a_values):
                conv = convolve2d(psi, g, float(a), tail_tol=tail_tol).values
                interior = conv[margin:margin + cells, margin:margin + cells]
                fractions[k, jdx] = float(np.mean(np.abs(interior) > t))
        band = fractions.sum(axis=1) * du * area
        per_level.append(float(band.mean()))
        variances.append(float(band.var(ddof=1) / patches) if patches > 1 else 0.0)
        logger.debug(f"Level {n}: level-set measure {per_level[-1]:.4e}")
    return LevelSetEstimate(math.fsum(per_level), math.sqrt(math.fsum(variances)), per_level)


def norm_estimate(family: HNFamily, patches: int = 64, seed: int = 0) -> float:
    """||h_N||_2 from the density of |h_N|^2 on random patches at the finest resolution"""
    rng = np.random.default_rng(seed)
    s = family.scale(family.N)
    dx = s / 8.0
    cells = 32 * family.p
    width = cells * dx
    span = max(family.L - 0.5 * width, 0.0)
    densities = []
    for _ in range(patches):
        c1, c2 = rng.uniform(-span, span, size=2)
        g = GridFunction.sample(family.evaluate, (c1 - 0.5 * width, c2 - 0.5 * width),
                                (c1 + 0.5 * width - dx, c2 + 0.5 * width - dx), dx)
        densities.append(float(np.mean(g.values ** 2)))
    return math.sqrt(float(np.mean(densities)) * max(2.0 * family.L, width) ** 2)
