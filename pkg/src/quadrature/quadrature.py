"""
Deterministic adaptive quadrature on G in (x1, x2, u = log a) coordinates

Integrals are computed by tensor Gauss-Legendre panels with a 7-point estimate and
a 5-point error indicator. The worst panels are split into eight children until the
summed error meets the target. Panel values are reduced with math.fsum, so the result
depends only on the integrand, the domain and the tolerance, not on worker count.
"""

import csv
import heapq
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.signal import fftconvolve

from src.utils.config import Config
from src.utils.errors import GridTooCoarseError, InvalidParameterError, QuadratureError

logger = logging.getLogger(__name__)

Integrand = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

BATCH = 64


def _unit_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _tensor_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = _unit_rule(n)
    g1, g2, g3 = np.meshgrid(x, x, x, indexing="ij")
    w1, w2, w3 = np.meshgrid(w, w, w, indexing="ij")
    nodes = np.stack([g1.ravel(), g2.ravel(), g3.ravel()], axis=1)
    return nodes, (w1 * w2 * w3).ravel()


_HIGH_NODES, _HIGH_WEIGHTS = _tensor_rule(7)
_LOW_NODES, _LOW_WEIGHTS = _tensor_rule(5)
_ALL_NODES = np.concatenate([_HIGH_NODES, _LOW_NODES])
_N_HIGH = len(_HIGH_WEIGHTS)

# children of a panel in a fixed space-filling (binary-reflected) order
_CHILD_OFFSETS = np.array(
    [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1), (1, 0, 0)],
    dtype=float,
)


class QuadResult(NamedTuple):
    value: float
    error: float
    panels: int


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in (x1, x2, u); x-bounds may be infinite, u-bounds must be truncated"""

    lower: Tuple[float, float, float]
    upper: Tuple[float, float, float]

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != 3 or len(upper) != 3:
            raise InvalidParameterError("a box needs three lower and three upper bounds")
        if any(not lo < hi for lo, hi in zip(lower, upper)):
            raise InvalidParameterError(f"box bounds must satisfy lower < upper (got {lower}, {upper})")
        if not (math.isfinite(lower[2]) and math.isfinite(upper[2])):
            raise InvalidParameterError("u-extent must be truncated explicitly, use Box.truncated")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def truncated(cls, lower, upper, u_max: float) -> "Box":
        """Box whose upper u-bound is replaced by min(upper u, u_max)"""
        upper = (upper[0], upper[1], min(float(upper[2]), u_max))
        return cls(tuple(lower), upper)

    @property
    def measure(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))


def _artanh_jacobian(t):
    return 1.0 / (1.0 - t * t)


def _axis_map(lo: float, hi: float):
    """Map a possibly unbounded interval onto a finite parameter interval by x = artanh(t)"""
    if math.isfinite(lo) and math.isfinite(hi):
        return lo, hi, (lambda t: t), (lambda t: np.ones_like(t))
    if not math.isfinite(lo) and not math.isfinite(hi):
        return -1.0, 1.0, np.arctanh, _artanh_jacobian
    if math.isfinite(lo):
        return 0.0, 1.0, (lambda t: lo + np.arctanh(t)), _artanh_jacobian
    return 0.0, 1.0, (lambda t: hi - np.arctanh(t)), _artanh_jacobian


class _PanelEngine:
    """Heap-driven adaptive cubature of a vectorised integrand over a finite box"""

    def __init__(self, fun: Integrand, workers: int):
        self.fun = fun
        self.workers = workers
        self._executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)

    def _evaluate_chunk(self, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        width = hi - lo
        points = lo[:, None, :] + width[:, None, :] * _ALL_NODES[None, :, :]
        flat = points.reshape(-1, 3)
        values = np.asarray(self.fun(flat[:, 0], flat[:, 1], flat[:, 2]), dtype=float)
        values = np.broadcast_to(values, (flat.shape[0],)).reshape(len(lo), -1)
        if not np.all(np.isfinite(values)):
            raise QuadratureError("integrand returned a non-finite value inside a panel")
        volume = np.prod(width, axis=1)
        high = volume * (values[:, :_N_HIGH] @ _HIGH_WEIGHTS)
        low = volume * (values[:, _N_HIGH:] @ _LOW_WEIGHTS)
        return high, np.abs(high - low)

    def evaluate(self, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if self._executor is None or len(lo) < 2 * self.workers:
            return self._evaluate_chunk(lo, hi)
        bounds = np.linspace(0, len(lo), self.workers + 1).astype(int)
        chunks = [(lo[s:e], hi[s:e]) for s, e in zip(bounds[:-1], bounds[1:]) if e > s]
        results = list(self._executor.map(lambda c: self._evaluate_chunk(*c), chunks))
        return np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results])

    def run(self, lower, upper, tol: float, rel_tol: float, max_panels: int, strict: bool) -> QuadResult:
        lo0 = np.asarray(lower, dtype=float)[None, :]
        hi0 = np.asarray(upper, dtype=float)[None, :]
        values, errors = self.evaluate(lo0, hi0)
        heap = [(-errors[0], 0, lo0[0], hi0[0], values[0], errors[0])]
        counter = 1
        total_value = float(values[0])
        total_error = float(errors[0])

        def target() -> float:
            return max(tol, rel_tol * abs(total_value))

        while total_error > target():
            if counter + 8 * min(BATCH, len(heap)) > max_panels:
                value = math.fsum(item[4] for item in heap)
                error = math.fsum(item[5] for item in heap)
                if error <= max(tol, rel_tol * abs(value)):
                    return QuadResult(value, error, counter)
                message = f"panel budget {max_panels} exhausted: value {value:.6e} +- {error:.2e}"
                if strict:
                    raise QuadratureError(message, value=value, error=error)
                logger.warning(message)
                return QuadResult(value, error, counter)

            worst = [heapq.heappop(heap) for _ in range(min(BATCH, len(heap)))]
            parents_lo = np.array([item[2] for item in worst])
            parents_hi = np.array([item[3] for item in worst])
            half = 0.5 * (parents_hi - parents_lo)
            child_lo = (parents_lo[:, None, :] + half[:, None, :] * _CHILD_OFFSETS[None, :, :]).reshape(-1, 3)
            child_hi = child_lo + np.repeat(half, 8, axis=0)
            child_values, child_errors = self.evaluate(child_lo, child_hi)

            for item in worst:
                total_value -= item[4]
                total_error -= item[5]
            for k in range(len(child_lo)):
                heapq.heappush(heap, (-child_errors[k], counter, child_lo[k], child_hi[k], child_values[k], child_errors[k]))
                counter += 1
                total_value += child_values[k]
                total_error += child_errors[k]

            if total_error <= target():
                # confirm with exact sums before stopping
                total_value = math.fsum(item[4] for item in heap)
                total_error = math.fsum(item[5] for item in heap)

        value = math.fsum(item[4] for item in heap)
        error = math.fsum(item[5] for item in heap)
        return QuadResult(value, error, counter)


def _settings(max_panels: Optional[int], workers: Optional[int]) -> Tuple[int, int]:
    config = Config()
    return (max_panels if max_panels is not None else config.max_panels), config.worker_count(workers)


def integrate_cube(
    fun: Integrand,
    lower: Sequence[float],
    upper: Sequence[float],
    tol: float = 1e-8,
    rel_tol: float = 0.0,
    max_panels: Optional[int] = None,
    workers: Optional[int] = None,
    strict: bool = True,
) -> QuadResult:
    """Adaptive integral of fun(s1, s2, s3) over a finite box of parameters"""
    if not tol > 0 and not rel_tol > 0:
        raise InvalidParameterError("a positive absolute or relative tolerance is required")
    budget, worker_count = _settings(max_panels, workers)
    engine = _PanelEngine(fun, worker_count)
    try:
        result = engine.run(lower, upper, tol, rel_tol, budget, strict)
    finally:
        engine.close()
    logger.debug(f"Cubature finished: value={result.value:.10e} error={result.error:.2e} panels={result.panels}")
    return result


def integrate(
    f: Integrand,
    box: Box,
    tol: float = 1e-8,
    rel_tol: float = 0.0,
    max_panels: Optional[int] = None,
    workers: Optional[int] = None,
    strict: bool = True,
) -> QuadResult:
    """Integral of f(x1, x2, u) d x1 d x2 du over a box, i.e. a rho-integral in LogCoords"""
    maps = [_axis_map(lo, hi) for lo, hi in zip(box.lower, box.upper)]

    def mapped(t1, t2, t3):
        (_, _, m1, j1), (_, _, m2, j2), (_, _, m3, j3) = maps
        return f(m1(t1), m2(t2), m3(t3)) * j1(t1) * j2(t2) * j3(t3)

    lower = [m[0] for m in maps]
    upper = [m[1] for m in maps]
    return integrate_cube(mapped, lower, upper, tol, rel_tol, max_panels, workers, strict)


class Region(Protocol):
    """A region of G swept by an exhaustion parameter t, with a chart from [0,1]^2 x [t0, t1]"""

    t_min: float

    def chart(self, s1: np.ndarray, s2: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Return (x1, x2, a, jacobian) with jacobian the rho-density in (s1, s2, t)"""
        ...

    def contains(self, x1, x2, a) -> np.ndarray:
        ...


def integrate_region(
    weight: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    region: Region,
    t_lo: float,
    t_hi: float,
    tol: float = 1e-8,
    rel_tol: float = 0.0,
    max_panels: Optional[int] = None,
    workers: Optional[int] = None,
    strict: bool = True,
) -> QuadResult:
    """rho-integral of weight(x1, x2, a) over the slab t_lo < t < t_hi of a region"""
    if not t_lo < t_hi:
        raise InvalidParameterError(f"slab needs t_lo < t_hi (got {t_lo}, {t_hi})")

    def pulled_back(s1, s2, t):
        x1, x2, a, jac = region.chart(s1, s2, t)
        return weight(x1, x2, a) * jac

    return integrate_cube(pulled_back, (0.0, 0.0, t_lo), (1.0, 1.0, t_hi), tol, rel_tol, max_panels, workers, strict)


@dataclass(frozen=True)
class ShellRegion:
    """Geodesic shells around e in the chart (theta, u, r) with density a sinh r

    side selects the part of the shell with a > 1 ("plus"), a < 1 ("minus") or all of it.
    The exhaustion parameter is t = r.
    """

    side: str = "both"
    t_min: float = 0.0

    def __post_init__(self):
        if self.side not in ("plus", "minus", "both"):
            raise InvalidParameterError(f"shell side must be plus, minus or both (got {self.side})")

    def chart(self, s1, s2, t):
        r = t
        if self.side == "both":
            u, du = r * (2.0 * s1 - 1.0), 2.0 * r
        elif self.side == "plus":
            u, du = r * s1, r
        else:
            u, du = -r * s1, r
        a = np.exp(u)
        radial = np.sqrt(np.maximum(4.0 * a * np.sinh(0.5 * (r + u)) * np.sinh(0.5 * (r - u)), 0.0))
        theta = 2.0 * np.pi * s2
        jac = a * np.sinh(r) * du * 2.0 * np.pi
        return radial * np.cos(theta), radial * np.sin(theta), a, jac

    def contains(self, x1, x2, a):
        d = 0.5 * ((1.0 - a) ** 2 + x1 * x1 + x2 * x2) / a
        r = np.log1p(d + np.sqrt(d * (d + 2.0)))
        inside = r > self.t_min
        if self.side == "plus":
            inside &= a > 1.0
        elif self.side == "minus":
            inside &= a < 1.0
        return inside


@dataclass
class ScanReport:
    """Truncated integrals I(T_k) over a growing region plus the fitted growth model"""

    T: List[float]
    I: List[float]
    errors: List[float]
    model: str
    params: Dict[str, float]
    residual: float
    fits: Dict[str, Dict[str, float]] = field(default_factory=dict)

    @property
    def slope(self) -> float:
        return self.params.get("B", 0.0)

    @property
    def is_unbounded(self) -> bool:
        return self.model != "bounded"

    def to_dict(self) -> Dict:
        return {
            "T": list(self.T),
            "I": list(self.I),
            "errors": list(self.errors),
            "model": self.model,
            "params": dict(sorted(self.params.items())),
            "residual": self.residual,
            "fits": {k: dict(sorted(v.items())) for k, v in sorted(self.fits.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["T", "I", "model", "params"])
        params = json.dumps(dict(sorted(self.params.items())), sort_keys=True)
        for T, I in zip(self.T, self.I):
            writer.writerow([repr(T), repr(I), self.model, params])
        return buffer.getvalue()


def _fit(xs: np.ndarray, ys: np.ndarray) -> Tuple[float, float, float]:
    design = np.stack([np.ones_like(xs), xs], axis=1)
    (intercept, slope), *_ = np.linalg.lstsq(design, ys, rcond=None)
    fitted = intercept + slope * xs
    scale = max(float(np.max(np.abs(ys))), 1e-300)
    residual = float(np.sqrt(np.mean((ys - fitted) ** 2)) / scale)
    return float(intercept), float(slope), residual


def fit_growth(T: Sequence[float], I: Sequence[float], bounded_rtol: float = 0.01) -> Tuple[str, Dict[str, float], float, Dict[str, Dict[str, float]]]:
    """Classify a curve I(T) as bounded, log-growing or loglog-growing"""
    T_arr = np.asarray(T, dtype=float)
    I_arr = np.asarray(I, dtype=float)
    fits = {}
    if len(T_arr) >= 2:
        for name, xs in (("log", np.log(T_arr)), ("loglog", np.log(np.log(T_arr)))):
            A, B, residual = _fit(xs, I_arr)
            fits[name] = {"A": A, "B": B, "residual": residual}

    last, previous = I_arr[-1], I_arr[-2] if len(I_arr) >= 2 else I_arr[-1]
    change = abs(last - previous) / max(abs(last), 1e-300)
    if change < bounded_rtol:
        return "bounded", {"limit": float(last), "last_change": float(change)}, 0.0, fits

    model = min(fits, key=lambda name: fits[name]["residual"])
    best = fits[model]
    return model, {"A": best["A"], "B": best["B"], "last_change": float(change)}, best["residual"], fits


def scan_tail(
    weight: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    region: Region,
    T_list: Sequence[float],
    tol: float = 1e-8,
    rel_tol: float = 1e-6,
    max_panels: Optional[int] = None,
    workers: Optional[int] = None,
) -> ScanReport:
    """Cumulative integrals of weight over region ∩ {t < log T_k} and the best growth model"""
    T_list = [float(T) for T in T_list]
    if len(T_list) < 3:
        raise InvalidParameterError("scan_tail needs at least three truncation bounds")
    if any(not b > a for a, b in zip(T_list, T_list[1:])):
        raise InvalidParameterError("truncation bounds must be strictly increasing")
    edges = [math.log(T) for T in T_list]
    if edges[0] <= region.t_min:
        raise InvalidParameterError(f"first truncation log T = {edges[0]:.4g} must exceed the region start {region.t_min:.4g}")

    values, errors = [], []
    running, running_error = [], []
    start = region.t_min
    for T, stop in zip(T_list, edges):
        slab = integrate_region(weight, region, start, stop, tol, rel_tol, max_panels, workers)
        running.append(slab.value)
        running_error.append(slab.error)
        values.append(math.fsum(running))
        errors.append(math.fsum(running_error))
        logger.debug(f"Tail scan T={T:.3e}: I={values[-1]:.8e} (+- {errors[-1]:.1e}, {slab.panels} panels)")
        start = stop

    model, params, residual, fits = fit_growth(T_list, values)
    logger.info(f"Tail scan verdict: {model} {params}")
    return ScanReport(T_list, values, errors, model, params, residual, fits)


@dataclass(frozen=True)
class GridFunction:
    """Samples of a function on a uniform planar grid; values[iy, ix] at origin + dx * (ix, iy)"""

    values: np.ndarray
    dx: float
    origin: Tuple[float, float]

    @classmethod
    def sample(cls, f: Callable[[np.ndarray, np.ndarray], np.ndarray], lower: Tuple[float, float], upper: Tuple[float, float], dx: float) -> "GridFunction":
        nx = int(round((upper[0] - lower[0]) / dx)) + 1
        ny = int(round((upper[1] - lower[1]) / dx)) + 1
        xs = lower[0] + dx * np.arange(nx)
        ys = lower[1] + dx * np.arange(ny)
        X, Y = np.meshgrid(xs, ys)
        return cls(np.asarray(f(X, Y), dtype=float), float(dx), (float(lower[0]), float(lower[1])))

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        ny, nx = self.values.shape
        xs = self.origin[0] + self.dx * np.arange(nx)
        ys = self.origin[1] + self.dx * np.arange(ny)
        return np.meshgrid(xs, ys)

    def integral(self) -> float:
        return math.fsum(self.values.ravel()) * self.dx * self.dx

    def norm2(self) -> float:
        return math.sqrt(math.fsum((self.values * self.values).ravel()) * self.dx * self.dx)

    def header(self) -> Dict:
        ny, nx = self.values.shape
        return {"nx": nx, "ny": ny, "dx": self.dx, "origin": list(self.origin)}

    def save(self, path) -> Tuple[Path, Path]:
        """Write a flat little-endian double array and its JSON header next to it"""
        path = Path(path)
        header_path = path.with_suffix(".json")
        np.ascontiguousarray(self.values, dtype="<f8").tofile(path)
        header_path.write_text(json.dumps(self.header(), sort_keys=True))
        return path, header_path

    @classmethod
    def load(cls, path) -> "GridFunction":
        path = Path(path)
        header = json.loads(path.with_suffix(".json").read_text())
        values = np.fromfile(path, dtype="<f8").reshape(header["ny"], header["nx"])
        return cls(values, float(header["dx"]), tuple(header["origin"]))


def kernel_radius(kernel: Callable[[np.ndarray, np.ndarray], np.ndarray], tail_tol: float = 1e-4) -> float:
    """Smallest radius R with int_{|x| > R} |kernel| <= tail_tol * int |kernel|

    The radial L^1 profile is integrated on a geometric grid; the tail beyond the grid is
    extrapolated from the power law through its last two samples, and R is solved from that
    power law when the sampled radii do not reach the tolerance.
    """
    radii = np.geomspace(1e-2, 1e4, 2000)
    angles = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
    R, A = np.meshgrid(radii, angles, indexing="ij")
    profile = np.mean(np.abs(kernel(R * np.cos(A), R * np.sin(A))), axis=1)
    if not np.all(np.isfinite(profile)):
        raise InvalidParameterError("kernel is not finite on the sampled radii")
    # int m(rho) rho d rho = int m rho^2 d log rho
    density = profile * radii ** 2
    steps = 0.5 * (density[1:] + density[:-1]) * np.diff(np.log(radii))
    core = 0.5 * profile[0] * radii[0] ** 2
    end, previous = profile[-1], profile[-2]
    decay = math.inf
    if end == 0.0:
        beyond = 0.0
    else:
        decay = -math.log(end / previous) / math.log(radii[-1] / radii[-2]) if previous > 0.0 else 0.0
        if not decay > 2.0:
            raise InvalidParameterError(f"kernel tail decays like |x|^-{decay:.3g}, which is not integrable in the plane")
        beyond = end * radii[-1] ** 2 / (decay - 2.0)
    total = core + math.fsum(steps) + beyond
    if total == 0.0:
        return float(radii[0])
    tails = beyond + np.concatenate([np.cumsum(steps[::-1])[::-1], [0.0]])
    inside = np.nonzero(tails <= tail_tol * total)[0]
    if len(inside) == 0:
        # beyond(R) = beyond * (R / radii[-1])^(2 - decay)
        return float(radii[-1] * (tail_tol * total / beyond) ** (1.0 / (2.0 - decay)))
    return float(radii[inside[0]])


def kernel_gradient(kernel: Callable[[np.ndarray, np.ndarray], np.ndarray], step: float = 1e-5) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """|grad kernel| by central differences with a step relative to max(1, |x|)"""

    def magnitude(x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        h = step * np.maximum(1.0, np.hypot(x1, x2))
        d1 = (kernel(x1 + h, x2) - kernel(x1 - h, x2)) / (2.0 * h)
        d2 = (kernel(x1, x2 + h) - kernel(x1, x2 - h)) / (2.0 * h)
        return np.hypot(d1, d2)

    return magnitude


def convolve2d(
    kernel: Callable[[np.ndarray, np.ndarray], np.ndarray],
    g: GridFunction,
    a: float,
    tail_tol: float = 1e-4,
    max_kernel_points: int = 4097,
) -> GridFunction:
    """(kernel_a * g) on the grid of g, with kernel_a(x) = a^-2 kernel(x / a)

    g is zero off its grid, so kernel offsets past the grid's extent are never needed.
    """
    if not a > 0:
        raise InvalidParameterError(f"dilation must be positive (got {a})")
    if a < 2.0 * g.dx:
        raise GridTooCoarseError(f"grid step {g.dx:.3e} does not resolve the kernel scale {a:.3e}")
    radius = a * kernel_radius(kernel, tail_tol)
    half = min(int(math.ceil(radius / g.dx)), max(g.values.shape))
    if 2 * half + 1 > max_kernel_points:
        raise InvalidParameterError(
            f"kernel radius {radius:.3e} needs {2 * half + 1} points per axis at step {g.dx:.3e}, above {max_kernel_points}"
        )
    offsets = g.dx * np.arange(-half, half + 1)
    KX, KY = np.meshgrid(offsets, offsets)
    sampled = kernel(KX / a, KY / a) / (a * a)
    out = fftconvolve(g.values, sampled, mode="same") * g.dx * g.dx
    return GridFunction(out, g.dx, g.origin)
