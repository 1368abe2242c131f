"""
Experiment orchestration: verification suites, unboundedness scans, the h_N experiment
and the boundedness checks
"""

import logging
import math
import time
from dataclasses import replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.algebra.term_algebra import second_order_kernel, third_derivative_X2
from src.experiments.reports import ExperimentReport, at_least, at_most, check, holds
from src.experiments.suites import SUITES
from src.group.group_core import GroupPoint, distance, multiply, radius
from src.hardy.cz_hardy import (
    CZSet,
    IndicatorAtom,
    LevelSetEstimate,
    build_hN,
    build_kit,
    check_inclusion,
    check_nesting,
    check_translation,
    choose_bump,
    dilated_contains,
    dilated_measure,
    halves_atom,
    image_norm_scan,
    level_set_measure,
    lift_to_H1,
    mean_value_defect,
    norm_estimate,
    pointwise_lower_bound,
    probe_points,
    riesz_image,
    validate_atom,
)
from src.kernels.kernels import beta_gradient_Y, beta_local, cutoff, kernel_gij, kernel_k, local_kernel, psi_ij
from src.quadrature.quadrature import ShellRegion, integrate_region, scan_tail
from src.utils.config import Config
from src.utils.errors import InvalidParameterError, RieszLabError

logger = logging.getLogger(__name__)

config = Config()

DEFAULT_T = {
    "s1": [1e2, 1e4, 1e8],
    "s0": [1e2, 1e4, 1e8, 1e16],
    "sij": [1e2, 1e4, 1e8],
}
BOUNDED_CHECKS = ("hormander", "riesz-atoms", "tij-global", "local-beta")
# panel budget per integral by check; the others use 4000
DEFAULT_BUDGETS = {"hormander": 20000, "riesz-atoms": 20000}


def _run_stage(report: ExperimentReport, name: str, fn: Callable[[], Any]) -> Any:
    """Run one stage; a library error marks the report failed at this stage and returns None"""
    if report.failed_stage is not None:
        return None
    started = time.perf_counter()
    try:
        result = fn()
    except RieszLabError as e:
        logger.error(f"Stage {name} of {report.id} failed: {e}")
        report.failed_stage = name
        report.error = f"{type(e).__name__}: {e}"
        report.error_exit_code = e.exit_code
        return None
    logger.info(f"Stage {name} of {report.id} finished in {time.perf_counter() - started:.2f}s")
    return result


def _finish(report: ExperimentReport, started: float) -> ExperimentReport:
    status = "passed" if report.passed else f"failed ({report.failed_stage or ', '.join(report.failing())})"
    logger.info(f"Experiment {report.id} {status} in {time.perf_counter() - started:.2f}s")
    return report


def run_verify(suite: str, tol: Optional[float] = None, seed: Optional[int] = None) -> ExperimentReport:
    """Run one oracle suite"""
    if suite not in SUITES:
        raise InvalidParameterError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    tol = config.tol if tol is None else tol
    seed = config.seed if seed is None else seed
    started = time.perf_counter()
    report = ExperimentReport(id=f"verify-{suite}", params={"suite": suite, "tol": tol}, seed=seed)
    checks = _run_stage(report, suite, lambda: SUITES[suite](tol, seed))
    if checks:
        report.checks.extend(checks)
    return _finish(report, started)


def _default_T(kind: str, T_max: Optional[float]) -> List[float]:
    if T_max is None:
        return list(DEFAULT_T[kind])
    if not T_max > 1e2:
        raise InvalidParameterError(f"T_max must exceed 1e2 (got {T_max})")
    exponents = [2.0]
    while 2.0 * exponents[-1] < math.log10(T_max):
        exponents.append(2.0 * exponents[-1])
    exponents.append(math.log10(T_max))
    if len(exponents) < 3:
        exponents.insert(1, 0.5 * (exponents[0] + exponents[1]))
    return [10.0 ** e for e in exponents]


def _closed_form(kind: str, kit, T: float) -> Optional[float]:
    if kind == "s0":
        floor = kit.core.floor
        return math.pi / 64.0 * (math.log(math.log(T)) - math.log(math.log(floor)))
    if kind == "sij":
        return kit.params["core_slope"] * math.log(T / kit.core.floor)
    return None


def run_unbounded(
    kind: str,
    i: int = 0,
    j: int = 0,
    T_list: Optional[Sequence[float]] = None,
    T_max: Optional[float] = None,
    tol: Optional[float] = None,
    seed: Optional[int] = None,
    samples: int = 10000,
    direct: bool = False,
    budget: Optional[int] = None,
) -> ExperimentReport:
    """Build a counterexample kit, check its geometry and scan its weight over the core region"""
    kind = kind.lower()
    if kind not in DEFAULT_T:
        raise InvalidParameterError(f"unknown counterexample {kind!r}; choose s1, s0 or sij")
    seed = config.seed if seed is None else seed
    tol = config.tol if tol is None else tol
    T_list = [float(T) for T in T_list] if T_list else _default_T(kind, T_max)
    params: Dict[str, Any] = {"kind": kind, "T": T_list, "tol": tol, "samples": samples, "direct": direct}
    if kind == "sij":
        params.update({"i": i, "j": j})
    started = time.perf_counter()
    report = ExperimentReport(id=f"unbounded-{kind}" + (f"{i}{j}" if kind == "sij" else ""), params=params, seed=seed)

    kit = _run_stage(report, "kit", lambda: build_kit(kind, **({"i": i, "j": j} if kind == "sij" else {})))
    if kit is None:
        return _finish(report, started)
    report.artifacts["kit"] = kit.to_dict()

    def geometry():
        evidence = validate_atom(kit.atom)
        report.checks.append(holds("atom", "the difference of block indicators is an atom", evidence.ok,
                                   detail=",".join(evidence.failures) or None))
        report.checks.append(at_most("nesting", "nested regions", check_nesting(kit, samples, seed), 0))
        report.checks.append(at_most("block_inclusion", "core * block^-1 * block inside middle region",
                                     check_inclusion(kit, samples, seed), 0))
        violations, ratio = check_translation(kit, samples, seed)
        report.checks.append(at_most("shift_inclusion", "middle * exp(s X) inside outer region", violations, 0))
        report.checks.append(at_least("weight_under_shift", "weight comparable along the shift", ratio, 0.25))
        constant, nonpositive = pointwise_lower_bound(kit, samples, seed)
        report.checks.append(check("pointwise_lower_bound", "|X k| >= c * weight on the outer region", constant, 0.0,
                                   constant > 0.0 and nonpositive == 0, detail=f"{nonpositive} nonpositive samples"))
        report.artifacts["lower_bound_constant"] = constant

    _run_stage(report, "geometry", geometry)

    scan = _run_stage(report, "scan", lambda: scan_tail(kit.weight, kit.core, T_list, tol=0.0, rel_tol=min(tol, 1e-6),
                                                        max_panels=budget, workers=config.worker_count()))
    if scan is not None:
        report.artifacts["scan"] = scan.to_dict()
        increasing = all(b > a for a, b in zip(scan.I, scan.I[1:]))
        report.checks.append(holds("monotone_growth", "truncated integrals increase", increasing))
        report.checks.append(holds("unbounded_model", "weight is not integrable over the core region", scan.is_unbounded,
                                   detail=scan.model))
        if kind in ("s0", "sij"):
            expected_model = "loglog" if kind == "s0" else "log"
            slope = kit.params["core_slope"]
            observed = scan.fits.get(expected_model, {}).get("B", math.nan)
            report.checks.append(at_most("growth_slope", f"{expected_model} slope {slope:.6g}",
                                         abs(observed / slope - 1.0), 0.05))
            exact = _closed_form(kind, kit, T_list[-1])
            report.checks.append(at_most("closed_form", "truncated integral against its antiderivative",
                                         abs(scan.I[-1] / exact - 1.0), 0.01))

    if direct:
        def image():
            image_scan = image_norm_scan(kit, T_list[:3], max_panels=budget)
            report.artifacts["image_scan"] = image_scan.to_dict()
            report.checks.append(holds("image_norm_growth", "truncated L^1 norm of the image keeps growing",
                                       all(b > a for a, b in zip(image_scan.I, image_scan.I[1:]))))
            defect = mean_value_defect(kit, probe_points(kit, 20, seed), tol=1e-9)
            report.checks.append(at_most("mean_value_identity", "kernel integral against shifted-segment mean", defect, 1e-6))

        _run_stage(report, "direct", image)
    return _finish(report, started)


def run_hn(
    N_list: Sequence[int] = (2, 3, 4),
    p: int = 4,
    q: int = 2,
    draws: int = 20,
    patches: int = 16,
    heights: int = 4,
    i: int = 0,
    j: int = 0,
    seed: Optional[int] = None,
    tail_tol: float = 1e-3,
    L_factor: float = 1.05,
) -> ExperimentReport:
    """Level sets of psi_a * h_N and the norms of h_N across N"""
    seed = config.seed if seed is None else seed
    N_list = sorted(int(N) for N in N_list)
    if not N_list or draws < 1:
        raise InvalidParameterError("run_hn needs at least one N and one sign draw")
    if not L_factor > 1.0:
        raise InvalidParameterError(f"L = factor * e^N needs factor > 1 (got {L_factor})")
    params = {"N": N_list, "p": p, "q": q, "draws": draws, "patches": patches, "heights": heights,
              "i": i, "j": j, "tail_tol": tail_tol, "L_factor": L_factor,
              "level_set_truncation": LevelSetEstimate.truncation}
    started = time.perf_counter()
    report = ExperimentReport(id=f"hn-{i}{j}", params=params, seed=seed)

    psi = _run_stage(report, "psi", lambda: psi_ij(i, j))
    bump = _run_stage(report, "bump", lambda: choose_bump(psi))
    if bump is None:
        return _finish(report, started)
    t = 0.5 * abs(bump.psi_center)
    report.artifacts.update({"bump": bump.name, "psi_phi_origin": bump.psi_center, "t": t})

    rows = []

    def measure_all():
        for N in N_list:
            family = build_hN(N, L_factor * math.exp(N), p, q, seed, bump)
            norms = [norm_estimate(replace(family, seed=seed + d), patches=patches, seed=seed + d) for d in range(draws)]
            median = float(np.median(norms))
            level = level_set_measure(family, psi, t, patches=patches, heights=heights, seed=seed, tail_tol=tail_tol)
            L = family.L
            rows.append({
                "N": N,
                "L": L,
                "terms": family.term_count(),
                "level_set_measure": level.measure,
                "level_set_stderr": level.stderr,
                "level_set_per_band": level.per_level,
                "level_ratio": level.measure / (N * L * L),
                "norm_median": median,
                "norm_ratio": median / (math.sqrt(N) * L),
                "expected_norm_ratio": math.sqrt(family.expected_norm_sq()) / (math.sqrt(N) * L),
                "implied_ratio": t * level.measure / (2.0 * L * median),
            })
            logger.info(f"h_N at N={N}: level ratio {rows[-1]['level_ratio']:.4e}, norm ratio {rows[-1]['norm_ratio']:.4e}")
        return family

    family = _run_stage(report, "measure", measure_all)
    report.artifacts["rows"] = rows
    if family is None:
        return _finish(report, started)

    level_ratios = [row["level_ratio"] for row in rows]
    norm_ratios = [row["norm_ratio"] for row in rows]
    implied = [row["implied_ratio"] for row in rows]
    norm_bound = 2.0 * max(row["expected_norm_ratio"] for row in rows)
    report.checks.append(at_least("level_ratio_positive", "level-set measure >= c N L^2", min(level_ratios), 1e-12))
    report.checks.append(at_least("level_ratio_trend", "no decreasing trend in the level ratio",
                                  level_ratios[-1] / level_ratios[0], 0.5))
    report.checks.append(at_most("norm_ratio_bounded", "median ||h_N||_2 <= C sqrt(N) L", max(norm_ratios), norm_bound))
    report.checks.append(check("implied_ratio_growth", "||f_N * k3||_1 / ||f_N||_H1 grows with N", implied[-1] / implied[0],
                               1.0, implied[-1] > implied[0]))

    def lift():
        lifted = lift_to_H1(list(family.atom_terms(limit=5)))
        report.checks.append(holds("lifted_atoms", "lifted planar atoms are atoms on G",
                                   all(validate_atom(atom).ok for _, atom in lifted.terms)))

    _run_stage(report, "lift", lift)
    return _finish(report, started)


def hormander_integral(i: int, R: CZSet, y: GroupPoint, z: GroupPoint, extra: float = 12.0,
                       rel_tol: float = 1e-3, max_panels: Optional[int] = None) -> float:
    """int over the complement of R* of |R_i(x, y) - R_i(x, z)| d rho(x), with x = y w"""
    g = multiply(GroupPoint(-z.x1 / z.a, -z.x2 / z.a, 1.0 / z.a), y)
    ratio = (y.a / z.a) ** 2

    def integrand(w1, w2, b):
        w = GroupPoint(w1, w2, b)
        outside = ~dilated_contains(R, multiply(y, w))
        values = np.abs(np.asarray(kernel_k(i, w)) - ratio * np.asarray(kernel_k(i, multiply(g, w))))
        return np.where(outside, values, 0.0)

    r_hi = R.r + float(distance(y, z)) + extra
    region = ShellRegion("both", t_min=R.r)
    result = integrate_region(integrand, region, R.r, r_hi, tol=0.0, rel_tol=rel_tol,
                              max_panels=max_panels, workers=config.worker_count(), strict=True)
    return result.value


def riesz_atom_norm(i: int, atom: IndicatorAtom, rel_tol: float = 2e-2, extra: float = 12.0,
                    max_panels: Optional[int] = None) -> Tuple[float, float]:
    """(||R_i a||_1, share of it beyond reach + extra / 2) for an atom whose support contains e

    |R_i a| is integrated over geodesic shells around e: the ball reaching the support's
    farthest corner, then two shells of width extra / 2.
    """
    reach = max(float(np.max(radius(box.corners()))) for _, box in atom.pieces)

    def weight(x1, x2, a):
        return np.abs(riesz_image(i, atom, x1, x2, a))

    edges = [0.0, reach, reach + 0.5 * extra, reach + extra]
    parts = [
        integrate_region(weight, ShellRegion("both"), lo, hi, tol=0.0, rel_tol=rel_tol,
                         max_panels=max_panels, workers=config.worker_count(), strict=True).value
        for lo, hi in zip(edges[:-1], edges[1:])
    ]
    total = math.fsum(parts)
    return total, (parts[-1] / total if total > 0.0 else 0.0)


def _set_at_scale(r: float) -> CZSet:
    L = math.e ** 2 * r if r < 1.0 else math.exp(2.0 * r)
    return CZSet(0.0, 0.0, 1.5 * L, 1.0, r)


def _points_in_set(R: CZSet, fractions: Sequence[Tuple[float, float, float]]) -> List[GroupPoint]:
    return [GroupPoint(R.b1 + 0.5 * R.L * f1, R.b2 + 0.5 * R.L * f2, R.a * math.exp(R.r * f3)) for f1, f2, f3 in fractions]


def _hormander(seed: int, budget: Optional[int], i: int = 1,
               radii: Sequence[float] = (0.1, 1.0, 5.0)) -> Tuple[list, Dict]:
    checks, maxima = [], {}
    pairs = [((0.0, 0.0, 0.0), (0.9, 0.0, 0.0)), ((0.0, 0.0, 0.0), (0.0, 0.0, 0.9)), ((-0.9, 0.5, -0.5), (0.9, -0.5, 0.5))]
    for r in radii:
        R = _set_at_scale(r)
        values = []
        for fy, fz in pairs:
            y, z = _points_in_set(R, [fy, fz])
            values.append(hormander_integral(i, R, y, z, max_panels=budget))
        maxima[str(r)] = max(values)
    ordered = [maxima[k] for k in sorted(maxima, key=float)]
    checks.append(at_most("hormander_trend", "largest-scale maximum within 3x of the smallest-scale maximum",
                          ordered[-1] / ordered[0], 3.0))
    checks.append(holds("hormander_finite", "complement integrals finite", all(math.isfinite(v) for v in ordered)))
    return checks, {"maxima": maxima}


def _riesz_atoms(seed: int, budget: Optional[int], i: int = 1,
                 radii: Sequence[float] = tuple(np.logspace(-2.0, 0.0, 5))) -> Tuple[list, Dict]:
    norms, tails, bounds, valid = {}, {}, {}, []
    for r in radii:
        R = _set_at_scale(float(r))
        for split in ("x1", "u"):
            key = f"r={float(r):.4g},split={split}"
            atom = halves_atom(R, split)
            valid.append(validate_atom(atom).ok)
            norms[key], tails[key] = riesz_atom_norm(i, atom, max_panels=budget)
            # a-priori L^2 and Hormander bound, reported beside the computed norm
            halves = [box.center() for _, box in atom.pieces]
            outer = max(hormander_integral(i, R, y, R.center, rel_tol=1e-2, max_panels=budget) for y in halves)
            bounds[key] = math.sqrt(dilated_measure(R) / R.measure) + outer
            logger.info(f"||R_{i} a||_1 at {key}: {norms[key]:.4e} (bound {bounds[key]:.4e})")
    values = list(norms.values())
    checks = [
        holds("riesz_atoms_valid", "halves atoms satisfy the atom conditions", all(valid)),
        holds("riesz_atoms_finite", "||R_i a||_1 finite and positive over the atom family",
              all(math.isfinite(v) and v > 0.0 for v in values)),
        at_most("riesz_atoms_trend", "||R_i a||_1 varies by at most 3x across the scales", max(values) / min(values), 3.0),
    ]
    return checks, {"norms": norms, "tail_share": tails, "bounds": bounds}


def _tij_global(seed: int, budget: Optional[int], pairs: Sequence[Tuple[int, int]] = ((0, 0), (1, 1), (1, 2), (2, 0))) -> Tuple[list, Dict]:
    checks, scans = [], {}
    for i, j in pairs:
        def weight(x1, x2, a, i=i, j=j):
            p = GroupPoint(x1, x2, a)
            return np.abs(np.asarray(kernel_gij(i, j, p))) * (1.0 - np.asarray(cutoff(radius(p))))

        scan = scan_tail(weight, ShellRegion("both", t_min=1.0), [1e2, 1e3, 1e6], tol=0.0, rel_tol=1e-4,
                         max_panels=budget, workers=config.worker_count())
        scans[f"{i}{j}"] = scan.to_dict()
        change = abs(scan.I[-1] - scan.I[-2]) / abs(scan.I[-1])
        checks.append(at_most(f"g{i}{j}_integrable", "truncated integrals of |g_ij| stabilise", change, 0.01))
    return checks, {"scans": scans}


def _local_beta(seed: int, budget: Optional[int], n: int = 10000) -> Tuple[list, Dict]:
    rng = np.random.default_rng(seed)
    Y = rng.normal(size=(n, 3))
    Y *= (1.9 * rng.uniform(size=(n, 1)) ** (1.0 / 3.0)) / np.linalg.norm(Y, axis=1, keepdims=True)
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    gap = np.exp(rng.uniform(math.log(0.01), math.log(0.5), size=(n, 1)))
    X = Y + gap * direction
    half = n // 2
    checks, constants = [], {}
    for tag, i, j in (("k", 0, 0), ("k", 1, 2), ("g", 1, 1), ("g", 2, 0), ("l", 0, 1)):
        kernel = local_kernel(tag, i, j)
        values = np.abs(np.asarray(beta_local(kernel, X, Y))) * gap[:, 0] ** 3
        gradient = np.linalg.norm(beta_gradient_Y(kernel, X, Y), axis=-1) * gap[:, 0] ** 4
        C0, C1 = 2.0 * values[:half].max(), 2.0 * gradient[:half].max()
        violations = int(np.sum(values[half:] > C0) + np.sum(gradient[half:] > C1))
        constants[f"{tag}{i}{j}"] = {"value": C0, "gradient": C1}
        checks.append(at_most(f"beta_{tag}{i}{j}", "standard estimates with one fitted constant", violations, 0))
    return checks, {"constants": constants}


_BOUNDED = {
    "hormander": _hormander,
    "riesz-atoms": _riesz_atoms,
    "tij-global": _tij_global,
    "local-beta": _local_beta,
}


def run_bounded(check_name: str, seed: Optional[int] = None, budget: Optional[int] = None) -> ExperimentReport:
    """Numerical evidence for the bounded operators"""
    if check_name not in _BOUNDED:
        raise InvalidParameterError(f"unknown check {check_name!r}; choose from {list(BOUNDED_CHECKS)}")
    seed = config.seed if seed is None else seed
    budget = DEFAULT_BUDGETS.get(check_name, 4000) if budget is None else budget
    started = time.perf_counter()
    report = ExperimentReport(id=f"bounded-{check_name}", params={"check": check_name, "budget": budget}, seed=seed)
    outcome = _run_stage(report, check_name, lambda: _BOUNDED[check_name](seed, budget))
    if outcome is not None:
        checks, artifacts = outcome
        report.checks.extend(checks)
        report.artifacts.update(artifacts)
    return _finish(report, started)


def expand(i: int, j: int, order: Optional[int] = None) -> Dict[str, Any]:
    """Derived expansions of k_ij and X_2 k_ij with exact constants"""
    K = config.order if order is None else order
    second = second_order_kernel(i, j, K)
    third = third_derivative_X2(i, j, K)
    psi = psi_ij(i, j, K)
    return {
        "indices": [i, j],
        "order": K,
        "second_order": second.describe(),
        "third_order": third.describe(),
        "psi": {"alpha": psi.alpha, "m": list(psi.m), "beta": psi.beta, "n": list(psi.n)},
    }
