"""
Oracle suites behind `rieszlab verify`

Each suite returns a list of CheckResult records. A library error raised inside a suite
marks the report as failed at that stage in the runner.
"""

import logging
import math
from typing import Callable, Dict, List, Tuple

import numpy as np
import sympy
from scipy.special import erf

from src.algebra.term_algebra import (
    ExpSeries,
    Half,
    classify_integrability,
    derive,
    evaluate,
    expansion_W,
    second_order_kernel,
    third_derivative_X2,
)
from src.experiments.reports import CheckResult, at_least, at_most, check, holds
from src.group.group_core import (
    GroupPoint,
    ball_volume,
    distance,
    euclidean_comparison,
    field_derivative,
    identity,
    inverse,
    modular,
    multiply,
    radius,
    radius_derivative,
    right_invariant_derivative,
    sample_points,
)
from src.hardy.cz_hardy import (
    CZSet,
    IndicatorAtom,
    TranslatedBox,
    bump_candidates,
    build_hN,
    build_kit,
    check_inclusion,
    check_nesting,
    check_translation,
    choose_bump,
    is_cz_set,
    lift_to_H1,
    mean_value_defect,
    pointwise_lower_bound,
    probe_points,
    sample_region,
    standard_set,
    validate_atom,
)
from src.kernels.kernels import (
    KernelSplit,
    check_kij_overlap,
    first_derivative_W,
    group_convolution,
    heat_kernel,
    heat_mass,
    integral_kernel,
    kernel_gij,
    kernel_k,
    kernel_U,
    kernel_W,
    kernel_X0k0,
    kernel_X2k1,
    modular_derivative_at_identity,
    psi_ij,
    subordinated_kernel,
)
from src.quadrature.quadrature import Box, ShellRegion, integrate, scan_tail
from src.utils.errors import OrderExhaustedError, OutOfDomainError, StrategyDisagreementError

logger = logging.getLogger(__name__)

PAIRS = [(i, j) for i in range(3) for j in range(3)]


def _points_in_shell(rng: np.random.Generator, n: int, r_lo: float, r_hi: float, spread: float = 2.0) -> GroupPoint:
    """n random points with r_lo < r < r_hi, drawn by rejection from log-normal heights"""
    chosen = []
    while sum(len(c) for c in chosen) < n:
        p = sample_points(rng, 4 * n, spread)
        r = np.asarray(radius(p))
        keep = (r > r_lo) & (r < r_hi)
        chosen.append(np.stack([p.x1[keep], p.x2[keep], p.a[keep]], axis=1))
    coords = np.concatenate(chosen)[:n]
    return GroupPoint(coords[:, 0], coords[:, 1], coords[:, 2])


def _relative(a, b, floor: float = 0.0) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor)))


def metric_suite(tol: float, seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    checks = []

    product = multiply(GroupPoint(1.0, 2.0, 2.0), GroupPoint(3.0, 4.0, 5.0))
    checks.append(holds("product_example", "product rule (x + a x', a a')", product.as_tuple() == (7.0, 10.0, 10.0)))

    p = sample_points(rng, 1000)
    e = multiply(p, inverse(p))
    err = max(float(np.max(np.abs(e.x1))), float(np.max(np.abs(e.x2))), float(np.max(np.abs(e.a - 1.0))))
    checks.append(at_most("inverse_round_trip", "group axioms", err, 1e-12))

    g, q = sample_points(rng, 1000), sample_points(rng, 1000)
    d = np.asarray(distance(p, q))
    moved = np.asarray(distance(multiply(g, p), multiply(g, q)))
    checks.append(at_most("left_invariance", "left-invariant metric", float(np.max(np.abs(moved - d) / (1.0 + d))), 1e-10))

    sym = np.abs(np.asarray(radius(p)) - np.asarray(radius(inverse(p))))
    checks.append(at_most("inversion_symmetry", "r(p) = r(p^-1)", float(sym.max()), 1e-10))

    x, y, z = sample_points(rng, 10000), sample_points(rng, 10000), sample_points(rng, 10000)
    slack = np.asarray(distance(x, z)) - np.asarray(distance(x, y)) - np.asarray(distance(y, z))
    checks.append(at_most("triangle_inequality", "metric axioms", int(np.sum(slack > 1e-12)), 0))

    mod = np.abs(np.asarray(modular(multiply(g, q))) - np.asarray(modular(g)) * np.asarray(modular(q)))
    checks.append(at_most("modular_homomorphism", "delta(pq) = delta(p) delta(q)", float(np.max(mod / np.asarray(modular(multiply(g, q))))), 1e-12))

    value = float(distance(GroupPoint(1.0, 1.0, 1.0), identity()))
    checks.append(at_most("distance_example", "r(1, 1, 1) = arcosh 2", abs(value - math.acosh(2.0)), 1e-12))

    shell = _points_in_shell(rng, 100, 0.1, 5.0)
    worst = 0.0
    for i in range(3):
        fd = np.asarray(field_derivative(i, radius, shell, h=1e-5))
        worst = max(worst, float(np.max(np.abs(fd - np.asarray(radius_derivative(i, shell))))))
    checks.append(at_most("radius_derivatives", "X_i r closed forms", worst, 1e-6))

    oracle = math.pi * (math.sinh(4.0) - 4.0)
    volume = ball_volume(2.0, tol=1e-6)
    checks.append(at_most("ball_volume_r2", "hyperbolic ball volume pi (sinh 2r - 2r)", abs(volume - oracle) / oracle, 0.01))
    small = ball_volume(0.1, tol=1e-10) / 0.1 ** 3
    checks.append(at_most("ball_volume_small", "Euclidean small-ball limit 4 pi / 3", abs(small / (4.0 * math.pi / 3.0) - 1.0), 0.05))

    lower, upper = euclidean_comparison(2000, 1.0, seed)
    checks.append(check("euclidean_comparison", "r comparable to |(x1, x2, log a)| near e", upper / lower, None,
                        lower > 0 and math.isfinite(upper), detail=f"{lower:.4f} <= r/|x| <= {upper:.4f}"))

    box = Box((-math.inf, -math.inf, -5.0), (math.inf, math.inf, 5.0))
    result = integrate(lambda x1, x2, u: np.exp(-x1 * x1 - x2 * x2 - u * u), box, tol=tol)
    exact = math.pi * math.sqrt(math.pi) * erf(5.0)
    checks.append(at_most("log_coordinates_measure", "rho is Lebesgue in (x1, x2, log a)", abs(result.value - exact), max(tol, result.error) * 10))
    return checks


def heat_suite(tol: float, seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    checks = []
    for t in (0.1, 1.0):
        mass = heat_mass(t, tol=1e-9)
        checks.append(at_most(f"heat_mass_t{t}", "heat kernel is a probability density", abs(mass - 1.0), 1e-4))

    value = heat_kernel(1.0, identity())
    checks.append(at_most("heat_at_identity", "p_1(e) = 1 / (8 pi^3/2)", abs(value * 8.0 * math.pi ** 1.5 - 1.0), 1e-12))

    points = _points_in_shell(rng, 5, 0.2, 2.0, spread=0.6)
    worst = 0.0
    r_max = 2.0 + 14.0 * math.sqrt(0.5)
    for k in range(5):
        x = points[k]
        conv = group_convolution(lambda w: heat_kernel(0.5, w), lambda w: heat_kernel(0.5, w), x, r_max, tol=1e-10)
        worst = max(worst, abs(conv / heat_kernel(1.0, x) - 1.0))
    checks.append(at_most("semigroup", "p_t * p_s = p_(t+s)", worst, 1e-3))

    points = _points_in_shell(rng, 10, 0.2, 4.0)
    worst_u = worst_w = 0.0
    for k in range(10):
        x = points[k]
        worst_u = max(worst_u, abs(subordinated_kernel(1.0, x) / kernel_U(x) - 1.0))
        worst_w = max(worst_w, abs(subordinated_kernel(2.0, x) / kernel_W(x) - 1.0))
    checks.append(at_most("subordination_U", "U = Gamma(1/2)^-1 int t^-1/2 p_t dt", worst_u, 1e-4))
    checks.append(at_most("subordination_W", "W = int p_t dt", worst_w, 1e-4))
    return checks


def _convolution_identity_defect(split: KernelSplit, a: float, points: List[Tuple[float, float]], n: int = 241) -> float:
    """(f * k3)(x, a) against (psi_a * h)(x) for f(x, a) = bump(x) chi(log a)"""
    bump = bump_candidates()[0][1]

    def chi(u):
        return np.where(np.abs(u) < 0.5, np.cos(np.pi * u) ** 2, 0.0)

    xs = np.linspace(-1.0, 1.0, n)
    X, Y = np.meshgrid(xs, xs)
    cell = (xs[1] - xs[0]) ** 2
    h = bump(X, Y) * 0.5
    worst = 0.0
    for x1, x2 in points:
        target = GroupPoint(x1, x2, a)

        def integrand(w1, w2, u):
            w = GroupPoint(w1, w2, np.exp(u))
            return bump(w1, w2) * chi(u) * split.k3(multiply(inverse(w), target), restricted=False) * modular(w)

        lhs = integrate(integrand, Box((-1.0, -1.0, -0.5), (1.0, 1.0, 0.5)), tol=0.0, rel_tol=1e-7).value
        rhs = float(np.sum(h * split.psi((x1 - X) / a, (x2 - Y) / a)) * cell / a ** 2)
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    return worst


def kernels_suite(tol: float, seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    checks = []
    e_axis = GroupPoint(0.0, 0.0, math.e)
    checks.append(at_most("kernel_U_example", "U(0, 0, e)", abs(kernel_U(e_axis) - 1.0 / (2.0 * math.pi ** 2 * math.e * math.sinh(1.0))), 1e-15))
    checks.append(at_most("kernel_W_example", "W(0, 0, e)", abs(kernel_W(e_axis) - 1.0 / (4.0 * math.pi * math.e * math.sinh(1.0))), 1e-15))

    points = _points_in_shell(rng, 100, 0.1, 10.0, spread=2.0)
    worst_k, worst_w = 0.0, 0.0
    for i in range(3):
        closed = np.asarray(kernel_k(i, points))
        fd = np.asarray(field_derivative(i, kernel_U, points, h=1e-5, richardson=True))
        worst_k = max(worst_k, float(np.max(np.abs(closed - fd) / (np.abs(closed) + 1e-10))))
        closed = np.asarray(first_derivative_W(i, points))
        fd = np.asarray(field_derivative(i, kernel_W, points, h=1e-5, richardson=True))
        worst_w = max(worst_w, float(np.max(np.abs(closed - fd) / (np.abs(closed) + 1e-10))))
    checks.append(at_most("first_order_riesz_kernels", "k_i = X_i U", worst_k, 1e-5))
    checks.append(at_most("first_derivatives_W", "X_i W closed forms", worst_w, 1e-5))

    closed = np.asarray(kernel_X2k1(points))
    fd = np.asarray(field_derivative(2, lambda w: kernel_k(1, w), points, h=1e-4, richardson=True))
    checks.append(at_most("X2k1_closed_form", "X_2 k_1 closed form", float(np.max(np.abs(closed - fd) / (np.abs(closed) + 1e-8))), 1e-4))
    closed = np.asarray(kernel_X0k0(points))
    fd = np.asarray(field_derivative(0, lambda w: kernel_k(0, w), points, h=1e-4, richardson=True))
    checks.append(at_most("X0k0_closed_form", "X_0 k_0 closed form", _relative(closed, fd, 1e-8), 1e-4))

    column = build_kit("s0").regions["column"]
    positive = np.asarray(kernel_X0k0(sample_region(column, rng, 1000)))
    checks.append(at_most("X0k0_positive_on_column", "X_0 k_0 > 0 on the column", int(np.sum(positive <= 0.0)), 0))

    x, y = sample_points(rng, 100), sample_points(rng, 100)
    worst = 0.0
    for i in range(3):
        worst = max(worst, _relative(integral_kernel("S", x, y, i), -np.asarray(integral_kernel("R", y, x, i)), 1e-12))
    checks.append(at_most("S_i_adjoint", "S_i(x, y) = -R_i(y, x)", worst, 1e-12))
    worst = 0.0
    for i, j in ((0, 1), (1, 2), (2, 2)):
        worst = max(worst, _relative(integral_kernel("Sij", x, y, i, j), integral_kernel("Rij", y, x, j, i), 1e-12))
    checks.append(at_most("S_ij_adjoint", "S_ij(x, y) = R_ji(y, x)", worst, 1e-12))

    band = _points_in_shell(rng, 100, 2.5, 3.5, spread=2.5)
    worst = 0.0
    for i, j in PAIRS:
        try:
            worst = max(worst, check_kij_overlap(i, j, band))
        except StrategyDisagreementError as e:
            worst = max(worst, e.relative_error)
    checks.append(at_most("kij_overlap_band", "near and far evaluations of k_ij agree", worst, 1e-3))

    constants = [modular_derivative_at_identity(j) for j in range(3)]
    checks.append(holds("modular_derivative", "X_j delta(e)", constants == [-2.0, 0.0, 0.0]))
    sample = _points_in_shell(rng, 50, 0.5, 4.0)
    lhs = np.asarray(kernel_gij(1, 0, sample))
    rhs = -np.asarray(right_invariant_derivative(0, lambda w: first_derivative_W(1, w), sample, h=1e-5))
    rhs = rhs - 2.0 * np.asarray(first_derivative_W(1, sample))
    checks.append(at_most("gij_modular_term", "g_i0 = -X_0^r X_i W - 2 X_i W", _relative(lhs, rhs, 1e-12), 1e-5))

    psi = psi_ij(0, 0)
    checks.append(check("psi_decay", "|psi(y)| <= C (1 + |y|)^-3", psi.decay_constant(), None, math.isfinite(psi.decay_constant())))
    ys = np.linspace(0.0, 5.0, 11)
    expected = -2.0 / (math.pi * (1.0 + ys ** 2) ** 2) + 4.0 * ys / (math.pi * (1.0 + ys ** 2) ** 3)
    checks.append(at_most("psi00_profile", "psi_00 from alpha_00 and beta_00", float(np.max(np.abs(psi(ys, 0.0 * ys) - expected))), 1e-14))

    defect = _convolution_identity_defect(KernelSplit.build(0, 0), 1.5, [(0.0, 0.0), (0.3, -0.2), (1.2, 0.4)])
    checks.append(at_most("k3_convolution_identity", "f * k3 = psi_a * h", defect, 1e-3))
    return checks


def term_algebra_suite(tol: float, seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    checks = []
    W = expansion_W(12)
    leading = W.principal[0]
    checks.append(holds("W_leading_monomial", "W = (1/2 pi) a^-1 e^-r S(r)",
                        leading.m == (-1, 0, 0) and leading.p == 1 and sympy.simplify(W.prefactor - 1 / (2 * sympy.pi)) == 0))
    checks.append(holds("W_series_coefficients", "S(r) = sum e^-2kr", all(c == 1 for c in leading.series.coefficients)))
    p = GroupPoint(0.0, 0.0, math.e ** 3)
    checks.append(at_most("W_series_value", "series against closed form", abs(evaluate(expansion_W(20), p) / kernel_W(p) - 1.0), 1e-10))
    try:
        evaluate(W, GroupPoint(0.0, 0.0, math.exp(0.5)))
        checks.append(holds("evaluate_inside_unit_ball", "expansions hold outside B_1", False))
    except OutOfDomainError:
        checks.append(holds("evaluate_inside_unit_ball", "expansions hold outside B_1", True))
    try:
        expansion_W(0)
        checks.append(holds("order_exhausted", "truncation order must be positive", False))
    except OrderExhaustedError:
        checks.append(holds("order_exhausted", "truncation order must be positive", True))

    X1W = derive(W, 1)
    term = X1W.principal[0]
    checks.append(holds("X1W_principal", "X_1 W = -(1/pi) a^-1 x1 e^-2r + Q",
                        len(X1W.principal) == 1 and term.m == (-1, 1, 0) and term.p == 2
                        and sympy.simplify(X1W.prefactor * term.coeff + 1 / sympy.pi) == 0))
    X0W = derive(W, 0)
    term = X0W.principal[0]
    checks.append(holds("X0W_principal", "X_0 W = -(1/pi) e^-2r + Q",
                        len(X0W.principal) == 1 and term.m == (0, 0, 0) and term.p == 2
                        and sympy.simplify(X0W.prefactor * term.coeff + 1 / sympy.pi) == 0))

    k00 = second_order_kernel(0, 0)
    checks.append(holds("alpha00_beta00", "alpha_00 = -2/pi, beta_00 = 4/pi",
                        sympy.simplify(k00.alpha + 2 / sympy.pi) == 0 and sympy.simplify(k00.beta - 4 / sympy.pi) == 0
                        and k00.n == (1, 0, 0)))

    nonzero, theta_ok, sound = True, True, True
    for i, j in PAIRS:
        second = second_order_kernel(i, j)
        third = third_derivative_X2(i, j)
        nonzero &= second.beta != 0 and sum(second.n) == 1 and (second.m is None or sum(second.m) == 0)
        theta_ok &= third.theta != 0 and sum(third.n) == 2
        theta_ok &= (third.h is None or sum(third.h) == 0) and all(e is None or sum(e) == 1 for e in (third.ell, third.m))
        for monomial in second.terms.q_bucket + third.terms.q_bucket:
            p_eff = monomial.effective_p
            sound &= classify_integrability(monomial.m, p_eff, Half.PLUS) and classify_integrability(monomial.m, p_eff, Half.MINUS)
    checks.append(holds("second_order_shapes", "beta_ij != 0, |m| = 0, |n| = 1", nonzero))
    checks.append(holds("third_order_shapes", "theta_ij != 0, |h| = 0, |l| = |m| = 1, |n| = 2", theta_ok))
    checks.append(holds("q_bucket_soundness", "remainders integrable on both halves", sound))

    k11, k22 = second_order_kernel(1, 1), second_order_kernel(2, 2)
    checks.append(holds("swap_symmetry", "k_22 is k_11 with x1 and x2 exchanged", k22.terms.describe() == k11.terms.swapped().describe()))

    S = ExpSeries.geometric(12)
    checks.append(holds("series_closure", "S * S is S-type, S' is R-type", (S * S).is_s_type and S.derivative().is_r_type))

    far = _points_in_shell(rng, 20, 3.0, 3.5, spread=2.5)
    worst = 0.0
    for i, j in PAIRS:
        try:
            worst = max(worst, check_kij_overlap(i, j, far, rtol=1e-4))
        except StrategyDisagreementError as e:
            worst = max(worst, e.relative_error)
    checks.append(at_most("engine_against_finite_differences", "series of k_ij against differences of X_j W", worst, 1e-4))

    p = GroupPoint(50.0, 50.0, 10.0)
    worst = 0.0
    for i, j in PAIRS:
        series = evaluate(third_derivative_X2(i, j).terms, p)

        def kij(q, i=i, j=j):
            return field_derivative(i, lambda s: first_derivative_W(j, s), q, h=1e-3, richardson=True)

        fd = field_derivative(2, kij, p, h=1e-3, richardson=True)
        worst = max(worst, abs(series - fd) / max(abs(fd), 1e-300))
    checks.append(at_most("third_order_against_finite_differences", "X_2 k_ij series at (50, 50, 10)", worst, 1e-3))
    return checks


INTEGRABILITY_CASES = [
    ((0, 0, 0), 2, Half.PLUS), ((0, 0, 0), 3, Half.PLUS), ((-1, 0, 0), 1, Half.PLUS), ((-1, 0, 0), 2, Half.PLUS),
    ((0, 2, 0), 3, Half.PLUS), ((-1, 2, 0), 4, Half.PLUS), ((0, 2, 0), 2, Half.PLUS), ((0, 1, 0), 4, Half.PLUS),
    ((1, 0, 0), 3, Half.PLUS), ((0, 0, 1), 4, Half.PLUS),
    ((-1, 0, 0), 1, Half.MINUS), ((-1, 0, 0), 2, Half.MINUS), ((0, 0, 0), 2, Half.MINUS), ((0, 0, 0), 1, Half.MINUS),
    ((0, 1, 0), 2, Half.MINUS), ((0, 2, 0), 2, Half.MINUS), ((-1, 2, 0), 3, Half.MINUS), ((0, 1, 1), 2, Half.MINUS),
    ((0, 3, 0), 3, Half.MINUS), ((1, 2, 0), 2, Half.MINUS),
]


def monomial_weight(m: Tuple[int, int, int], p: int) -> Callable:
    m0, m1, m2 = m

    def weight(x1, x2, a):
        r = np.asarray(radius(GroupPoint(x1, x2, a)))
        return np.abs(a ** m0 * x1 ** m1 * x2 ** m2) * np.exp(-p * r)

    return weight


def integrability_suite(tol: float, seed: int) -> List[CheckResult]:
    checks = []
    T_list = [math.exp(R) for R in (4.0, 8.0, 12.0, 16.0)]
    agreements = 0
    for m, p, half in INTEGRABILITY_CASES:
        region = ShellRegion("plus" if half is Half.PLUS else "minus", t_min=1.0)
        report = scan_tail(monomial_weight(m, p), region, T_list, tol=0.0, rel_tol=1e-4)
        predicted = classify_integrability(m, p, half)
        agree = predicted == (not report.is_unbounded)
        agreements += int(agree)
        checks.append(holds(f"integrability_{half.value}_{m}_{p}", "integrability conditions for x^m e^-pr", agree,
                            detail=f"predicted={'integrable' if predicted else 'divergent'} scan={report.model}"))
    checks.append(at_least("integrability_agreement", "classification matches every scan", agreements, len(INTEGRABILITY_CASES)))
    return checks


def cz_suite(tol: float, seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    checks = []
    R = standard_set()
    checks.append(holds("standard_set_admissible", "side attains the lower admissibility bound", is_cz_set(R)))
    checks.append(holds("small_side_rejected", "r >= 1 needs L >= a e^2r", not is_cz_set(CZSet(0.0, 0.0, 1.0, 1.0, 1.0))))
    checks.append(holds("left_translate_admissible", "left translation preserves CZ sets",
                        is_cz_set(R.left_translate(GroupPoint(3.0, -2.0, 7.5)))))

    s1 = build_kit("s1")
    evidence = validate_atom(s1.atom)
    checks.append(holds("s1_atom", "rho(R)^-1 (1_E - 1_E^sigma) is an atom", evidence.ok, detail=",".join(evidence.failures)))
    full = IndicatorAtom(R, ((1.0 / R.measure, TranslatedBox((-0.5 * R.L, -0.5 * R.L, 0.5), (0.5 * R.L, 0.5 * R.L, 2.0))),))
    checks.append(holds("mean_zero_required", "1_R / rho(R) is not an atom", validate_atom(full).failures == ["mean_zero"]))
    checks.append(holds("sup_bound_required", "twice an atom is not an atom", "sup_norm" in validate_atom(s1.atom.scaled(2.0)).failures))

    shifted = s1.block.translated(GroupPoint(0.0, s1.shift, 1.0))
    y = rng.uniform(size=(3, 10000))
    b = 1.0 + y[2]
    overlap = s1.block.contains(-0.5 + y[0], -0.25 + 0.25 * y[1] + b * s1.shift, b)
    checks.append(at_most("s1_blocks_disjoint", "E and E^sigma are disjoint", int(np.sum(overlap)), 0))
    checks.append(holds("s1_shift_box", "E^sigma = E exp(sigma X_2)", shifted.shift == (0.0, 0.25, 1.0)))

    s0 = build_kit("s0")
    A = s0.params["A"]
    column = s0.regions["column"]
    checks.append(holds("s0_column_membership", "column contains (0, 0, 2A) and not (2A, 0, 2A)",
                        bool(column.contains(0.0, 0.0, 2 * A)) and not bool(column.contains(2 * A, 0.0, 2 * A))))
    evidence = validate_atom(s0.atom)
    checks.append(holds("s0_atom", "rho(R)^-1 (1_F - 1_F^sigma) is an atom", evidence.ok, detail=",".join(evidence.failures)))

    sij = build_kit("sij", i=0, j=0)
    evidence = validate_atom(sij.atom)
    checks.append(holds("s00_atom", "cone atom is an atom", evidence.ok, detail=",".join(evidence.failures)))

    for kit in (s1, s0, sij):
        name = kit.kind.lower()
        checks.append(at_most(f"{name}_nesting", "nested regions", check_nesting(kit, 10000, seed), 0))
        checks.append(at_most(f"{name}_block_inclusion", "core * block^-1 * block inside middle region", check_inclusion(kit, 10000, seed), 0))
        violations, ratio = check_translation(kit, 10000, seed)
        checks.append(at_most(f"{name}_shift_inclusion", "middle * exp(s X) inside outer region", violations, 0))
        checks.append(at_least(f"{name}_weight_under_shift", "weight comparable under the shift", ratio, 0.25))
    for kit in (s1, s0):
        constant, nonpositive = pointwise_lower_bound(kit, 10000, seed)
        checks.append(check(f"{kit.kind.lower()}_pointwise_lower_bound", "kernel >= c * weight on the outer region", constant, 0.0,
                            constant > 0.0 and nonpositive == 0, detail=f"{nonpositive} nonpositive samples"))

    defect = mean_value_defect(s1, probe_points(s1, 20, seed), tol=1e-9)
    checks.append(at_most("s1_mean_value_identity", "S_1 a as a kernel integral and as a segment mean", defect, 1e-6))

    psi = psi_ij(0, 0)
    family = build_hN(1, None, 4, 2, seed, choose_bump(psi))
    dx = family.scale(family.N) / 8.0
    edge = dx * math.ceil((family.L + 0.5) / dx)
    grid = family.grid(dx, (-edge, edge, -edge, edge))
    xs, ys = grid.coordinates()
    outside = (np.abs(xs) > family.L) | (np.abs(ys) > family.L)
    checks.append(at_most("hN_support", "h_N supported in [-L, L]^2", float(np.max(np.abs(grid.values[outside]), initial=0.0)), 0.0))
    checks.append(at_most("hN_mean_zero", "each translate of phi has mean zero", abs(grid.integral()), 1e-8))
    expected = sum((2 * math.floor((2 ** (2 * n) * family.L - 1) / 4) + 1) ** 2 for n in range(2))
    checks.append(holds("hN_term_count", "sum_n (2 floor((2^qn L - 1) / p) + 1)^2", family.term_count() == expected,
                        detail=f"{family.term_count()} terms"))

    terms = list(family.atom_terms(limit=3))
    lifted = lift_to_H1(terms)
    atoms_ok = all(validate_atom(atom).ok for _, atom in lifted.terms)
    checks.append(holds("lifted_atoms", "lifted pieces are atoms", atoms_ok))
    center = terms[0][1].center
    point = (center[0] + 0.1 * terms[0][1].side, center[1] - 0.2 * terms[0][1].side)
    planar = sum(lam * float(b(*point)) for lam, b in terms)
    checks.append(at_most("vertical_integral", "int f(x, a) da / a = h(x)", abs(lifted.vertical_integral(*point) - planar), 1e-9 * max(1.0, abs(planar))))
    big = CZSet(0.0, 0.0, math.e ** 4, 1.0, 2.0)
    checks.append(holds("lift_regime_r2", "side e^4 lifts with r = 2", is_cz_set(big)))
    return checks


SUITES: Dict[str, Callable[[float, int], List[CheckResult]]] = {
    "metric": metric_suite,
    "heat": heat_suite,
    "kernels": kernels_suite,
    "term-algebra": term_algebra_suite,
    "integrability": integrability_suite,
    "cz": cz_suite,
}
