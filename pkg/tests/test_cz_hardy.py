import math

import numpy as np
import pytest
import sympy
from numpy.testing import assert_allclose

from src.group.group_core import GroupPoint, flow
from src.hardy.cz_hardy import (
    CZSet,
    IndicatorAtom,
    TranslatedBox,
    build_hN,
    build_kit,
    check_inclusion,
    check_nesting,
    check_translation,
    choose_bump,
    cone_polynomial,
    difference_atom,
    dilated_contains,
    dilated_measure,
    dilation_constant,
    distance_to_set,
    halves_atom,
    level_set_measure,
    lift_radius,
    lift_to_H1,
    norm_estimate,
    pointwise_lower_bound,
    region_weight,
    riesz_image,
    sign_table,
    standard_set,
    validate_atom,
)
from src.kernels.kernels import integral_kernel, psi_ij
from src.quadrature.quadrature import integrate, scan_tail
from src.utils.errors import GridTooCoarseError, InvalidParameterError


@pytest.fixture(scope="module")
def bump():
    return choose_bump(psi_ij(0, 0))


def test_standard_set_is_admissible_at_the_boundary():
    R = standard_set()
    assert R.is_admissible
    assert_allclose(R.L, math.e ** 2 * math.log(2.0))
    assert_allclose(R.heights, (0.5, 2.0))
    assert_allclose(R.measure, 2.0 * math.log(2.0) * R.L ** 2)
    assert not CZSet(0.0, 0.0, 0.999 * R.L, 1.0, math.log(2.0)).is_admissible


def test_cz_set_validation_and_translation():
    with pytest.raises(InvalidParameterError):
        CZSet(0.0, 0.0, -1.0, 1.0, 0.5)
    assert not CZSet(0.0, 0.0, 1.0, 1.0, 1.0).is_admissible
    assert CZSet(0.0, 0.0, math.e ** 3, 1.0, 1.0).is_admissible
    moved = standard_set().left_translate(GroupPoint(3.0, -2.0, 7.5))
    assert moved.is_admissible
    assert_allclose(moved.center.as_tuple(), (3.0, -2.0, 7.5))


def test_distance_to_set():
    R = standard_set()
    assert distance_to_set(R, 0.0, 0.0, 1.0) == 0.0
    assert_allclose(distance_to_set(R, 0.0, 0.0, 2.0 * math.e), 1.0, rtol=1e-12)
    assert_allclose(distance_to_set(R, 0.0, 0.0, 0.5 / math.e ** 2), 2.0, rtol=1e-12)
    outside = GroupPoint(np.array([0.0, 0.5 * R.L + 0.3]), np.array([0.0, 0.0]), np.array([2.0 * math.e, 1.0]))
    assert dilated_contains(R, outside).tolist() == [False, True]


def test_dilated_measure_against_sampling(rng):
    R = standard_set()
    margin = 2.0 * math.sinh(R.r) + 0.5
    half = 0.5 * R.L + margin
    lo, hi = math.log(R.a) - 2.0 * R.r, math.log(R.a) + 2.0 * R.r
    n = 200_000
    x1 = rng.uniform(-half, half, n)
    x2 = rng.uniform(-half, half, n)
    a = np.exp(rng.uniform(lo, hi, n))
    fraction = np.mean(dilated_contains(R, GroupPoint(x1, x2, a)))
    estimate = fraction * (2.0 * half) ** 2 * (hi - lo)
    assert_allclose(dilated_measure(R), estimate, rtol=0.03)
    ratio, reach = dilation_constant(R, n=4000, seed=1)
    assert ratio > 1.0
    assert 1.0 < reach < math.inf


def test_translated_boxes():
    box = TranslatedBox((-0.5, -0.25, 1.0), (0.5, 0.0, 2.0))
    assert_allclose(box.measure, 0.25 * math.log(2.0))
    shifted = box.translated(flow(2, 0.25))
    assert shifted.shift == (0.0, 0.25, 1.0)
    # a point of B at height 1.5 moves by 1.5 * 0.25 in x2
    assert bool(shifted.contains(0.0, -0.1 + 0.375, 1.5))
    assert not bool(shifted.contains(0.0, -0.1, 1.5))


def test_atom_conditions():
    R = standard_set()
    block = TranslatedBox((-0.5, -0.25, 1.0), (0.5, 0.0, 2.0))
    atom = difference_atom(R, block, flow(2, 0.25))
    evidence = validate_atom(atom)
    assert evidence.ok, evidence.failures
    assert abs(atom.integral()) <= 1e-15
    assert validate_atom(atom.scaled(2.0)).failures == ["sup_norm"]

    full = IndicatorAtom(R, ((1.0 / R.measure, TranslatedBox((-0.5 * R.L, -0.5 * R.L, 0.5), (0.5 * R.L, 0.5 * R.L, 2.0))),))
    assert validate_atom(full).failures == ["mean_zero"]

    leaking = difference_atom(R, TranslatedBox((-0.5, -0.25, 1.0), (0.5, 0.0, 4.0)), flow(2, 0.25))
    assert "support" in validate_atom(leaking).failures


@pytest.mark.parametrize("split", ["x1", "u"])
def test_halves_atoms(split):
    R = CZSet(0.0, 0.0, 1.5 * math.e ** 2 * 0.1, 1.0, 0.1)
    atom = halves_atom(R, split)
    evidence = validate_atom(atom)
    assert evidence.ok, evidence.failures
    assert_allclose(evidence.sup_norm, 1.0 / R.measure)
    with pytest.raises(InvalidParameterError):
        halves_atom(R, "x2")


@pytest.mark.parametrize("i", [1, 2])
@pytest.mark.parametrize("split", ["x1", "u"])
def test_riesz_image_matches_the_kernel_integral(i, split):
    atom = halves_atom(CZSet(0.0, 0.0, 1.0, 1.0, 0.3), split)
    x = GroupPoint(3.0, 1.0, 2.0)

    def kernel_integral(box):
        def f(y1, y2, u):
            return np.asarray(integral_kernel("R", x, GroupPoint(y1, y2, np.exp(u)), i))

        return integrate(f, box.log_box(), tol=0.0, rel_tol=1e-10).value

    expected = math.fsum(c * kernel_integral(box) for c, box in atom.pieces)
    assert_allclose(riesz_image(i, atom, x.x1, x.x2, x.a), expected, rtol=1e-6)


def test_riesz_image_is_odd_for_an_even_atom():
    atom = halves_atom(CZSet(0.0, 0.0, 1.0, 1.0, 0.3), "u")
    x1 = np.array([0.2, 0.7, 1.5, 4.0])
    x2 = np.array([0.1, -0.3, 0.8, 2.0])
    a = np.array([0.9, 1.2, 0.5, 3.0])
    image = riesz_image(1, atom, x1, x2, a)
    assert image.shape == (4,)
    assert np.all(image != 0.0)
    assert_allclose(riesz_image(1, atom, -x1, x2, a), -image, rtol=1e-10)


def test_riesz_image_scope():
    R = standard_set()
    with pytest.raises(InvalidParameterError):
        riesz_image(0, halves_atom(R, "x1"), 1.0, 1.0, 1.0)
    shifted = difference_atom(R, TranslatedBox((-0.5, -0.25, 1.0), (0.5, 0.0, 2.0)), flow(2, 0.25))
    with pytest.raises(InvalidParameterError):
        riesz_image(1, shifted, 1.0, 1.0, 1.0)


def test_s1_kit():
    kit = build_kit("s1")
    assert kit.kind == "S1"
    assert kit.region_order == ("cone", "inner_cone", "core_cone")
    assert kit.params["B2"] == 42.0
    assert_allclose(kit.params["core_slope"], 0.125 / 42.0 ** 2)
    assert validate_atom(kit.atom).ok
    assert check_nesting(kit, 5000, 0) == 0
    assert check_inclusion(kit, 5000, 0) == 0
    violations, ratio = check_translation(kit, 5000, 0)
    assert violations == 0 and ratio >= 0.25
    constant, nonpositive = pointwise_lower_bound(kit, 5000, 0)
    assert constant > 0.0 and nonpositive == 0


def test_s0_kit_and_its_divergence_rate():
    kit = build_kit("s0")
    column = kit.regions["column"]
    A = kit.params["A"]
    assert bool(column.contains(0.0, 0.0, 2 * A))
    assert not bool(column.contains(2 * A, 0.0, 2 * A))
    membership = region_weight(kit, GroupPoint(0.0, 0.0, 4 * A))
    assert membership.flags == {"column": True, "core_column": True}
    assert check_nesting(kit, 5000, 0) == 0
    assert check_inclusion(kit, 5000, 0) == 0

    report = scan_tail(kit.weight, kit.core, [1e2, 1e4, 1e8, 1e16], tol=0.0, rel_tol=1e-8)
    assert report.model == "loglog"
    assert_allclose(report.slope, math.pi / 64.0, rtol=0.05)
    exact = math.pi / 64.0 * (math.log(math.log(1e16)) - math.log(math.log(kit.core.floor)))
    assert_allclose(report.I[-1], exact, rtol=0.01)


def test_cone_polynomial_is_homogeneous_of_degree_six():
    P = cone_polynomial(0, 0)
    poly = sympy.Poly(P, *sympy.symbols("x1 x2 a", positive=True))
    assert poly.is_homogeneous
    assert poly.total_degree() == 6


def test_sij_kit():
    kit = build_kit("sij", i=0, j=0)
    eps = kit.params["eps"]
    assert 0.0 < eps <= 0.25
    assert_allclose(kit.params["delta"], eps / 16.0)
    assert_allclose(kit.params["core_slope"], eps * eps / 4.0)
    assert validate_atom(kit.atom).ok
    assert check_nesting(kit, 5000, 0) == 0
    assert check_inclusion(kit, 5000, 0) == 0


def test_unknown_kit():
    with pytest.raises(InvalidParameterError):
        build_kit("s7")


def test_bump_choice_for_radial_psi(bump):
    # psi_00 is radial, so every odd or saddle-shaped bump pairs to zero with it
    assert bump.name == "radial"
    assert abs(bump.mean) < 1e-10
    assert bump.psi_center != 0.0


def test_sign_table_is_deterministic():
    first = sign_table(7, 2, 20)
    assert first.shape == (41, 41)
    assert np.array_equal(first, sign_table.__wrapped__(7, 2, 20))
    assert set(np.unique(first)) <= {-1, 1}
    assert not np.array_equal(first, sign_table(8, 2, 20))
    assert not np.array_equal(first, sign_table(7, 3, 20))
    assert not first.flags.writeable


def test_family_signs_follow_the_table(bump):
    family = build_hN(2, None, 4, 2, 11, bump)
    kmax = family.kmax(0)
    assert kmax >= 1
    table = sign_table(11, 0, kmax)
    centre = float(np.sign(bump(0.0, 0.0)))
    # level 0 has unit scale; each term is centred at p * k
    for k1, k2 in ((0, 0), (kmax, -kmax), (-kmax, 0)):
        value = float(family.evaluate(4.0 * k1, 4.0 * k2, levels=0))
        assert np.sign(value) == centre * table[k1 + kmax, k2 + kmax]


def test_hN_family(bump):
    family = build_hN(2, None, 4, 2, 11, bump)
    assert_allclose(family.L, 1.05 * math.e ** 2)
    assert family.kmax(0) == math.floor((family.L - 1.0) / 4.0)
    assert family.term_count() == sum((2 * family.kmax(n) + 1) ** 2 for n in range(3))
    assert family.support_radius() <= family.L
    assert family.evaluate(family.L + 0.5, 0.0) == 0.0
    with pytest.raises(GridTooCoarseError):
        family.grid(dx=family.scale(2))
    with pytest.raises(InvalidParameterError):
        build_hN(3, 10.0, 4, 2, 0, bump)


def test_lift_to_H1(bump):
    assert_allclose(lift_radius(math.e ** 4), 2.0)
    assert_allclose(lift_radius(1.0), math.e ** -2)
    family = build_hN(1, None, 4, 2, 5, bump)
    terms = list(family.atom_terms(limit=3))
    assert len(terms) == 3
    lifted = lift_to_H1(terms)
    assert all(validate_atom(atom).ok for _, atom in lifted.terms)
    assert all(atom.support.is_admissible for _, atom in lifted.terms)
    lam, b = terms[0]
    point = (b.center[0] + 0.1 * b.side, b.center[1] - 0.2 * b.side)
    planar = sum(l * float(t(*point)) for l, t in terms)
    assert_allclose(lifted.vertical_integral(*point), planar, atol=1e-9 * max(1.0, abs(planar)))


def test_norm_estimate_is_reproducible(bump):
    family = build_hN(1, None, 4, 2, 3, bump)
    first = norm_estimate(family, patches=4, seed=2)
    assert first > 0.0
    assert first == norm_estimate(family, patches=4, seed=2)


@pytest.mark.slow
def test_level_set_measure_is_positive(bump):
    psi = psi_ij(0, 0)
    family = build_hN(1, None, 4, 2, 3, bump)
    estimate = level_set_measure(family, psi, 0.5 * abs(bump.psi_center), patches=2, heights=1, seed=0)
    assert len(estimate.per_level) == 2
    assert estimate.measure > 0.0
