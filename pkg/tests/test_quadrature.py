import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.group.group_core import GroupPoint, radius
from src.quadrature.quadrature import (
    Box,
    GridFunction,
    ScanReport,
    ShellRegion,
    convolve2d,
    fit_growth,
    integrate,
    integrate_region,
    kernel_gradient,
    kernel_radius,
    scan_tail,
)
from src.utils.errors import GridTooCoarseError, InvalidParameterError, QuadratureError


def gaussian(x1, x2):
    return np.exp(-(np.asarray(x1) ** 2 + np.asarray(x2) ** 2))


def test_box_validation():
    with pytest.raises(InvalidParameterError):
        Box((0.0, 0.0, 1.0), (1.0, 1.0, 0.5))
    with pytest.raises(InvalidParameterError):
        Box((0.0, 0.0, 0.0), (1.0, 1.0, math.inf))
    box = Box.truncated((0.0, 0.0, 0.0), (1.0, 1.0, math.inf), 3.0)
    assert box.upper[2] == 3.0
    assert box.measure == 3.0


def test_polynomial_is_exact():
    box = Box((0.0, -1.0, 0.0), (2.0, 1.0, 1.0))
    result = integrate(lambda x1, x2, u: x1 ** 3 * x2 ** 2 * u, box, tol=1e-12)
    assert_allclose(result.value, 4.0 * (2.0 / 3.0) * 0.5, rtol=1e-13)
    assert result.panels == 1


def test_unbounded_horizontal_extent():
    box = Box((-math.inf, -math.inf, 0.0), (math.inf, math.inf, 1.0))
    result = integrate(lambda x1, x2, u: gaussian(x1, x2), box, tol=1e-10)
    assert_allclose(result.value, math.pi, rtol=1e-8)


def test_half_line_extent():
    box = Box((0.0, -math.inf, 0.0), (math.inf, 2.0, 1.0))
    result = integrate(lambda x1, x2, u: np.exp(-x1 * x1 - (x2 - 2.0) ** 2), box, tol=1e-10)
    assert_allclose(result.value, 0.25 * math.pi, rtol=1e-8)


def test_budget_exhaustion():
    box = Box((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))

    def rough(x1, x2, u):
        return np.sqrt(np.abs(x1 - 1.0 / 3.0))

    with pytest.raises(QuadratureError) as info:
        integrate(rough, box, tol=1e-14, max_panels=8)
    assert info.value.value is not None
    partial = integrate(rough, box, tol=1e-14, max_panels=8, strict=False)
    assert partial.panels == 1
    assert partial.error > 1e-14


def test_tolerance_is_required():
    with pytest.raises(InvalidParameterError):
        integrate(lambda x1, x2, u: x1, Box((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)), tol=0.0, rel_tol=0.0)


def test_worker_count_does_not_change_results(monkeypatch):
    box = Box((-3.0, -3.0, -1.0), (3.0, 3.0, 1.0))

    def f(x1, x2, u):
        return np.exp(-x1 * x1 - 2.0 * x2 * x2) * np.cos(u) / (1.0 + np.abs(x1 - 0.1))

    serial = integrate(f, box, tol=1e-9)
    monkeypatch.setenv("RIESZLAB_THREADS", "4")
    parallel = integrate(f, box, tol=1e-9, workers=4)
    assert_allclose(parallel.value, serial.value, rtol=1e-14)


def test_shell_region_gives_ball_volumes():
    R = 1.5
    result = integrate_region(lambda x1, x2, a: np.ones_like(a), ShellRegion("both"), 0.0, R, tol=1e-10)
    assert_allclose(result.value, 2.0 * math.pi * (math.sinh(R) * math.cosh(R) - R), rtol=1e-8)
    plus = integrate_region(lambda x1, x2, a: np.ones_like(a), ShellRegion("plus"), 0.0, R, tol=1e-10)
    minus = integrate_region(lambda x1, x2, a: np.ones_like(a), ShellRegion("minus"), 0.0, R, tol=1e-10)
    assert_allclose(plus.value + minus.value, result.value, rtol=1e-8)


def test_shell_chart_lands_on_its_shell():
    s1, s2 = np.meshgrid(np.linspace(0.05, 0.95, 7), np.linspace(0.0, 1.0, 5))
    t = np.full_like(s1, 2.5)
    x1, x2, a, _ = ShellRegion("both").chart(s1, s2, t)
    assert_allclose(radius(GroupPoint(x1, x2, a)), 2.5, rtol=1e-10)
    with pytest.raises(InvalidParameterError):
        ShellRegion("sideways")


def test_fit_growth_models():
    T = [1e2, 1e4, 1e8, 1e16]
    model, params, _, _ = fit_growth(T, [1.0, 1.0, 1.0, 1.0])
    assert model == "bounded"
    model, params, _, _ = fit_growth(T, [2.0 * math.log(t) for t in T])
    assert model == "log"
    assert_allclose(params["B"], 2.0, rtol=1e-10)
    model, params, _, _ = fit_growth(T, [3.0 * math.log(math.log(t)) for t in T])
    assert model == "loglog"
    assert_allclose(params["B"], 3.0, rtol=1e-10)


def test_scan_tail_separates_integrable_from_divergent():
    region = ShellRegion("plus", t_min=1.0)
    T = [math.exp(4.0), math.exp(8.0), math.exp(12.0)]

    def decay(p):
        return lambda x1, x2, a: np.exp(-p * np.asarray(radius(GroupPoint(x1, x2, a))))

    integrable = scan_tail(decay(3.0), region, T, tol=0.0, rel_tol=1e-6)
    divergent = scan_tail(decay(2.0), region, T, tol=0.0, rel_tol=1e-6)
    assert not integrable.is_unbounded
    assert divergent.is_unbounded
    assert divergent.model == "log"
    assert all(b > a for a, b in zip(divergent.I, divergent.I[1:]))


def test_scan_tail_validates_bounds():
    region = ShellRegion("plus", t_min=1.0)
    with pytest.raises(InvalidParameterError):
        scan_tail(lambda x1, x2, a: a, region, [10.0, 100.0])
    with pytest.raises(InvalidParameterError):
        scan_tail(lambda x1, x2, a: a, region, [2.0, 100.0, 1000.0])
    with pytest.raises(InvalidParameterError):
        scan_tail(lambda x1, x2, a: a, region, [100.0, 10.0, 1000.0])


def test_scan_report_exports():
    report = ScanReport([1e2, 1e4, 1e8], [1.0, 2.0, 3.0], [0.0, 0.0, 0.0], "log", {"A": 0.0, "B": 0.5}, 0.01)
    lines = report.to_csv().splitlines()
    assert lines[0] == "T,I,model,params"
    assert len(lines) == 4
    assert report.slope == 0.5
    assert report.to_dict()["model"] == "log"


def test_grid_function_storage(tmp_path):
    g = GridFunction.sample(lambda x, y: x + 2.0 * y, (0.0, 0.0), (1.0, 2.0), 0.25)
    assert g.values.shape == (9, 5)
    path, header = g.save(tmp_path / "grid.bin")
    assert header.exists()
    loaded = GridFunction.load(path)
    assert loaded.dx == g.dx
    assert loaded.origin == g.origin
    assert np.array_equal(loaded.values, g.values)


def test_kernel_radius_of_gaussian():
    # the L^1 tail of exp(-|x|^2) beyond r is exp(-r^2)
    r = kernel_radius(gaussian, tail_tol=1e-4)
    assert 3.0 < r < 3.2
    assert math.exp(-r * r) <= 1.1e-4


def power_law(x1, x2):
    return (1.0 + np.asarray(x1) ** 2 + np.asarray(x2) ** 2) ** -2


def test_kernel_radius_bounds_the_l1_tail_of_a_power_law():
    # for (1 + |x|^2)^-2 the relative L^1 tail beyond r is 1 / (1 + r^2)
    r = kernel_radius(power_law, tail_tol=1e-4)
    assert 98.0 < r < 102.0
    assert 1.0 / (1.0 + r * r) <= 1.05e-4


def test_kernel_radius_slow_decay():
    def cubic(x1, x2):
        return (1.0 + np.asarray(x1) ** 2 + np.asarray(x2) ** 2) ** -1.5

    # relative tail 1 / sqrt(1 + r^2)
    r = kernel_radius(cubic, tail_tol=1e-3)
    assert 950.0 < r < 1050.0
    # past the sampled radii the power law is solved for r
    assert 0.95e6 < kernel_radius(cubic, tail_tol=1e-6) < 1.05e6
    with pytest.raises(InvalidParameterError):
        kernel_radius(lambda x1, x2: 1.0 / (1.0 + np.asarray(x1) ** 2 + np.asarray(x2) ** 2))


def test_kernel_gradient():
    grad = kernel_gradient(gaussian)
    x1, x2 = np.array([0.3, 1.0, 2.0]), np.array([-0.4, 0.5, 0.0])
    expected = 2.0 * np.hypot(x1, x2) * np.exp(-x1 * x1 - x2 * x2)
    assert_allclose(grad(x1, x2), expected, rtol=1e-6)
    # |grad (1 + |x|^2)^-2| decays like |x|^-5, so its tail radius is far smaller
    assert kernel_radius(kernel_gradient(power_law), 1e-3) < kernel_radius(power_law, 1e-3) / 2.0


def test_convolution_with_constant():
    g = GridFunction.sample(lambda x, y: np.ones_like(x), (-6.0, -6.0), (6.0, 6.0), 0.05)
    out = convolve2d(gaussian, g, 0.5, tail_tol=1e-6)
    center = out.values[120, 120]
    assert_allclose(center, math.pi, rtol=1e-3)
    with pytest.raises(GridTooCoarseError):
        convolve2d(gaussian, g, 0.05)
    with pytest.raises(InvalidParameterError):
        convolve2d(gaussian, g, -1.0)


def test_convolution_uses_the_kernel_across_the_whole_grid():
    g = GridFunction.sample(lambda x, y: np.ones_like(x), (-1.0, -1.0), (1.0, 1.0), 0.05)
    a = 0.5
    out = convolve2d(power_law, g, a, tail_tol=1e-4)
    X, Y = g.coordinates()
    expected = math.fsum((power_law(X / a, Y / a) / (a * a)).ravel()) * g.dx * g.dx
    assert_allclose(out.values[20, 20], expected, rtol=1e-10)


def test_convolution_refuses_to_truncate_the_kernel():
    g = GridFunction.sample(lambda x, y: np.ones_like(x), (-1.0, -1.0), (1.0, 1.0), 0.01)
    with pytest.raises(InvalidParameterError):
        convolve2d(power_law, g, 0.5, tail_tol=1e-4, max_kernel_points=101)
