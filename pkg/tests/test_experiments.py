import json
import math

import numpy as np
import pytest

from src.experiments import runner
from src.experiments.reports import CheckResult, ExperimentReport, at_least, at_most, holds
from src.experiments.runner import _default_T, expand, run_bounded, run_hn, run_unbounded, run_verify
from src.experiments.suites import SUITES
from src.group.group_core import GroupPoint, radius
from src.hardy.cz_hardy import LevelSetEstimate, dilated_measure
from src.utils.errors import InvalidParameterError, QuadratureError


def test_check_result_drops_non_finite_values():
    result = CheckResult(name="x", anchor="a", value=float("nan"), bound=float("inf"), passed=False)
    assert result.value is None
    assert result.bound is None


def test_at_most_and_at_least():
    assert at_most("m", "a", 0.5, 1.0).passed
    assert not at_most("m", "a", 1.5, 1.0).passed
    assert not at_most("m", "a", math.nan, 1.0).passed
    assert at_least("l", "a", 2.0, 1.0).passed
    assert not at_least("l", "a", 0.0, 1.0).passed
    assert holds("h", "a", True).passed
    assert holds("h", "a", True).value is None


def test_report_exit_codes():
    report = ExperimentReport(id="r", checks=[holds("ok", "a", True)])
    assert report.passed and report.exit_code == 0
    report.checks.append(holds("bad", "a", False))
    assert report.exit_code == 1
    assert report.failing() == ["bad"]
    report.failed_stage = "scan"
    report.error_exit_code = 3
    assert report.exit_code == 3


def test_report_json_and_write(tmp_path):
    report = ExperimentReport(id="r", params={"T": [1e2, float("inf")]}, seed=7, checks=[holds("ok", "a", True)])
    payload = json.loads(report.to_json())
    assert payload["passed"] is True
    assert payload["params"]["T"] == [100.0, "inf"]
    path = report.write(tmp_path / "nested" / "report.json")
    assert json.loads(path.read_text())["seed"] == 7


def test_verify_rejects_unknown_suite():
    with pytest.raises(InvalidParameterError):
        run_verify("nope")


def test_verify_marks_failed_stage(monkeypatch):
    def exhausted(tol, seed):
        raise QuadratureError("panel budget exhausted")

    monkeypatch.setitem(SUITES, "metric", exhausted)
    report = run_verify("metric", tol=1e-6, seed=0)
    assert report.failed_stage == "metric"
    assert not report.passed
    assert report.exit_code == 3
    assert "QuadratureError" in report.error


def test_verify_metric_suite():
    report = run_verify("metric", tol=1e-6, seed=0)
    assert report.passed, report.failing()
    assert report.id == "verify-metric"


@pytest.mark.slow
@pytest.mark.parametrize("suite", sorted(SUITES))
def test_every_suite_passes(suite):
    report = run_verify(suite, tol=1e-6, seed=0)
    assert report.passed, (report.failed_stage, report.error, report.failing())


def test_default_truncation_bounds():
    assert _default_T("s0", None) == [1e2, 1e4, 1e8, 1e16]
    assert _default_T("s1", 1e10) == pytest.approx([1e2, 1e4, 1e8, 1e10])
    assert _default_T("sij", 1e3) == pytest.approx([1e2, 10 ** 2.5, 1e3])
    with pytest.raises(InvalidParameterError):
        _default_T("s1", 50.0)


def test_unbounded_rejects_unknown_kind():
    with pytest.raises(InvalidParameterError):
        run_unbounded("s7")


def test_unbounded_s0_scan():
    report = run_unbounded("s0", samples=2000, seed=0)
    assert report.passed, (report.failed_stage, report.error, report.failing())
    assert report.id == "unbounded-s0"
    scan = report.artifacts["scan"]
    assert scan["model"] == "loglog"
    assert len(scan["I"]) == 4
    names = [c.name for c in report.checks]
    assert "growth_slope" in names and "closed_form" in names


def test_unbounded_budget_exhaustion_fails_scan_stage():
    report = run_unbounded("s1", samples=500, seed=0, tol=1e-12, budget=8)
    assert report.failed_stage == "scan"
    assert report.exit_code == 3


def test_expand_k00():
    out = expand(0, 0)
    assert out["indices"] == [0, 0]
    assert out["psi"]["alpha"] == pytest.approx(-2.0 / math.pi)
    assert out["psi"]["beta"] == pytest.approx(4.0 / math.pi)
    assert out["order"] == runner.config.order
    json.dumps(out)


def test_bounded_rejects_unknown_check():
    with pytest.raises(InvalidParameterError):
        run_bounded("nope")


def test_hn_rejects_bad_inputs():
    with pytest.raises(InvalidParameterError):
        run_hn(N_list=[])
    with pytest.raises(InvalidParameterError):
        run_hn(N_list=[2], L_factor=1.0)


@pytest.mark.slow
def test_bounded_local_beta():
    report = run_bounded("local-beta", seed=0)
    assert report.passed, report.failing()


@pytest.mark.slow
def test_bounded_tij_global():
    report = run_bounded("tij-global", seed=0)
    assert report.passed, report.failing()


@pytest.mark.parametrize("name", ["hormander", "riesz-atoms"])
def test_bounded_budget_exhaustion_fails_the_check_stage(name):
    report = run_bounded(name, seed=0, budget=8)
    assert report.failed_stage == name
    assert not report.passed
    assert report.exit_code == 3
    assert "QuadratureError" in report.error


def test_riesz_atom_norms_come_from_the_image(monkeypatch):
    # with R_i a replaced by exp(-r^2), each norm is int exp(-r^2) d rho = pi^3/2 (e - 1)
    def image(i, atom, x1, x2, a):
        return np.exp(-np.asarray(radius(GroupPoint(x1, x2, a))) ** 2)

    monkeypatch.setattr(runner, "riesz_image", image)
    monkeypatch.setattr(runner, "hormander_integral", lambda *args, **kwargs: 0.0)
    checks, artifacts = runner._riesz_atoms(0, 20000, radii=(0.1,))
    expected = math.pi ** 1.5 * (math.e - 1.0)
    assert sorted(artifacts["norms"]) == ["r=0.1,split=u", "r=0.1,split=x1"]
    for value in artifacts["norms"].values():
        assert value == pytest.approx(expected, rel=5e-2)
    assert all(share < 1e-6 for share in artifacts["tail_share"].values())
    R = runner._set_at_scale(0.1)
    for value in artifacts["bounds"].values():
        assert value == pytest.approx(math.sqrt(dilated_measure(R) / R.measure))
    assert {c.name: c.passed for c in checks} == {
        "riesz_atoms_valid": True, "riesz_atoms_finite": True, "riesz_atoms_trend": True,
    }


@pytest.mark.slow
def test_riesz_atoms_at_one_scale():
    checks, artifacts = runner._riesz_atoms(0, 20000, radii=(0.1,))
    passed = {c.name: c.passed for c in checks}
    assert passed["riesz_atoms_valid"] and passed["riesz_atoms_finite"]
    norms = artifacts["norms"]
    assert all(0.0 < v < math.inf for v in norms.values())
    assert all(share < 0.5 for share in artifacts["tail_share"].values())
    assert set(artifacts["bounds"]) == set(norms)


@pytest.mark.slow
def test_hormander_at_two_scales():
    checks, artifacts = runner._hormander(0, 20000, radii=(0.1, 1.0))
    assert sorted(artifacts["maxima"]) == ["0.1", "1.0"]
    assert all(0.0 < v < math.inf for v in artifacts["maxima"].values())
    assert {c.name for c in checks} == {"hormander_trend", "hormander_finite"}


def test_level_set_truncation_is_recorded():
    assert "levels <= n" in LevelSetEstimate.truncation
    assert LevelSetEstimate(1.0, 0.0, [1.0]).truncation == LevelSetEstimate.truncation


@pytest.mark.slow
def test_hn_end_to_end():
    report = run_hn(N_list=[1, 2], draws=2, patches=2, heights=1, seed=0)
    assert report.failed_stage is None, report.error
    rows = report.artifacts["rows"]
    assert [row["N"] for row in rows] == [1, 2]
    assert [len(row["level_set_per_band"]) for row in rows] == [2, 3]
    assert all(row["level_set_measure"] > 0.0 and row["norm_median"] > 0.0 for row in rows)
    assert {c.name for c in report.checks} == {
        "level_ratio_positive", "level_ratio_trend", "norm_ratio_bounded", "implied_ratio_growth", "lifted_atoms",
    }
    assert report.params["level_set_truncation"] == LevelSetEstimate.truncation
