import json

from src.experiments import cli
from src.experiments.cli import build_parser, main
from src.experiments.reports import ExperimentReport


def test_expand_prints_json(capsys):
    assert main(["expand", "--i", "1", "--j", "1", "--order", "6"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["indices"] == [1, 1]
    assert payload["order"] == 6


def test_expand_writes_file(tmp_path):
    out = tmp_path / "k00.json"
    assert main(["expand", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["indices"] == [0, 0]


def test_unknown_suite_is_an_input_error():
    assert main(["verify", "nope"]) == 2


def test_missing_command_is_an_input_error():
    assert main([]) == 2


def test_help_exits_cleanly():
    assert main(["--help"]) == 0


def test_grid_flag_sets_patch_count():
    args = build_parser().parse_args(["hn", "--grid", "8", "--n-list", "2,3"])
    assert args.patches == 8
    assert args.n_list == [2, 3]


def test_invalid_config_is_an_input_error(monkeypatch):
    monkeypatch.setenv("RIESZLAB_TOL", "5")
    assert main(["expand"]) == 2


def test_report_exit_code_is_returned(monkeypatch, tmp_path):
    failed = ExperimentReport(id="verify-metric", failed_stage="metric", error="QuadratureError: budget", error_exit_code=3)
    monkeypatch.setattr(cli, "run_verify", lambda suite, tol, seed: failed)
    out = tmp_path / "report.json"
    assert main(["verify", "metric", "--out", str(out)]) == 3
    assert json.loads(out.read_text())["failed_stage"] == "metric"


def test_unexpected_failure_returns_one(monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli, "run_bounded", boom)
    assert main(["bounded", "hormander"]) == 1


def test_unbounded_s0_writes_report_and_csv(tmp_path):
    out = tmp_path / "s0.json"
    curve = tmp_path / "s0.csv"
    assert main(["unbounded", "s0", "--samples", "2000", "--out", str(out), "--csv", str(curve)]) == 0
    assert json.loads(out.read_text())["passed"] is True
    lines = curve.read_text().strip().splitlines()
    assert len(lines) == 5


def test_relative_out_lands_in_output_dir(monkeypatch, tmp_path):
    monkeypatch.setenv("RIESZLAB_OUTPUT_DIR", str(tmp_path / "reports"))
    assert main(["expand", "--out", "k00.json"]) == 0
    assert (tmp_path / "reports" / "k00.json").exists()
