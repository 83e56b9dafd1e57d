"""
Tests for the CLI interface.
"""

import json

import pytest
from click.testing import CliRunner

from soliton_lab import __version__
from soliton_lab.cli import cli


@pytest.fixture
def runner():
    """Provide a Click CliRunner for testing."""
    return CliRunner()


@pytest.fixture
def report_dir(runner, tmp_path):
    """A finished cross-section run."""
    out = tmp_path / "cross"
    result = runner.invoke(cli, ["run", "cross-section", "--out", str(out)])
    assert result.exit_code == 0
    return out


# ============================================================
# Tests: global options and list
# ============================================================

def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_list(runner):
    result = runner.invoke(cli, ["list"])
    assert result.exit_code == 0
    lines = result.output.strip().splitlines()
    assert len(lines) == 15
    assert lines[0].startswith("bowl-ode")
    assert lines[-1].startswith("entropy-table")


# ============================================================
# Tests: run command
# ============================================================

def test_run_success(runner, tmp_path):
    """Test a passing experiment writes its outputs."""
    out = tmp_path / "cross"
    result = runner.invoke(cli, ["run", "cross-section", "--out", str(out), "--threads", "1"])
    assert result.exit_code == 0
    assert "✓ All" in result.output
    assert (out / "report.json").exists()
    assert (out / "manifest.json").exists()
    assert (out / "cross_section.csv").exists()


@pytest.mark.parametrize("override", [
    ["--etas", "0.01,0.03"],
    ["--etas=0.01,0.03"],
    ["etas=0.01,0.03"],
])
def test_run_override_forms(runner, tmp_path, override):
    out = tmp_path / "cross"
    result = runner.invoke(cli, ["run", "cross-section", "--out", str(out), *override])
    assert result.exit_code == 0
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["params"]["etas"] == [0.01, 0.03]


def test_run_config_file(runner, tmp_path):
    """Command-line overrides win over the config file."""
    cfg = tmp_path / "cross.cfg"
    cfg.write_text("etas = 0.01, 0.02\n", encoding="utf-8")
    out = tmp_path / "cross"
    result = runner.invoke(cli, ["run", "cross-section", "--config", str(cfg),
                                 "--out", str(out), "--etas", "0.02,0.04"])
    assert result.exit_code == 0
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["params"]["etas"] == [0.02, 0.04]


def test_run_unknown_experiment(runner):
    result = runner.invoke(cli, ["run", "spiral"])
    assert result.exit_code == 3
    assert "unknown experiment 'spiral'" in result.output


def test_run_bad_override(runner):
    result = runner.invoke(cli, ["run", "cross-section", "--colour", "3"])
    assert result.exit_code == 3
    assert "Validation error" in result.output
    assert "unknown parameter 'colour'" in result.output


def test_run_dangling_option(runner):
    result = runner.invoke(cli, ["run", "cross-section", "--etas"])
    assert result.exit_code == 3
    assert "missing value" in result.output


def test_run_missing_config(runner, tmp_path):
    result = runner.invoke(cli, ["run", "cross-section", "--config", str(tmp_path / "none.cfg")])
    assert result.exit_code == 2
    assert "not found" in result.output


def test_run_malformed_config(runner, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("etas\n", encoding="utf-8")
    result = runner.invoke(cli, ["run", "cross-section", "--config", str(cfg)])
    assert result.exit_code == 3
    assert "bad.cfg:1" in result.output


def test_run_out_is_a_file(runner, tmp_path):
    target = tmp_path / "taken"
    target.write_text("x")
    result = runner.invoke(cli, ["run", "cross-section", "--out", str(target)])
    assert result.exit_code == 2


def test_run_all_subset(runner, tmp_path):
    result = runner.invoke(cli, ["run-all", "--only", "cross-section", "--only", "kernel-flux",
                                 "--out", str(tmp_path), "--threads", "2"])
    assert result.exit_code == 0
    assert "✓ cross-section" in result.output
    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert summary["passed"] is True


def test_run_all_unknown(runner):
    result = runner.invoke(cli, ["run-all", "--only", "spiral"])
    assert result.exit_code == 3


# ============================================================
# Tests: export command
# ============================================================

def test_export_default_output(runner, report_dir):
    result = runner.invoke(cli, ["export", str(report_dir)])
    assert result.exit_code == 0
    assert "✓ Exported 2 sheets" in result.output
    assert (report_dir / "report.xlsx").exists()


def test_export_output_exists_no_force(runner, report_dir, tmp_path):
    output_file = tmp_path / "out.xlsx"
    output_file.write_text("existing content")
    result = runner.invoke(cli, ["export", str(report_dir), "-o", str(output_file)])
    assert result.exit_code == 2
    assert "already exists" in result.output


def test_export_output_exists_with_force(runner, report_dir, tmp_path):
    output_file = tmp_path / "out.xlsx"
    output_file.write_text("existing content")
    result = runner.invoke(cli, ["export", str(report_dir), "-o", str(output_file), "--force"])
    assert result.exit_code == 0
    assert "✓ Exported" in result.output


def test_export_missing_report(runner, tmp_path):
    result = runner.invoke(cli, ["export", str(tmp_path), "-o", str(tmp_path / "x.xlsx")])
    assert result.exit_code == 2
    assert "not found" in result.output


def test_export_malformed_report(runner, tmp_path):
    (tmp_path / "report.json").write_text("{}", encoding="utf-8")
    result = runner.invoke(cli, ["export", str(tmp_path), "-o", str(tmp_path / "x.xlsx")])
    assert result.exit_code == 3
    assert "malformed report" in result.output


# ============================================================
# Tests: validate command
# ============================================================

def test_validate_valid_file(runner):
    with runner.isolated_filesystem():
        with open("ok.cfg", "w", encoding="utf-8") as f:
            f.write("eps = 0.001\nL_values = 1, 10\n")
        result = runner.invoke(cli, ["validate", "ok.cfg", "-e", "alignment-scaling"])
        assert result.exit_code == 0
        assert "✓ ok.cfg: Valid" in result.output


def test_validate_invalid_file(runner):
    with runner.isolated_filesystem():
        with open("bad.cfg", "w", encoding="utf-8") as f:
            f.write("eps = small\n")
        result = runner.invoke(cli, ["validate", "bad.cfg", "-e", "alignment-scaling"])
        assert result.exit_code == 3
        assert "✗ bad.cfg: Invalid" in result.output
        assert "expects float" in result.output


def test_validate_missing_file(runner):
    with runner.isolated_filesystem():
        result = runner.invoke(cli, ["validate", "none.cfg", "-e", "diameters"])
        assert result.exit_code == 2
        assert "Invalid" in result.output


def test_validate_unknown_experiment(runner):
    with runner.isolated_filesystem():
        with open("ok.cfg", "w", encoding="utf-8") as f:
            f.write("eps = 0.001\n")
        result = runner.invoke(cli, ["validate", "ok.cfg", "-e", "spiral"])
        assert result.exit_code == 3


def test_validate_json_format(runner):
    """Test JSON output for several files."""
    with runner.isolated_filesystem():
        with open("ok.cfg", "w", encoding="utf-8") as f:
            f.write("trials = 10\n")
        with open("bad.cfg", "w", encoding="utf-8") as f:
            f.write("trials = 0\n")
        result = runner.invoke(cli, ["validate", "ok.cfg", "bad.cfg", "-e", "diameters",
                                     "--format", "json"])
        assert result.exit_code == 3
        data = json.loads(result.output)
        assert data["experiment"] == "diameters"
        assert data["summary"] == {"total": 2, "valid": 1, "invalid": 1}
        assert data["results"][1]["errors"] == ["parameter 'trials' must be >= 1, got 0"]
