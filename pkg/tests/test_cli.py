"""Tests for the command-line entry point."""

import pytest
import json
import os
import sys
from pathlib import Path

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

import run

ROOT = Path(__file__).parent.parent
SCENARIOS = ROOT / "scenarios"
FIXTURES = ROOT / "fixtures"


class TestSimulateCommand:
    """Test `simulate`."""

    @pytest.mark.integration
    def test_ideal_pass(self, tmp_path, capsys):
        """Test a clean pass exits 0 and prints its key summary."""
        code = run.main(["simulate", str(SCENARIOS / "ideal.json"), "--out", str(tmp_path)])

        assert code == 0
        assert "ideal: sifted" in capsys.readouterr().out
        assert (tmp_path / "report.json").exists()

    @pytest.mark.integration
    def test_seed_override(self, tmp_path):
        """Test --seed replaces the scenario seed."""
        run.main(["simulate", str(SCENARIOS / "ideal.json"), "--seed", "9", "--out", str(tmp_path)])

        assert json.loads((tmp_path / "report.json").read_text())["seed"] == 9

    @pytest.mark.integration
    def test_qber_abort_is_not_an_error(self, tmp_path, capsys):
        """Test an aborted session still exits 0."""
        code = run.main(["simulate", str(SCENARIOS / "eavesdropper.json"), "--out", str(tmp_path)])

        assert code == 0
        assert "aborted" in capsys.readouterr().out

    @pytest.mark.unit
    def test_missing_scenario(self, tmp_path, capsys):
        """Test a missing file is a one-line usage error."""
        code = run.main(["simulate", str(tmp_path / "nope.json"), "--out", str(tmp_path)])

        assert code == 1
        err = capsys.readouterr().err.strip().splitlines()
        assert err[-1].startswith("error E_CONFIG:")

    @pytest.mark.unit
    def test_malformed_scenario(self, tmp_path, capsys):
        """Test bad JSON names the file position."""
        path = tmp_path / "bad.json"
        path.write_text('{\n  "seed": 1,\n  "source": }\n')

        code = run.main(["simulate", str(path), "--out", str(tmp_path / "out")])

        err = capsys.readouterr().err
        assert code == 1
        assert "error E_PARSE:" in err
        assert f"{path}:3:" in err

    @pytest.mark.unit
    def test_invalid_value(self, tmp_path, capsys):
        """Test invalid configuration exits 1 before simulating."""
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"seed": 1, "source": {"signal_mu": 0.2, "decoy_mu": 0.4}}))

        code = run.main(["simulate", str(path), "--out", str(tmp_path / "out")])

        assert code == 1
        assert "error E_CONFIG:" in capsys.readouterr().err
        assert not (tmp_path / "out").exists()

    @pytest.mark.integration
    def test_thermal_fault(self, tmp_path, capsys):
        """Test a source beyond survival exits 2."""
        path = tmp_path / "hot.json"
        path.write_text(json.dumps({"seed": 1, "source": {"temperature_c": 95.0}}))

        code = run.main(["simulate", str(path), "--out", str(tmp_path / "out")])

        assert code == 2
        assert "error E_THERMAL:" in capsys.readouterr().err


class TestCalibrateCommand:
    """Test `calibrate`."""

    @pytest.mark.integration
    def test_divergence(self, tmp_path):
        """Test a calibration subcommand writes its report."""
        code = run.main(
            ["calibrate", "divergence", "--spots", str(FIXTURES / "spots_1mrad.txt"), "--out", str(tmp_path)]
        )

        assert code == 0
        report = json.loads((tmp_path / "divergence_report.json").read_text())
        assert report["x"]["divergence_rad"] == pytest.approx(1e-3)

    @pytest.mark.integration
    def test_params(self, tmp_path):
        """Test --param values reach the analysis."""
        code = run.main(
            [
                "calibrate",
                "roi",
                "--tags",
                str(FIXTURES / "tags_20mhz.txt"),
                "--param",
                "roi_offset_s=5e-9",
                "--out",
                str(tmp_path),
            ]
        )

        assert code == 0
        report = json.loads((tmp_path / "roi_report.json").read_text())
        assert report["counts"]["H"] == 2000

    @pytest.mark.integration
    def test_equalize_failure(self, tmp_path, capsys):
        """Test a failed equalisation exits 2 and keeps its report."""
        code = run.main(
            [
                "calibrate",
                "equalize",
                "--param",
                "max_iters=1",
                "--param",
                "target_rel_tol=1e-6",
                "--out",
                str(tmp_path),
            ]
        )

        assert code == 2
        assert "error E_CALIBRATION:" in capsys.readouterr().err
        assert (tmp_path / "equalize_report.json").exists()

    @pytest.mark.unit
    def test_bad_param(self, tmp_path, capsys):
        """Test a parameter without '=' is a usage error."""
        code = run.main(
            ["calibrate", "divergence", "--spots", str(FIXTURES / "spots_1mrad.txt"), "--param", "x", "--out", str(tmp_path)]
        )

        assert code == 1
        assert "key=value" in capsys.readouterr().err

    @pytest.mark.unit
    def test_unknown_subcommand(self, capsys):
        """Test argparse errors use the one-line format and exit 1."""
        with pytest.raises(SystemExit) as exc_info:
            run.main(["calibrate", "focus"])

        assert exc_info.value.code == 1
        assert capsys.readouterr().err.startswith("error E_USAGE:")


class TestReportCommand:
    """Test `report`."""

    @pytest.mark.integration
    def test_prints_stored_run(self, tmp_path, capsys):
        """Test a stored run prints its combined report and key rate."""
        run.main(["simulate", str(SCENARIOS / "ideal.json"), "--out", str(tmp_path)])
        capsys.readouterr()

        code = run.main(["report", str(tmp_path)])

        assert code == 0
        assert "key rate: secure" in capsys.readouterr().out

    @pytest.mark.unit
    def test_empty_directory(self, tmp_path, capsys):
        """Test a directory without a run is refused."""
        code = run.main(["report", str(tmp_path)])

        assert code == 1
        assert "combined_report.txt" in capsys.readouterr().err
