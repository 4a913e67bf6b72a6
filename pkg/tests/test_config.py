"""Tests for configuration module."""

import pytest
import os
import sys
import json
import hashlib
from pathlib import Path

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from config import (
    DEFAULT_RAW_PULSE_LIMIT,
    Config,
    Scenario,
    SimulationConfig,
    load_scenario,
    scenario_from_dict,
)
from core.domain import Polarization
from core.errors import ConfigurationError, ParseError

SCENARIOS = Path(__file__).parent.parent / "scenarios"
ENV_KEYS = ["QKDSIM_OUT_DIR", "QKDSIM_RAW_PULSE_LIMIT", "QKDSIM_CALIBRATION_DIR"]


@pytest.fixture
def clean_env():
    """Remove QKDSIM_* variables for the duration of a test."""
    old_env = {key: os.environ.pop(key, None) for key in ENV_KEYS}
    yield
    for key in ENV_KEYS:
        os.environ.pop(key, None)
        if old_env[key] is not None:
            os.environ[key] = old_env[key]


class TestConfig:
    """Test environment configuration."""

    @pytest.mark.unit
    def test_config_defaults(self, clean_env, tmp_path):
        """Test default configuration values."""
        config = Config(env_path=str(tmp_path / "missing.env"))

        assert config.raw_pulse_limit == DEFAULT_RAW_PULSE_LIMIT
        assert Path(config.out_dir).name == "runs"
        assert Path(config.calibration_dir).name == "calibration_runs"

    @pytest.mark.unit
    def test_config_from_env(self, clean_env, tmp_path):
        """Test configuration from environment variables."""
        os.environ["QKDSIM_OUT_DIR"] = str(tmp_path / "out")
        os.environ["QKDSIM_RAW_PULSE_LIMIT"] = "1000"

        config = Config(env_path=str(tmp_path / "missing.env"))

        assert config.out_dir == str(tmp_path / "out")
        assert config.raw_pulse_limit == 1000

    @pytest.mark.unit
    def test_config_from_env_file(self, clean_env, tmp_path):
        """Test values read from a .env file."""
        env_file = tmp_path / ".env"
        env_file.write_text("QKDSIM_RAW_PULSE_LIMIT=42\n")

        config = Config(env_path=str(env_file))

        assert config.raw_pulse_limit == 42

    @pytest.mark.unit
    def test_bad_pulse_limit(self, clean_env, tmp_path):
        """Test a non-integer limit is a configuration error."""
        os.environ["QKDSIM_RAW_PULSE_LIMIT"] = "lots"

        with pytest.raises(ConfigurationError):
            Config(env_path=str(tmp_path / "missing.env"))


class TestLoadScenario:
    """Test scenario files."""

    @pytest.mark.unit
    def test_load_ideal(self):
        """Test the shipped ideal scenario loads with its file hash."""
        path = SCENARIOS / "ideal.json"
        scenario, digest = load_scenario(path)

        assert scenario.seed == 1
        assert scenario.session_id == "ideal"
        assert scenario.detector.efficiency == (1.0, 1.0, 1.0, 1.0)
        assert scenario.simulation.max_blocks == 1
        assert digest == hashlib.sha256(path.read_bytes()).hexdigest()

    @pytest.mark.unit
    def test_calibration_file_relative_to_scenario(self):
        """Test calibration_file resolves next to the scenario."""
        scenario, _ = load_scenario(SCENARIOS / "nominal_pass.json")

        assert scenario.calibration.diodes[Polarization.V].drive_current_ma == 41.5

    @pytest.mark.unit
    def test_all_shipped_scenarios_load(self):
        """Test every scenario in scenarios/ validates."""
        for path in sorted(SCENARIOS.glob("*.json")):
            if path.name.startswith("diode_calibration"):
                continue
            scenario, _ = load_scenario(path)
            assert isinstance(scenario, Scenario)

    @pytest.mark.unit
    def test_malformed_json_names_line_and_column(self, tmp_path):
        """Test a JSON syntax error becomes a ParseError with position."""
        path = tmp_path / "bad.json"
        path.write_text('{\n  "seed": 1,\n  "source": {,}\n}\n')

        with pytest.raises(ParseError) as exc_info:
            load_scenario(path)

        assert exc_info.value.line == 3
        assert exc_info.value.column > 1
        assert str(path) in str(exc_info.value)

    @pytest.mark.unit
    def test_unknown_top_level_key(self):
        """Test unknown scenario keys are refused."""
        with pytest.raises(ConfigurationError, match="unknown scenario keys"):
            scenario_from_dict({"seed": 1, "sorce": {}})

    @pytest.mark.unit
    def test_unknown_section_key(self):
        """Test unknown keys inside a section are refused."""
        with pytest.raises(ConfigurationError, match="unknown detector keys"):
            scenario_from_dict({"seed": 1, "detector": {"efficency": 0.5}})

    @pytest.mark.unit
    def test_missing_seed(self):
        """Test a scenario needs a seed."""
        with pytest.raises(ConfigurationError, match="seed"):
            scenario_from_dict({"session_id": "x"})

    @pytest.mark.unit
    def test_invalid_value_surfaces_before_simulation(self):
        """Test invalid physics values fail at load time."""
        with pytest.raises(ConfigurationError):
            scenario_from_dict({"seed": 1, "source": {"signal_mu": 0.2, "decoy_mu": 0.4}})

    @pytest.mark.unit
    def test_calibration_inline_and_file_conflict(self):
        """Test inline and referenced calibration tables cannot both be given."""
        with pytest.raises(ConfigurationError, match="either"):
            scenario_from_dict({"seed": 1, "calibration": {}, "calibration_file": "x.json"})

    @pytest.mark.unit
    def test_to_dict_round_trip(self):
        """Test a scenario re-serialises into an equal scenario."""
        scenario, _ = load_scenario(SCENARIOS / "nominal_pass.json")

        data = json.loads(json.dumps(scenario.to_dict()))

        assert scenario_from_dict(data) == scenario

    @pytest.mark.unit
    def test_with_seed(self):
        """Test overriding the seed leaves the rest unchanged."""
        scenario, _ = load_scenario(SCENARIOS / "ideal.json")

        other = scenario.with_seed(99)

        assert other.seed == 99
        assert other.source == scenario.source


class TestSimulationConfig:
    """Test simulation sampling settings."""

    @pytest.mark.unit
    def test_defaults(self):
        """Test default block layout."""
        config = SimulationConfig()
        assert config.pulses_per_block == 100_000
        assert config.max_blocks is None

    @pytest.mark.unit
    def test_rejects_empty_blocks(self):
        """Test a block needs at least one pulse."""
        with pytest.raises(ConfigurationError):
            SimulationConfig(pulses_per_block=0)

    @pytest.mark.unit
    def test_from_dict_casts_integers(self):
        """Test JSON numbers become integers where needed."""
        config = SimulationConfig.from_dict({"pulses_per_block": 1000.0, "max_blocks": 2.0})
        assert config.pulses_per_block == 1000
        assert config.max_blocks == 2
