"""Tests for the quantum source and its diode calibration."""

import pytest
import os
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from core.domain import IntensityLabel, Polarization
from core.errors import ConfigurationError, TemperatureFault
from core.rng import RandomBitSource
from core.thermal import DriftTable
from transmitter import (
    DiodeCalibration,
    DiodeState,
    SourceConfig,
    TestPattern,
    TransmitterStage,
    apply_thermal_step,
    emit_test_pattern,
    generate_pulse_train,
    load_calibration,
    make_bench_measure,
    retune_currents,
    write_pulse_stream,
)

EXAMPLE_CALIBRATION = Path(__file__).parent.parent / "scenarios" / "diode_calibration.example.json"


@pytest.fixture
def source():
    """Default source settings."""
    return SourceConfig()


@pytest.fixture
def warm_calibration():
    """Calibration whose H diode loses 20% of its output at 40 C."""
    diodes = {p: DiodeState() for p in Polarization}
    diodes[Polarization.H] = DiodeState(
        coupling_efficiency=0.9,
        mu_scale=DriftTable((21.0, 40.0), (1.0, 0.8)),
        pol_rotation_deg=DriftTable((21.0, 40.0), (0.0, 3.0)),
    )
    return DiodeCalibration(diodes)


class TestSourceConfig:
    """Test source settings validation."""

    @pytest.mark.unit
    def test_defaults(self, source):
        """Test mission defaults."""
        assert source.pulse_rate_hz == 1e8
        assert source.pulse_period_s == pytest.approx(1e-8)
        assert [c.mean_photon_number for c in source.classes] == [0.8, 0.4, 0.0]

    @pytest.mark.unit
    def test_unknown_key(self):
        """Test unknown source keys are refused."""
        with pytest.raises(ConfigurationError, match="unknown source keys"):
            SourceConfig.from_dict({"pulse_rate": 1e8})

    @pytest.mark.unit
    def test_bad_probabilities(self):
        """Test probability vectors must sum to one."""
        with pytest.raises(ConfigurationError):
            SourceConfig(intensity_probs=(0.5, 0.5, 0.5))

    @pytest.mark.unit
    def test_from_dict_lists(self):
        """Test JSON lists become tuples."""
        cfg = SourceConfig.from_dict({"state_probs": [0.4, 0.4, 0.1, 0.1]})
        assert cfg.state_probs == (0.4, 0.4, 0.1, 0.1)


class TestDiodeCalibration:
    """Test calibration tables."""

    @pytest.mark.unit
    def test_coupling_range(self):
        """Test coupling efficiency above one is refused."""
        with pytest.raises(ConfigurationError):
            DiodeState(coupling_efficiency=1.03)

    @pytest.mark.unit
    def test_mu_scale_must_be_one_at_reference(self):
        """Test mu_scale is normalised at the reference temperature."""
        diodes = {p: DiodeState() for p in Polarization}
        diodes[Polarization.V] = DiodeState(mu_scale=DriftTable.constant(0.9))
        with pytest.raises(ConfigurationError, match="mu_scale"):
            DiodeCalibration(diodes)

    @pytest.mark.unit
    def test_missing_diode(self):
        """Test all four diodes are required."""
        with pytest.raises(ConfigurationError, match="missing"):
            DiodeCalibration({Polarization.H: DiodeState()})

    @pytest.mark.unit
    def test_mu_factor_combines_losses(self, warm_calibration):
        """Test coupling and thermal scale multiply."""
        warm = warm_calibration.at(40.0)
        assert warm.mu_factor(Polarization.H) == pytest.approx(0.72)
        assert warm.mu_factor(Polarization.V) == pytest.approx(1.0)

    @pytest.mark.unit
    def test_rotation_scales_with_fibre_length(self, warm_calibration):
        """Test fibre rotation scales with deployed length."""
        longer = DiodeCalibration(
            warm_calibration.diodes, temperature_c=40.0, table_fibre_length_m=1.0, fibre_length_m=2.0
        )
        assert longer.pol_rotation(Polarization.H) == pytest.approx(6.0)

    @pytest.mark.unit
    def test_load_example_table(self):
        """Test the shipped example table loads."""
        cal = load_calibration(EXAMPLE_CALIBRATION)
        assert cal.diodes[Polarization.V].drive_current_ma == 41.5
        assert cal.mu_scale(Polarization.H) == pytest.approx(1.0)

    @pytest.mark.unit
    def test_dict_round_trip(self):
        """Test to_dict feeds back into from_dict."""
        cal = load_calibration(EXAMPLE_CALIBRATION)
        assert DiodeCalibration.from_dict(cal.to_dict()) == cal

    @pytest.mark.unit
    def test_thermal_step_leaves_input(self, warm_calibration):
        """Test a thermal step returns a new calibration."""
        stepped = apply_thermal_step(warm_calibration, 21.0, 40.0)

        assert warm_calibration.temperature_c == 21.0
        assert stepped.temperature_c == 40.0
        assert stepped.pol_rotation(Polarization.H) == pytest.approx(3.0)

    @pytest.mark.unit
    def test_thermal_step_survival(self, warm_calibration):
        """Test a step beyond survival raises."""
        with pytest.raises(TemperatureFault):
            apply_thermal_step(warm_calibration, 21.0, 95.0)

    @pytest.mark.unit
    def test_retune_restores_mu(self, warm_calibration):
        """Test retuned currents cancel coupling and thermal loss."""
        retuned = retune_currents(warm_calibration, 40.0)

        np.testing.assert_allclose(retuned.mu_factors(), np.ones(4))
        assert retuned.diodes[Polarization.H].drive_current_ma == pytest.approx(40.0 / 0.72)

    @pytest.mark.unit
    def test_retune_example_table_hot(self):
        """Test retuning the example table at 30 C equalises every diode."""
        retuned = retune_currents(load_calibration(EXAMPLE_CALIBRATION), 30.0)
        np.testing.assert_allclose(retuned.mu_factors(), np.ones(4))


class TestGeneratePulseTrain:
    """Test QRNG-driven pulse trains."""

    @pytest.mark.unit
    def test_deterministic(self, source):
        """Test equal seeds give equal trains."""
        cal = DiodeCalibration.ideal()
        a = generate_pulse_train(source, cal, 21.0, RandomBitSource(9), 1000)
        b = generate_pulse_train(source, cal, 21.0, RandomBitSource(9), 1000)

        np.testing.assert_array_equal(a.pol, b.pol)
        np.testing.assert_array_equal(a.photons, b.photons)

    @pytest.mark.unit
    def test_class_mix(self, source):
        """Test intensity mix 70/20/10 within 5 sigma."""
        n = 100_000
        batch = generate_pulse_train(source, DiodeCalibration.ideal(), 21.0, RandomBitSource(1), n)
        freq = np.bincount(batch.intensity, minlength=3) / n

        np.testing.assert_allclose(freq, [0.7, 0.2, 0.1], atol=5 * np.sqrt(0.25 / n))

    @pytest.mark.unit
    def test_thermal_loss_lowers_mean(self, source, warm_calibration):
        """Test a warm H diode emits fewer photons."""
        batch = generate_pulse_train(source, warm_calibration, 40.0, RandomBitSource(2), 200_000)
        h_signal = (batch.pol == Polarization.H.code) & (batch.intensity == IntensityLabel.SIGNAL.code)
        mean = batch.photons[h_signal].mean()

        assert abs(mean - 0.8 * 0.72) < 5 * np.sqrt(0.8 * 0.72 / h_signal.sum())

    @pytest.mark.unit
    def test_rotation_applied(self, source, warm_calibration):
        """Test the H diode's fibre rotation reaches the pulse angle."""
        batch = generate_pulse_train(source, warm_calibration, 40.0, RandomBitSource(3), 1000)
        h = batch.pol == Polarization.H.code
        np.testing.assert_allclose(batch.angle[h], 3.0)

    @pytest.mark.unit
    def test_zero_pulses_refused(self, source):
        """Test an empty train is refused."""
        with pytest.raises(ConfigurationError):
            generate_pulse_train(source, DiodeCalibration.ideal(), 21.0, RandomBitSource(1), 0)

    @pytest.mark.unit
    def test_survival_temperature(self, source):
        """Test generation outside survival raises."""
        with pytest.raises(TemperatureFault):
            generate_pulse_train(source, DiodeCalibration.ideal(), -40.0, RandomBitSource(1), 10)


class TestEmitTestPattern:
    """Test deterministic calibration patterns."""

    @pytest.mark.unit
    def test_pattern_repeats(self, source):
        """Test the HVDA pattern repeats at 20 MHz."""
        pattern = TestPattern.of([Polarization.H, Polarization.V, Polarization.D, Polarization.A])
        batch = emit_test_pattern(source, DiodeCalibration.ideal(), pattern, 21.0, RandomBitSource(1), 3)

        assert batch.pol.tolist() == [0, 1, 2, 3] * 3
        assert pattern.period_s == pytest.approx(200e-9)
        np.testing.assert_allclose(np.diff(batch.emit_time), 50e-9)

    @pytest.mark.unit
    def test_modulation_rate_limit(self, source):
        """Test patterns faster than the pulse clock are refused."""
        pattern = TestPattern.of([Polarization.H], modulation_rate_hz=2e8)
        with pytest.raises(ConfigurationError, match="modulation rate"):
            emit_test_pattern(source, DiodeCalibration.ideal(), pattern, 21.0, RandomBitSource(1), 1)

    @pytest.mark.unit
    def test_empty_pattern(self):
        """Test an empty pattern is refused."""
        with pytest.raises(ConfigurationError):
            TestPattern(())


class TestBenchMeasure:
    """Test the simulated SPCM bench."""

    @pytest.mark.unit
    def test_counts_follow_currents(self, source):
        """Test doubling a diode's current raises its click count."""
        measure = make_bench_measure(source, DiodeCalibration.ideal(), 21.0, RandomBitSource(4), 100_000)

        counts = measure(np.array([40.0, 80.0, 40.0, 40.0]))

        assert counts.shape == (4,)
        assert counts[1] > counts[0]


class TestWritePulseStream:
    """Test pulse stream output."""

    @pytest.mark.unit
    def test_columns(self, tmp_path, source):
        """Test header and one row per pulse."""
        batch = generate_pulse_train(source, DiodeCalibration.ideal(), 21.0, RandomBitSource(1), 5)
        path = write_pulse_stream(tmp_path / "pulses.txt", batch)

        lines = path.read_text().splitlines()
        assert lines[0] == "# index time_s pol class photons"
        assert len(lines) == 6
        assert lines[1].split()[0] == "0"


class TestTransmitterStage:
    """Test the transmitter stage."""

    @pytest.mark.unit
    def test_tallies(self, source):
        """Test pulses and blocks are counted."""
        stage = TransmitterStage({}, source)
        stage.emit(RandomBitSource(1), 0, 1000)
        stage.emit(RandomBitSource(2), 1000, 500)

        summary = stage.summarize()
        assert summary["pulses_sent"] == 1500
        assert summary["blocks"] == 2
        assert sum(summary["by_state"].values()) == 1500

    @pytest.mark.unit
    def test_report_lines(self, source):
        """Test the report names the pulse count."""
        stage = TransmitterStage({}, source)
        stage.emit(RandomBitSource(1), 0, 100)

        assert "100 pulses in 1 blocks" in stage.get_report_text()

    @pytest.mark.unit
    def test_retune_option(self, warm_calibration):
        """Test retune_currents equalises the calibration at start."""
        stage = TransmitterStage({"retune_currents": True}, SourceConfig(temperature_c=40.0), warm_calibration)

        summary = stage.summarize()
        assert summary["mu_factor"]["H"] == pytest.approx(1.0)

    @pytest.mark.unit
    def test_drifted_diode_labelled(self, source):
        """Test a diode rotated past 22.5 degrees is reported as the state it now resembles."""
        diodes = {p: DiodeState() for p in Polarization}
        diodes[Polarization.H] = DiodeState(pol_rotation_deg=DriftTable.constant(30.0))
        stage = TransmitterStage({}, source, DiodeCalibration(diodes))

        summary = stage.summarize()

        assert summary["emitted_as"] == {"H": "D", "V": "V", "D": "D", "A": "A"}
        assert "transmitter: H diode emits nearer D (+30.0 deg)" in stage.get_report_text()

    @pytest.mark.unit
    def test_aligned_diodes_not_labelled(self, source):
        """Test an ideal source adds no drift lines."""
        stage = TransmitterStage({}, source)
        assert "nearer" not in stage.get_report_text()
