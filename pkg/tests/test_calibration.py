"""Tests for the bench calibration toolkit."""

import pytest
import json
import os
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from calibration import (
    Roi,
    SpotMeasurement,
    SweepSeries,
    accumulate_histogram,
    divergence_fit,
    equalize_currents,
    find_histogram_peaks,
    hwp_sweep_fit,
    read_rois,
    read_spots,
    read_sweep,
    roi_counts,
    run_calibration,
    simulate_relative_sweep,
    slot_rois,
    write_histogram,
)
from core.angles import wrap_symmetric
from core.domain import POLARIZATIONS, Polarization, Port, TagBatch
from core.errors import CalibrationFailure, ConfigurationError, ParseError
from core.rng import RandomBitSource
from receiver import ClockModel, DetectorModel, detect
from receiver.timetag_file import read_timetags
from transmitter import (
    DiodeCalibration,
    DiodeState,
    SourceConfig,
    TestPattern,
    emit_test_pattern,
    make_bench_measure,
)

FIXTURES = Path(__file__).parent.parent / "fixtures"
MANIFEST = json.loads((FIXTURES / "manifest.json").read_text())


@pytest.fixture
def pattern_tags():
    """The 20 MHz four-slot test pattern capture."""
    tags, _ = read_timetags(FIXTURES / "tags_20mhz.txt")
    return tags


@pytest.fixture
def pattern_histogram(pattern_tags):
    """The capture folded over its 200 ns period."""
    return accumulate_histogram(pattern_tags, 200e-9, 100e-12)


@pytest.fixture
def uneven_calibration():
    """Diodes whose fibre coupling differs by up to 25%."""
    diodes = {p: DiodeState() for p in Polarization}
    diodes[Polarization.H] = DiodeState(coupling_efficiency=0.75)
    diodes[Polarization.D] = DiodeState(coupling_efficiency=0.9)
    return DiodeCalibration(diodes)


class TestHistogram:
    """Test accumulative histograms."""

    @pytest.mark.unit
    def test_fixture_total(self, pattern_histogram):
        """Test every tag lands in a bin."""
        expected = MANIFEST["tags_20mhz.txt"]["expected"]
        assert pattern_histogram.n_bins == 2000
        assert pattern_histogram.total == expected["total_counts"]

    @pytest.mark.unit
    def test_fixture_peaks(self, pattern_histogram):
        """Test one peak per 50 ns slot, near its centre bin."""
        expected = MANIFEST["tags_20mhz.txt"]["expected"]["peak_bins"]
        peaks = find_histogram_peaks(pattern_histogram, 25e-9)

        assert len(peaks) == 4
        np.testing.assert_allclose(peaks, expected, atol=2)

    @pytest.mark.unit
    def test_folding(self):
        """Test times one period apart share a bin."""
        h = accumulate_histogram(np.array([1.05e-9, 201.05e-9, 401.05e-9]), 200e-9, 1e-9)
        assert h.counts[1] == 3

    @pytest.mark.unit
    def test_t0_shifts_bins(self):
        """Test t0 maps to bin 0."""
        h = accumulate_histogram(np.array([10.5e-9]), 200e-9, 1e-9, t0=10e-9)
        assert h.counts[0] == 1

    @pytest.mark.unit
    def test_port_filter(self):
        """Test a port filter keeps only that detector."""
        tags = TagBatch(
            np.array([Port.H.value, Port.V.value, Port.H.value], dtype=np.int8),
            np.array([1e-9, 2e-9, 3e-9]),
            np.zeros(3, dtype=np.int8),
        )
        h = accumulate_histogram(tags, 200e-9, 1e-9, port=Port.H)
        assert h.total == 2

    @pytest.mark.unit
    def test_non_integral_bins(self):
        """Test a period that is not a whole number of bins is refused."""
        with pytest.raises(ConfigurationError, match="integer number"):
            accumulate_histogram(np.array([1e-9]), 200e-9, 300e-12)

    @pytest.mark.unit
    def test_empty_stream(self):
        """Test an empty stream is refused."""
        with pytest.raises(ConfigurationError):
            accumulate_histogram(np.array([]), 200e-9)

    @pytest.mark.unit
    def test_write_histogram(self, tmp_path, pattern_histogram):
        """Test histogram columns and period comment."""
        path = write_histogram(tmp_path / "h.txt", pattern_histogram)
        text = path.read_text()

        assert "# period_s 2e-07" in text
        assert "# bin time_s counts" in text


class TestRois:
    """Test region-of-interest counting."""

    @pytest.mark.unit
    def test_fixture_rois(self, pattern_histogram):
        """Test each slot ROI holds its 2000 tags."""
        rois = read_rois(FIXTURES / "rois_20mhz.txt")
        counts = roi_counts(pattern_histogram, rois)

        expected = MANIFEST["tags_20mhz.txt"]["expected"]["roi_counts"]
        assert {p.name: c for p, c in counts.items()} == expected

    @pytest.mark.unit
    def test_slot_rois_match_fixture(self, pattern_histogram):
        """Test generated slot ROIs equal the hand-written ones."""
        rois = slot_rois(pattern_histogram, POLARIZATIONS, 50e-9, 10e-9, offset_s=5e-9)
        assert rois == read_rois(FIXTURES / "rois_20mhz.txt")

    @pytest.mark.unit
    def test_overlap_refused(self, pattern_histogram):
        """Test overlapping ROIs are refused."""
        rois = [Roi(Polarization.H, 0, 100), Roi(Polarization.V, 50, 150)]
        with pytest.raises(ConfigurationError, match="overlap"):
            roi_counts(pattern_histogram, rois)

    @pytest.mark.unit
    def test_past_period_refused(self, pattern_histogram):
        """Test an ROI beyond the last bin is refused."""
        with pytest.raises(ConfigurationError, match="past the period"):
            roi_counts(pattern_histogram, [Roi(Polarization.A, 1950, 2050)])

    @pytest.mark.unit
    def test_empty_roi_refused(self):
        """Test start must precede end."""
        with pytest.raises(ConfigurationError):
            Roi(Polarization.H, 10, 10)

    @pytest.mark.unit
    def test_bad_label_position(self, tmp_path):
        """Test an unknown label names its line and column."""
        path = tmp_path / "rois.txt"
        path.write_text("# label start_bin end_bin\nH 0 100\n  X 200 300\n")

        with pytest.raises(ParseError) as exc_info:
            read_rois(path)
        assert (exc_info.value.line, exc_info.value.column) == (3, 3)


class TestSimulatedPattern:
    """Test the bench analyses on a pattern run through the simulated hardware."""

    @pytest.fixture
    def simulated_tags(self):
        """HVDA pattern at 20 MHz, one detector per diode, 50 ps jitter."""
        rng = RandomBitSource(20)
        pattern = TestPattern.of(list(POLARIZATIONS))
        batch = emit_test_pattern(
            SourceConfig(), DiodeCalibration.ideal(), pattern, 21.0, rng.substream("source"), 2000
        )
        det = DetectorModel(
            efficiency=1.0, dark_count_rate_hz=0.0, dead_time_s=0.0, timing_jitter_sigma_s=50e-12
        )
        return detect(
            batch.emit_time + 5.05e-9,
            np.eye(4)[batch.pol],
            batch.photons,
            det,
            ClockModel(),
            rng.substream("detector"),
        )

    @pytest.mark.integration
    def test_peaks_match_capture(self, simulated_tags):
        """Test the simulated capture peaks in the same bins as the bench capture."""
        h = accumulate_histogram(simulated_tags, 200e-9, 100e-12)
        peaks = find_histogram_peaks(h, 25e-9)

        expected = MANIFEST["tags_20mhz.txt"]["expected"]["peak_bins"]
        assert len(peaks) == 4
        np.testing.assert_allclose(peaks, expected, atol=2)

    @pytest.mark.integration
    def test_bench_rois_hold_every_tag(self, simulated_tags):
        """Test the bench ROIs capture each port's tags and nothing else."""
        h = accumulate_histogram(simulated_tags, 200e-9, 100e-12)
        counts = roi_counts(h, read_rois(FIXTURES / "rois_20mhz.txt"))

        for p in POLARIZATIONS:
            on_port = int(np.count_nonzero(simulated_tags.ports == Port[p.name].value))
            assert on_port > 900
            assert counts[p] == on_port


class TestEqualize:
    """Test drive-current equalisation."""

    @pytest.mark.unit
    def test_converges_on_bench(self, source_config, uneven_calibration):
        """Test uneven coupling equalises within tolerance."""
        measure = make_bench_measure(
            source_config, uneven_calibration, 21.0, RandomBitSource(5), 100_000
        )
        result = equalize_currents(measure, uneven_calibration.currents(), target_rel_tol=0.02)

        assert result.ratio <= 1.02
        assert result.currents[0] > result.currents[1]
        assert len(result.trace) == result.iterations

    @pytest.mark.unit
    def test_already_equal(self):
        """Test equal counts stop after one measurement."""
        result = equalize_currents(lambda c: np.full(4, 1000.0), [40.0] * 4)
        assert result.iterations == 1

    @pytest.mark.unit
    def test_dark_diode(self):
        """Test a diode with no counts fails with a trace."""
        with pytest.raises(CalibrationFailure) as exc_info:
            equalize_currents(lambda c: np.array([100.0, 0.0, 100.0, 100.0]), [40.0] * 4)
        assert len(exc_info.value.trace) == 1

    @pytest.mark.unit
    def test_no_convergence(self):
        """Test an unresponsive diode exhausts the iterations."""
        with pytest.raises(CalibrationFailure) as exc_info:
            equalize_currents(lambda c: np.array([100.0, 200.0, 100.0, 100.0]), [40.0] * 4, max_iters=3)
        assert len(exc_info.value.trace) == 3

    @pytest.mark.unit
    def test_bad_initial_currents(self):
        """Test non-positive currents are refused."""
        with pytest.raises(ConfigurationError):
            equalize_currents(lambda c: c, [40.0, 0.0, 40.0, 40.0])


@pytest.fixture
def source_config():
    """Default source settings."""
    return SourceConfig()


class TestSweepFit:
    """Test HWP sweep fitting."""

    @pytest.mark.unit
    def test_fixture_phases(self):
        """Test the recorded sweep gives the expected HWP phases."""
        expected = MANIFEST["sweep_hwp.txt"]["expected"]
        fit = hwp_sweep_fit(read_sweep(FIXTURES / "sweep_hwp.txt"))

        for name, phase in expected["phase_hwp_deg"].items():
            error = wrap_symmetric(fit.channels[Polarization[name]].phase_deg - phase, 90.0)
            assert abs(error) < expected["tolerance_deg"]

    @pytest.mark.unit
    def test_fixture_adjacent_separation(self):
        """Test adjacent test states sit 22.5 degrees apart in HWP angle."""
        expected = MANIFEST["sweep_hwp.txt"]["expected"]
        fit = hwp_sweep_fit(read_sweep(FIXTURES / "sweep_hwp.txt"))

        for a, b in [("V", "D"), ("D", "H"), ("H", "A")]:
            separation = fit.hwp_separation(Polarization[a], Polarization[b])
            assert abs(separation) == pytest.approx(
                expected["adjacent_separation_hwp_deg"], abs=expected["tolerance_deg"]
            )

    @pytest.mark.unit
    def test_fixture_visibility(self):
        """Test the recorded sweep has high visibility."""
        fit = hwp_sweep_fit(read_sweep(FIXTURES / "sweep_hwp.txt"))
        assert all(c.visibility > 0.9 for c in fit.channels.values())

    @pytest.mark.unit
    def test_simulated_sweep(self):
        """Test a simulated bench sweep recovers the emitted angles."""
        angles = {p: p.angle for p in POLARIZATIONS}
        series = simulate_relative_sweep(angles, np.arange(0, 180, 5.0), 1000.0, 20.0, RandomBitSource(8))
        fit = hwp_sweep_fit(series)

        assert abs(wrap_symmetric(fit.channels[Polarization.H].phase_deg - 45.0, 90.0)) < 1.0
        assert abs(wrap_symmetric(fit.channels[Polarization.D].phase_deg - 22.5, 90.0)) < 1.0

    @pytest.mark.unit
    def test_low_visibility_warning(self, caplog):
        """Test a flat channel is flagged."""
        angles = np.arange(0, 180, 10.0)
        series = SweepSeries(angles, {Polarization.H: 500.0 + 10.0 * np.cos(np.radians(4 * angles))})

        fit = hwp_sweep_fit(series)

        assert fit.channels[Polarization.H].low_visibility
        assert "visibility" in caplog.text

    @pytest.mark.unit
    def test_too_few_angles(self):
        """Test fewer than eight angles are refused."""
        series = SweepSeries(np.arange(0, 140, 20.0), {Polarization.H: np.ones(7)})
        with pytest.raises(ConfigurationError, match="at least 8"):
            hwp_sweep_fit(series)

    @pytest.mark.unit
    def test_narrow_span(self):
        """Test a sweep spanning under 90 degrees is refused."""
        series = SweepSeries(np.arange(0, 80, 5.0), {Polarization.H: np.ones(16)})
        with pytest.raises(ConfigurationError, match="span"):
            hwp_sweep_fit(series)

    @pytest.mark.unit
    def test_angles_must_increase(self):
        """Test unsorted angles are refused."""
        with pytest.raises(ConfigurationError):
            SweepSeries(np.array([0.0, 10.0, 5.0]), {Polarization.H: np.ones(3)})


class TestDivergence:
    """Test beam divergence fits."""

    @pytest.mark.unit
    def test_fixture_divergence(self):
        """Test the exact-line fixture gives 1 mrad on both axes."""
        expected = MANIFEST["spots_1mrad.txt"]["expected"]
        fit = divergence_fit(read_spots(FIXTURES / "spots_1mrad.txt"))

        assert fit.div_x == pytest.approx(expected["divergence_rad"])
        assert fit.div_y == pytest.approx(expected["divergence_rad"])
        assert fit.astigmatic is expected["astigmatic"]
        assert fit.converging is expected["converging"]

    @pytest.mark.unit
    def test_astigmatic(self):
        """Test axes differing by more than 10% are flagged."""
        spots = [SpotMeasurement(d, 1.0 + 0.01 * d, 1.0 + 0.02 * d) for d in (100.0, 200.0, 300.0)]
        assert divergence_fit(spots).astigmatic

    @pytest.mark.unit
    def test_converging(self, caplog):
        """Test a shrinking spot is flagged as converging."""
        spots = [SpotMeasurement(d, 5.0 - 0.01 * d, 5.0 - 0.01 * d) for d in (100.0, 200.0, 300.0)]

        fit = divergence_fit(spots)

        assert fit.converging
        assert "converges" in caplog.text

    @pytest.mark.unit
    def test_too_few_distances(self):
        """Test two distinct distances are not enough."""
        spots = [SpotMeasurement(100.0, 2.0, 2.0), SpotMeasurement(200.0, 3.0, 3.0), SpotMeasurement(200.0, 3.1, 3.1)]
        with pytest.raises(CalibrationFailure, match="distinct distances"):
            divergence_fit(spots)

    @pytest.mark.unit
    def test_zero_width_refused(self):
        """Test widths must be positive."""
        with pytest.raises(ConfigurationError):
            SpotMeasurement(100.0, 0.0, 1.0)


class TestRunCalibration:
    """Test calibration subcommands end to end."""

    @pytest.mark.integration
    def test_histogram_report(self, tmp_path):
        """Test the histogram subcommand writes its report and data."""
        report = run_calibration("histogram", {"timetags": FIXTURES / "tags_20mhz.txt"}, {}, tmp_path)

        assert report["total_counts"] == 8000
        assert len(report["peaks"]) == 4
        assert (tmp_path / "histogram_report.json").exists()
        assert (tmp_path / "histogram.txt").exists()

    @pytest.mark.integration
    def test_roi_report_from_slots(self, tmp_path):
        """Test generated ROIs count 2000 tags per state."""
        report = run_calibration(
            "roi", {"timetags": FIXTURES / "tags_20mhz.txt"}, {"roi_offset_s": 5e-9}, tmp_path
        )
        assert report["counts"] == {"H": 2000, "V": 2000, "D": 2000, "A": 2000}
        assert report["relative"]["A"] == pytest.approx(1.0)

    @pytest.mark.integration
    def test_sweep_fit_report(self, tmp_path):
        """Test the sweep-fit report lists separations."""
        report = run_calibration("sweep-fit", {"sweep": FIXTURES / "sweep_hwp.txt"}, {}, tmp_path)

        assert set(report["channels"]) == {"H", "V", "D", "A"}
        assert (tmp_path / "sweep_fit_report.json").exists()

    @pytest.mark.integration
    def test_divergence_report(self, tmp_path):
        """Test the divergence report carries both axes."""
        report = run_calibration("divergence", {"spots": FIXTURES / "spots_1mrad.txt"}, {}, tmp_path)
        assert report["x"]["divergence_rad"] == pytest.approx(1e-3)

    @pytest.mark.integration
    def test_equalize_report(self, tmp_path):
        """Test equalisation on the simulated bench converges."""
        report = run_calibration("equalize", {}, {"seed": 3}, tmp_path)

        assert report["failed"] is False
        assert report["ratio"] <= 1.02

    @pytest.mark.integration
    def test_equalize_failure_still_reports(self, tmp_path):
        """Test a failed equalisation writes its trace before raising."""
        with pytest.raises(CalibrationFailure):
            run_calibration("equalize", {}, {"max_iters": 1, "target_rel_tol": 1e-6}, tmp_path)

        report = json.loads((tmp_path / "equalize_report.json").read_text())
        assert report["failed"] is True
        assert len(report["trace"]) == 1

    @pytest.mark.unit
    def test_unknown_subcommand(self, tmp_path):
        """Test unknown subcommands are refused."""
        with pytest.raises(ConfigurationError, match="unknown calibration subcommand"):
            run_calibration("focus", {}, {}, tmp_path)

    @pytest.mark.unit
    def test_unknown_parameter(self, tmp_path):
        """Test unknown parameters are refused."""
        with pytest.raises(ConfigurationError, match="unknown parameters"):
            run_calibration("divergence", {"spots": FIXTURES / "spots_1mrad.txt"}, {"bins": 3}, tmp_path)

    @pytest.mark.unit
    def test_missing_input(self, tmp_path):
        """Test a missing input file role is named."""
        with pytest.raises(ConfigurationError, match="sweep"):
            run_calibration("sweep-fit", {}, {}, tmp_path)
