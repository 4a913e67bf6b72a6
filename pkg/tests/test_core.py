"""Tests for shared domain types, randomness, pulses and thermal tables."""

import pytest
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from core.domain import (
    BIT_CONVENTION,
    Basis,
    IntensityLabel,
    Polarization,
    PulseBatch,
    TagBatch,
    TimeTag,
    Port,
    Origin,
    basis_of,
    bit_of,
    intensity_classes,
    polarization_for,
)
from core.errors import (
    ConfigurationError,
    ParseError,
    RandomnessExhausted,
    SyncFailure,
    TemperatureFault,
)
from core.pulses import check_probabilities, draw_pulse, draw_pulses
from core.rng import RandomBitSource, ReplayBitSource
from core.thermal import DriftTable, check_temperature

CLASSES = intensity_classes(0.8, 0.4)
UNIFORM = (0.25, 0.25, 0.25, 0.25)
MIX = (0.7, 0.2, 0.1)


class TestEncoding:
    """Test the BB84 polarization encoding."""

    @pytest.mark.unit
    def test_bits(self):
        """Test H and D carry 1, V and A carry 0."""
        assert bit_of(Polarization.H) == 1
        assert bit_of(Polarization.V) == 0
        assert bit_of(Polarization.D) == 1
        assert bit_of(Polarization.A) == 0

    @pytest.mark.unit
    def test_bases(self):
        """Test basis membership."""
        assert basis_of(Polarization.H) is Basis.HV
        assert basis_of(Polarization.V) is Basis.HV
        assert basis_of(Polarization.D) is Basis.DA
        assert basis_of(Polarization.A) is Basis.DA

    @pytest.mark.unit
    def test_polarization_for_inverts(self):
        """Test (basis, bit) recovers the polarization."""
        for p in Polarization:
            assert polarization_for(basis_of(p), bit_of(p)) is p

    @pytest.mark.unit
    def test_bit_convention_byte(self):
        """Test the convention byte packs the bit of H, V, D, A."""
        assert BIT_CONVENTION == 0b0101


class TestIntensityClasses:
    """Test intensity class construction."""

    @pytest.mark.unit
    def test_default_classes(self):
        """Test signal, decoy and vacuum means."""
        signal, decoy, vacuum = CLASSES
        assert signal.label is IntensityLabel.SIGNAL
        assert signal.mean_photon_number == 0.8
        assert decoy.mean_photon_number == 0.4
        assert vacuum.mean_photon_number == 0.0

    @pytest.mark.unit
    def test_decoy_must_be_below_signal(self):
        """Test signal > decoy > 0 is enforced."""
        with pytest.raises(ConfigurationError):
            intensity_classes(0.4, 0.8)
        with pytest.raises(ConfigurationError):
            intensity_classes(0.8, 0.0)


class TestRandomBitSource:
    """Test seeded random streams."""

    @pytest.mark.unit
    def test_same_seed_same_draws(self):
        """Test two sources with one seed agree."""
        a = RandomBitSource(42).uniform(100)
        b = RandomBitSource(42).uniform(100)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.unit
    def test_substreams_independent_of_order(self):
        """Test a named substream does not depend on draws from its parent."""
        root = RandomBitSource(7)
        first = root.substream("channel").uniform(10)
        root.uniform(1000)
        again = root.substream("channel").uniform(10)
        np.testing.assert_array_equal(first, again)

    @pytest.mark.unit
    def test_substreams_differ(self):
        """Test differently named substreams give different draws."""
        root = RandomBitSource(7)
        assert not np.array_equal(root.substream("a").uniform(10), root.substream("b").uniform(10))

    @pytest.mark.unit
    def test_seed_range(self):
        """Test seeds outside 64 bits are refused."""
        with pytest.raises(ConfigurationError):
            RandomBitSource(-1)
        with pytest.raises(ConfigurationError):
            RandomBitSource(2**64)

    @pytest.mark.unit
    def test_sample_indices_sorted_distinct(self):
        """Test sampled positions are sorted and unique."""
        idx = RandomBitSource(3).sample_indices(1000, 100)
        assert len(idx) == 100
        assert np.all(np.diff(idx) > 0)

    @pytest.mark.unit
    def test_choice_follows_probabilities(self):
        """Test categorical draws match their probabilities (5 sigma)."""
        codes = RandomBitSource(5).choice(np.array([0.7, 0.2, 0.1]), 100_000)
        freq = np.bincount(codes, minlength=3) / 100_000
        np.testing.assert_allclose(freq, [0.7, 0.2, 0.1], atol=5 * np.sqrt(0.25 / 100_000))


class TestReplayBitSource:
    """Test replayed QRNG files."""

    @pytest.mark.unit
    def test_replays_words(self, tmp_path):
        """Test uniform variates come from the file."""
        path = tmp_path / "qrng.bin"
        path.write_bytes(np.array([0, 2**31, 2**30], dtype="<u4").tobytes())
        source = ReplayBitSource(path)

        np.testing.assert_array_equal(source.uniform(3), [0.0, 0.5, 0.25])
        assert source.remaining == 0

    @pytest.mark.unit
    def test_exhaustion(self, tmp_path):
        """Test running out of words raises."""
        path = tmp_path / "qrng.bin"
        path.write_bytes(np.array([1], dtype="<u4").tobytes())
        source = ReplayBitSource(path)

        with pytest.raises(RandomnessExhausted):
            source.uniform(2)


class TestDrawPulses:
    """Test pulse drawing."""

    @pytest.mark.unit
    def test_indices_and_times(self):
        """Test pulses are indexed from start_index at the pulse clock."""
        batch = draw_pulses(RandomBitSource(1), UNIFORM, MIX, CLASSES, 100, 5, 1e8)

        np.testing.assert_array_equal(batch.index, [100, 101, 102, 103, 104])
        np.testing.assert_allclose(batch.emit_time, np.arange(100, 105) / 1e8)

    @pytest.mark.unit
    def test_vacuum_pulses_are_empty(self):
        """Test vacuum pulses carry no photons."""
        batch = draw_pulses(RandomBitSource(2), UNIFORM, MIX, CLASSES, 0, 10_000, 1e8)
        vacuum = batch.intensity == IntensityLabel.VACUUM.code
        assert vacuum.any()
        assert np.all(batch.photons[vacuum] == 0)

    @pytest.mark.unit
    def test_signal_mean_photon_number(self):
        """Test signal photon mean within 5 sigma of 0.8."""
        batch = draw_pulses(RandomBitSource(3), UNIFORM, MIX, CLASSES, 0, 200_000, 1e8)
        signal = batch.photons[batch.intensity == IntensityLabel.SIGNAL.code]
        assert abs(signal.mean() - 0.8) < 5 * np.sqrt(0.8 / len(signal))

    @pytest.mark.unit
    def test_draw_pulse_single_record(self):
        """Test the single-pulse form returns a record."""
        record = draw_pulse(RandomBitSource(4), UNIFORM, MIX, CLASSES, 9, 1e8)
        assert record.index == 9
        assert record.polarization in tuple(Polarization)

    @pytest.mark.unit
    def test_probabilities_validated(self):
        """Test malformed probability vectors are refused."""
        with pytest.raises(ConfigurationError):
            check_probabilities("state_probs", (0.5, 0.5), 4)
        with pytest.raises(ConfigurationError):
            check_probabilities("intensity_probs", (0.7, 0.2, 0.2), 3)

    @pytest.mark.unit
    def test_batch_concat_and_records(self):
        """Test batches concatenate and expose records."""
        a = draw_pulses(RandomBitSource(5), UNIFORM, MIX, CLASSES, 0, 3, 1e8)
        b = draw_pulses(RandomBitSource(6), UNIFORM, MIX, CLASSES, 3, 2, 1e8)
        merged = PulseBatch.concat([a, b])

        assert len(merged) == 5
        assert [r.index for r in merged.records()] == [0, 1, 2, 3, 4]


class TestTagBatch:
    """Test timetag batches."""

    @pytest.mark.unit
    def test_merge_sorts_by_time(self):
        """Test merged tags come out time-ordered."""
        tags = TagBatch.from_records(
            [TimeTag(Port.V, 2e-9, Origin.SIGNAL), TimeTag(Port.H, 1e-9, Origin.DARK)]
        )
        assert list(tags.times) == [1e-9, 2e-9]
        assert tags.on_port(Port.V).times.tolist() == [2e-9]


class TestThermal:
    """Test drift tables and temperature limits."""

    @pytest.mark.unit
    def test_interpolation_and_hold(self):
        """Test linear interpolation inside, hold outside the knots."""
        table = DriftTable((0.0, 20.0), (1.0, 3.0))
        assert table(10.0) == pytest.approx(2.0)
        assert table(-40.0) == pytest.approx(1.0)
        assert table(60.0) == pytest.approx(3.0)

    @pytest.mark.unit
    def test_knots_must_increase(self):
        """Test unsorted knots are refused."""
        with pytest.raises(ConfigurationError):
            DriftTable((20.0, 0.0), (1.0, 3.0))

    @pytest.mark.unit
    def test_mapping_round_trip(self):
        """Test tables serialise through string keys."""
        table = DriftTable.from_mapping({"-20": -1.81e-3, "22": 0.0, "50": 2.13e-3})
        assert DriftTable.from_mapping(table.to_mapping()) == table

    @pytest.mark.unit
    def test_survival_range(self):
        """Test temperatures outside survival raise."""
        check_temperature(21.0)
        with pytest.raises(TemperatureFault):
            check_temperature(90.0)

    @pytest.mark.unit
    def test_operating_range_warns(self, caplog):
        """Test temperatures outside the operating range only warn."""
        with caplog.at_level("WARNING"):
            check_temperature(60.0)
        assert "operating range" in caplog.text


class TestErrors:
    """Test the error hierarchy."""

    @pytest.mark.unit
    def test_one_line(self):
        """Test the CLI form carries the code on one line."""
        assert SyncFailure("no beacon\ntags").one_line() == "error E_SYNC: no beacon tags"

    @pytest.mark.unit
    def test_configuration_error_is_value_error(self):
        """Test configuration errors are also ValueErrors."""
        assert issubclass(ConfigurationError, ValueError)

    @pytest.mark.unit
    def test_parse_error_position(self):
        """Test parse errors carry file, line and column."""
        e = ParseError("bad number", "a.txt", 3, 7)
        assert (e.path, e.line, e.column) == ("a.txt", 3, 7)
        assert "a.txt:3:7" in str(e)
