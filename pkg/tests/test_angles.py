"""Tests for polarization angle utilities."""

import pytest
import sys
import os

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from core.angles import nearest_polarization, wrap_degrees, wrap_symmetric
from core.domain import Polarization


class TestWrapDegrees:
    """Test reduction into [0, period)."""

    @pytest.mark.unit
    def test_inside_range_unchanged(self):
        """Test angles already in range pass through."""
        assert wrap_degrees(0.0) == 0.0
        assert wrap_degrees(45.0) == 45.0
        assert wrap_degrees(179.5) == 179.5

    @pytest.mark.unit
    def test_linear_polarization_period(self):
        """Test 180 degree periodicity of linear polarization."""
        assert wrap_degrees(180.0) == 0.0
        assert wrap_degrees(225.0) == pytest.approx(45.0)
        assert wrap_degrees(-45.0) == pytest.approx(135.0)

    @pytest.mark.unit
    def test_custom_period(self):
        """Test the waveplate period of 90 degrees."""
        assert wrap_degrees(100.0, 90.0) == pytest.approx(10.0)
        assert wrap_degrees(-10.0, 90.0) == pytest.approx(80.0)

    @pytest.mark.unit
    def test_tiny_negative_does_not_return_period(self):
        """Test -1e-18 wraps to 0, never to the period itself."""
        value = wrap_degrees(-1e-18)
        assert 0.0 <= value < 180.0

    @pytest.mark.unit
    def test_array_input(self):
        """Test arrays are wrapped element-wise."""
        result = wrap_degrees(np.array([-90.0, 0.0, 270.0]))
        np.testing.assert_allclose(result, [90.0, 0.0, 90.0])


class TestWrapSymmetric:
    """Test reduction into (-period/2, period/2]."""

    @pytest.mark.unit
    def test_small_angles_unchanged(self):
        """Test angles within the half period are unchanged."""
        assert wrap_symmetric(10.0) == pytest.approx(10.0)
        assert wrap_symmetric(-10.0) == pytest.approx(-10.0)

    @pytest.mark.unit
    def test_wraps_large_angles(self):
        """Test angles beyond the half period fold back."""
        assert wrap_symmetric(170.0) == pytest.approx(-10.0)
        assert wrap_symmetric(-100.0) == pytest.approx(80.0)

    @pytest.mark.unit
    def test_upper_edge_included(self):
        """Test +period/2 stays positive."""
        assert wrap_symmetric(90.0) == pytest.approx(90.0)
        assert wrap_symmetric(-90.0) == pytest.approx(90.0)


class TestNearestPolarization:
    """Test mapping angles onto H, D, V, A."""

    @pytest.mark.unit
    def test_exact_states(self):
        """Test each state's own angle maps to itself."""
        for p in Polarization:
            assert nearest_polarization(p.angle) is p

    @pytest.mark.unit
    def test_small_rotations(self):
        """Test a few degrees of rotation keep the state."""
        assert nearest_polarization(4.0) is Polarization.H
        assert nearest_polarization(-4.0) is Polarization.H
        assert nearest_polarization(49.0) is Polarization.D
        assert nearest_polarization(130.0) is Polarization.A

    @pytest.mark.unit
    def test_boundary(self):
        """Test the 22.5 degree boundary between H and D."""
        assert nearest_polarization(22.0) is Polarization.H
        assert nearest_polarization(23.0) is Polarization.D

    @pytest.mark.unit
    def test_none_input(self):
        """Test None input returns None."""
        assert nearest_polarization(None) is None

    @pytest.mark.unit
    def test_periodicity(self):
        """Test angles a half turn apart give the same state."""
        assert nearest_polarization(270.0) is Polarization.V
        assert nearest_polarization(-45.0) is Polarization.A
