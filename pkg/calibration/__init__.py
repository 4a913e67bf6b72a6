# Bench analysis: histograms, ROIs, current equalisation, sweep and divergence fits
from calibration.histogram import (
    AccumulativeHistogram,
    Roi,
    RoiSpec,
    accumulate_histogram,
    find_histogram_peaks,
    roi_counts,
    slot_rois,
)
from calibration.equalize import EqualizationResult, equalize_currents
from calibration.sweep import SweepFit, SweepSeries, hwp_sweep_fit, simulate_relative_sweep
from calibration.divergence import DivergenceFit, SpotMeasurement, divergence_fit
from calibration.files import (
    read_rois,
    read_spots,
    read_sweep,
    write_histogram,
    write_rois,
    write_spots,
    write_sweep,
)
from calibration.runner import SUBCOMMANDS, run_calibration

__all__ = [
    "AccumulativeHistogram",
    "Roi",
    "RoiSpec",
    "accumulate_histogram",
    "find_histogram_peaks",
    "roi_counts",
    "slot_rois",
    "EqualizationResult",
    "equalize_currents",
    "SweepFit",
    "SweepSeries",
    "hwp_sweep_fit",
    "simulate_relative_sweep",
    "DivergenceFit",
    "SpotMeasurement",
    "divergence_fit",
    "read_rois",
    "read_spots",
    "read_sweep",
    "write_histogram",
    "write_rois",
    "write_spots",
    "write_sweep",
    "SUBCOMMANDS",
    "run_calibration",
]
