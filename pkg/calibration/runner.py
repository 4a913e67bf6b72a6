"""Calibration subcommands: read inputs, run one analysis, write its report."""

import logging
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Union

from calibration.divergence import divergence_fit
from calibration.equalize import equalize_currents
from calibration.files import read_rois, read_spots, read_sweep, write_histogram
from calibration.histogram import (
    AccumulativeHistogram,
    accumulate_histogram,
    find_histogram_peaks,
    relative_counts,
    roi_counts,
    slot_rois,
)
from calibration.sweep import hwp_sweep_fit
from core.domain import POLARIZATIONS, Port
from core.errors import CalibrationFailure, ConfigurationError
from core.report_output import ReportOutput
from core.rng import RandomBitSource
from receiver.timetag_file import read_timetags
from transmitter.calibration import DiodeCalibration, load_calibration
from transmitter.source import SourceConfig, make_bench_measure

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

HISTOGRAM_DEFAULTS = {
    "period_s": 200e-9,
    "bin_width_s": 100e-12,
    "t0_s": 0.0,
    "slot_spacing_s": 50e-9,
    "port": None,
}
ROI_DEFAULTS = dict(HISTOGRAM_DEFAULTS, roi_width_s=10e-9, roi_offset_s=0.0)
EQUALIZE_DEFAULTS = {
    "temperature_c": 21.0,
    "pulses_per_diode": 100_000,
    "target_rel_tol": 0.02,
    "max_iters": 20,
    "seed": 0,
    "signal_mu": 0.8,
    "detector_efficiency": 0.6,
}


def _with_defaults(params: Mapping[str, Any], defaults: Mapping[str, Any]) -> Dict[str, Any]:
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigurationError(f"unknown parameters: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update({k: v for k, v in params.items() if v is not None})
    return merged


def _require(inputs: Mapping[str, PathLike], name: str) -> Path:
    if not inputs.get(name):
        raise ConfigurationError(f"missing input file '{name}'")
    return Path(inputs[name])


def _port(name: Optional[str]) -> Optional[Port]:
    if name is None:
        return None
    try:
        return Port[str(name)]
    except KeyError:
        raise ConfigurationError(f"unknown port {name!r}") from None


def _histogram(inputs, p) -> AccumulativeHistogram:
    tags, _ = read_timetags(_require(inputs, "timetags"))
    return accumulate_histogram(
        tags, float(p["period_s"]), float(p["bin_width_s"]), float(p["t0_s"]), _port(p["port"])
    )


def _run_histogram(inputs, params, output: ReportOutput) -> Dict[str, Any]:
    p = _with_defaults(params, HISTOGRAM_DEFAULTS)
    h = _histogram(inputs, p)
    write_histogram(output.path("histogram.txt"), h)
    peaks = find_histogram_peaks(h, float(p["slot_spacing_s"]) / 2.0)
    return {
        "parameters": p,
        "total_counts": h.total,
        "n_bins": h.n_bins,
        "peaks": [
            {"bin": int(b), "time_s": float(b * h.bin_width), "counts": int(h.counts[b])}
            for b in peaks
        ],
    }


def _run_roi(inputs, params, output: ReportOutput) -> Dict[str, Any]:
    p = _with_defaults(params, ROI_DEFAULTS)
    h = _histogram(inputs, p)
    if inputs.get("rois"):
        rois = read_rois(inputs["rois"])
    else:
        rois = slot_rois(
            h, POLARIZATIONS, float(p["slot_spacing_s"]), float(p["roi_width_s"]), float(p["roi_offset_s"])
        )
    counts = roi_counts(h, rois)
    return {
        "parameters": p,
        "total_counts": h.total,
        "rois": [{"label": r.label.name, "start_bin": r.start_bin, "end_bin": r.end_bin} for r in rois],
        "counts": {k.name: v for k, v in counts.items()},
        "relative": {k.name: v for k, v in relative_counts(counts).items()},
    }


def _run_equalize(inputs, params, output: ReportOutput) -> Dict[str, Any]:
    p = _with_defaults(params, EQUALIZE_DEFAULTS)
    cal = load_calibration(inputs["calibration"]) if inputs.get("calibration") else DiodeCalibration.ideal()
    source = SourceConfig(signal_mu=float(p["signal_mu"]), decoy_mu=float(p["signal_mu"]) / 2.0)
    measure = make_bench_measure(
        source,
        cal,
        float(p["temperature_c"]),
        RandomBitSource(int(p["seed"])).substream("bench"),
        int(p["pulses_per_diode"]),
        float(p["detector_efficiency"]),
    )
    try:
        result = equalize_currents(
            measure, cal.currents(), float(p["target_rel_tol"]), int(p["max_iters"])
        )
    except CalibrationFailure as e:
        output.write_json(
            "equalize_report.json",
            {"parameters": p, "failed": True, "reason": str(e), "trace": e.trace},
        )
        raise
    return {"parameters": p, "failed": False, **result.to_dict()}


def _run_sweep_fit(inputs, params, output: ReportOutput) -> Dict[str, Any]:
    _with_defaults(params, {})
    fit = hwp_sweep_fit(read_sweep(_require(inputs, "sweep")))
    return {"parameters": {}, **fit.to_dict()}


def _run_divergence(inputs, params, output: ReportOutput) -> Dict[str, Any]:
    _with_defaults(params, {})
    fit = divergence_fit(read_spots(_require(inputs, "spots")))
    return {"parameters": {}, **fit.to_dict()}


SUBCOMMANDS: Dict[str, Callable[..., Dict[str, Any]]] = {
    "histogram": _run_histogram,
    "roi": _run_roi,
    "equalize": _run_equalize,
    "sweep-fit": _run_sweep_fit,
    "divergence": _run_divergence,
}


def run_calibration(
    subcommand: str,
    inputs: Mapping[str, PathLike],
    params: Mapping[str, Any],
    out_dir: PathLike,
) -> Dict[str, Any]:
    """
    Run one calibration analysis and write `<subcommand>_report.json`.

    Args:
        subcommand: One of histogram, roi, equalize, sweep-fit, divergence
        inputs: Input files by role (timetags, rois, sweep, spots, calibration)
        params: Analysis parameters; unset ones take their defaults
        out_dir: Report directory

    Raises:
        ConfigurationError: Unknown subcommand or parameter
        ParseError: Malformed input file
        CalibrationFailure: Equalisation did not converge (report still written)
    """
    handler = SUBCOMMANDS.get(subcommand)
    if handler is None:
        raise ConfigurationError(
            f"unknown calibration subcommand {subcommand!r}; choose from {sorted(SUBCOMMANDS)}"
        )
    output = ReportOutput(out_dir)
    report = handler(inputs, params, output)
    report = {"subcommand": subcommand, "inputs": {k: str(v) for k, v in inputs.items() if v}, **report}
    output.write_json(f"{subcommand.replace('-', '_')}_report.json", report)
    logger.info(f"Wrote {subcommand} report to {output.out_dir}")
    return report
