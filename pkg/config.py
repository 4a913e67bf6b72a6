"""Configuration handling for qkd-downlink-sim."""

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from dotenv import load_dotenv

from channel.geometry import PassGeometry, pass_window
from channel.link import AtmosphereConfig, CloudField
from channel.pointing import BeaconConfig, OpticsConfig, PointingState
from core.errors import ConfigurationError, ParseError
from core.rng import RandomBitSource
from protocol.stage import ProtocolConfig
from receiver.detector import ClockModel, DetectorModel
from receiver.stage import ReceiverConfig
from scheduler.stage import SchedulerConfig
from transmitter.calibration import DiodeCalibration, load_calibration
from transmitter.source import SourceConfig

logger = logging.getLogger(__name__)

DEFAULT_RAW_PULSE_LIMIT = 10_000_000


class Config:
    """Environment settings for qkd-downlink-sim. Nothing is required."""

    def __init__(self, env_path: Optional[str] = None):
        """
        Initialize configuration.

        Args:
            env_path: Path to .env file
        """
        self._load_env(env_path)

        self.out_dir = os.getenv("QKDSIM_OUT_DIR", str(Path.cwd() / "runs"))
        self.calibration_dir = os.getenv(
            "QKDSIM_CALIBRATION_DIR", str(Path.cwd() / "calibration_runs")
        )
        try:
            self.raw_pulse_limit = int(
                os.getenv("QKDSIM_RAW_PULSE_LIMIT", str(DEFAULT_RAW_PULSE_LIMIT))
            )
        except ValueError:
            raise ConfigurationError(
                f"QKDSIM_RAW_PULSE_LIMIT must be an integer, got {os.getenv('QKDSIM_RAW_PULSE_LIMIT')!r}"
            ) from None

    def _load_env(self, env_path: Optional[str] = None) -> None:
        """Load environment variables from .env file."""
        if env_path:
            load_dotenv(env_path)
            return

        search_paths = [
            Path.cwd() / ".env",
            Path(__file__).parent / ".env",
        ]

        for path in search_paths:
            if path.exists():
                load_dotenv(path)
                logger.debug(f"Loaded .env from {path}")
                return


@dataclass(frozen=True)
class SimulationConfig:
    """
    How the pass is sampled.

    Pulses are simulated in blocks of `pulses_per_block`, one block every
    `block_interval_s` of QKD time.
    """

    pulses_per_block: int = 100_000
    block_interval_s: float = 10.0
    max_blocks: Optional[int] = None
    eavesdropper: bool = False
    retune_currents: bool = False

    def __post_init__(self):
        if self.pulses_per_block < 1:
            raise ConfigurationError(f"pulses_per_block must be >= 1, got {self.pulses_per_block}")
        if not self.block_interval_s > 0:
            raise ConfigurationError(f"block_interval_s must be > 0, got {self.block_interval_s}")
        if self.max_blocks is not None and self.max_blocks < 1:
            raise ConfigurationError(f"max_blocks must be >= 1 when set, got {self.max_blocks}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SimulationConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown simulation keys: {sorted(unknown)}")
        values = dict(data)
        if "pulses_per_block" in values:
            values["pulses_per_block"] = int(values["pulses_per_block"])
        if values.get("max_blocks") is not None:
            values["max_blocks"] = int(values["max_blocks"])
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Scenario:
    """Everything one pass simulation needs; reproduces a run bit-exactly."""

    seed: int
    session_id: str = "pass"
    source: SourceConfig = field(default_factory=SourceConfig)
    calibration: DiodeCalibration = field(default_factory=DiodeCalibration.ideal)
    geometry: PassGeometry = field(default_factory=PassGeometry)
    optics: OpticsConfig = field(default_factory=OpticsConfig)
    pointing: PointingState = field(default_factory=PointingState)
    atmosphere: AtmosphereConfig = field(default_factory=AtmosphereConfig)
    clouds: CloudField = field(default_factory=CloudField.clear)
    beacon: BeaconConfig = field(default_factory=BeaconConfig)
    detector: DetectorModel = field(default_factory=DetectorModel)
    clock: ClockModel = field(default_factory=ClockModel)
    receiver: ReceiverConfig = field(default_factory=ReceiverConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=int(seed))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "session_id": self.session_id,
            "source": _source_dict(self.source),
            "calibration": self.calibration.to_dict(),
            "geometry": self.geometry.to_dict(),
            "optics": self.optics.to_dict(),
            "pointing": self.pointing.to_dict(),
            "atmosphere": dict(self.atmosphere.__dict__),
            "clouds": {"blocked_intervals": self.clouds.to_list()},
            "beacon": self.beacon.to_dict(),
            "detector": self.detector.to_dict(),
            "clock": self.clock.to_dict(),
            "receiver": self.receiver.to_dict(),
            "protocol": self.protocol.to_dict(),
            "scheduler": self.scheduler.to_dict(),
            "simulation": self.simulation.to_dict(),
        }


def _source_dict(source: SourceConfig) -> Dict[str, Any]:
    values = dict(source.__dict__)
    values["intensity_probs"] = list(source.intensity_probs)
    values["state_probs"] = list(source.state_probs)
    return values


SECTIONS = {
    "source": SourceConfig.from_dict,
    "geometry": PassGeometry.from_dict,
    "optics": OpticsConfig.from_dict,
    "pointing": PointingState.from_dict,
    "beacon": BeaconConfig.from_dict,
    "detector": DetectorModel.from_dict,
    "clock": ClockModel.from_dict,
    "receiver": ReceiverConfig.from_dict,
    "protocol": ProtocolConfig.from_dict,
    "scheduler": SchedulerConfig.from_dict,
    "simulation": SimulationConfig.from_dict,
}
TOP_LEVEL = set(SECTIONS) | {"seed", "session_id", "calibration", "calibration_file", "atmosphere", "clouds"}


def _clouds(data: Mapping[str, Any], geometry: PassGeometry, seed: int) -> CloudField:
    unknown = set(data) - {"blocked_intervals", "random"}
    if unknown:
        raise ConfigurationError(f"unknown clouds keys: {sorted(unknown)}")
    if "random" in data:
        settings = dict(data["random"])
        _, end, _ = pass_window(geometry)
        rng = RandomBitSource(seed).substream("cloud-field")
        return CloudField.random(
            end,
            rng,
            mean_clear_s=float(settings.pop("mean_clear_s", 60.0)),
            mean_blocked_s=float(settings.pop("mean_blocked_s", 30.0)),
        )
    return CloudField.from_list(data.get("blocked_intervals", []))


def scenario_from_dict(data: Mapping[str, Any], base_dir: Optional[Path] = None) -> Scenario:
    """
    Build and validate a Scenario from parsed JSON.

    Every section is constructed (and so validated) before returning.

    Raises:
        ConfigurationError: Unknown keys or invalid values in any section
    """
    unknown = set(data) - TOP_LEVEL
    if unknown:
        raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
    if "seed" not in data:
        raise ConfigurationError("scenario needs a seed")
    try:
        seed = int(data["seed"])
    except (TypeError, ValueError):
        raise ConfigurationError(f"seed must be an integer, got {data['seed']!r}") from None

    values: Dict[str, Any] = {"seed": seed, "session_id": str(data.get("session_id", "pass"))}
    for name, build in SECTIONS.items():
        section = data.get(name, {})
        if not isinstance(section, Mapping):
            raise ConfigurationError(f"scenario section '{name}' must be an object")
        values[name] = build(section)

    if "calibration" in data and "calibration_file" in data:
        raise ConfigurationError("give either 'calibration' or 'calibration_file', not both")
    if "calibration" in data:
        values["calibration"] = DiodeCalibration.from_dict(data["calibration"])
    elif "calibration_file" in data:
        path = Path(data["calibration_file"])
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        values["calibration"] = load_calibration(path)

    atmosphere = data.get("atmosphere", {})
    unknown_atm = set(atmosphere) - set(AtmosphereConfig.__dataclass_fields__)
    if unknown_atm:
        raise ConfigurationError(f"unknown atmosphere keys: {sorted(unknown_atm)}")
    values["atmosphere"] = AtmosphereConfig(**{k: float(v) for k, v in atmosphere.items()})
    values["clouds"] = _clouds(data.get("clouds", {}), values["geometry"], seed)
    return Scenario(**values)


def load_scenario(path: Union[str, Path]) -> Tuple[Scenario, str]:
    """
    Load a scenario file.

    Returns:
        (validated scenario, SHA-256 hex digest of the file bytes)

    Raises:
        ParseError: The file is not valid JSON
        ConfigurationError: The scenario does not validate
    """
    source = Path(path)
    raw = source.read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    try:
        data = json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, str(source), e.lineno, e.colno) from None
    except UnicodeDecodeError:
        raise ParseError("scenario is not UTF-8 text", str(source), 1, 1) from None
    if not isinstance(data, Mapping):
        raise ConfigurationError(f"{source}: scenario must be a JSON object")
    scenario = scenario_from_dict(data, base_dir=source.parent)
    logger.info(f"Loaded scenario {scenario.session_id} from {source} (sha256 {digest[:12]})")
    return scenario, digest
