# Pass geometry, pointing and free-space link models
from channel.geometry import PassGeometry, elevation_profile, pass_window, slant_range_km
from channel.pointing import (
    BeaconBudget,
    BeaconConfig,
    OpticsConfig,
    PointingState,
    beacon_duty_cycle,
    thermal_deflection_post_telescope,
)
from channel.link import (
    AtmosphereConfig,
    CloudField,
    LinkState,
    beam_capture_fraction,
    link_state,
    transmittance,
    transmittance_series,
)
from channel.eavesdropper import intercept_resend
from channel.stage import ChannelStage

__all__ = [
    "PassGeometry",
    "elevation_profile",
    "pass_window",
    "slant_range_km",
    "BeaconBudget",
    "BeaconConfig",
    "OpticsConfig",
    "PointingState",
    "beacon_duty_cycle",
    "thermal_deflection_post_telescope",
    "AtmosphereConfig",
    "CloudField",
    "LinkState",
    "beam_capture_fraction",
    "link_state",
    "transmittance",
    "transmittance_series",
    "intercept_resend",
    "ChannelStage",
]
