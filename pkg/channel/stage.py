"""Channel stage of a pass simulation."""

import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from channel.eavesdropper import intercept_resend
from channel.geometry import PassGeometry
from channel.link import AtmosphereConfig, CloudField, link_state, transmittance
from channel.pointing import OpticsConfig, PointingState
from core.base_stage import BaseStage
from core.domain import BASIS_BY_CODE, PulseBatch
from core.rng import RandomBitSource

logger = logging.getLogger(__name__)


class ChannelStage(BaseStage):
    """
    Satellite-to-ground quantum channel.

    Thins each pulse's photons by its sampled transmittance and applies the
    per-basis rotation of the pointing optics. With `eavesdropper` enabled
    every pulse is intercepted and resent before the loss.
    """

    name = "channel"

    def __init__(
        self,
        config: Dict[str, Any],
        geometry: PassGeometry,
        optics: OpticsConfig,
        pointing: PointingState,
        atmosphere: AtmosphereConfig,
        clouds: CloudField,
    ):
        super().__init__(config)
        self.geometry = geometry
        self.optics = optics
        self.pointing = pointing
        self.atmosphere = atmosphere
        self.clouds = clouds
        self.eavesdropper = bool(config.get("eavesdropper", False))

        self._eta_means: List[float] = []
        self._blocked_blocks = 0
        self.photons_in = 0
        self.photons_out = 0

    def light_time(self, t: float) -> float:
        """One-way light time at pass time t (s)."""
        return link_state(
            self.geometry, self.optics, self.pointing, self.atmosphere, self.clouds, t
        ).light_time_s

    def propagate(
        self,
        batch: PulseBatch,
        t: float,
        rng: RandomBitSource,
        eve_rng: Optional[RandomBitSource] = None,
    ) -> Tuple[PulseBatch, np.ndarray]:
        """
        Send one pulse block through the channel at pass time t.

        Returns:
            (received batch, per-pulse transmittance)
        """
        if self.eavesdropper:
            batch = intercept_resend(batch, eve_rng or rng.substream("eavesdropper"))

        eta = transmittance(
            self.geometry,
            self.optics,
            self.pointing,
            self.atmosphere,
            self.clouds,
            t,
            rng,
            size=len(batch),
        )
        survivors = rng.binomial(batch.photons, eta).astype(np.int64)
        basis_rotation = np.asarray(self.optics.basis_rotation_deg)[BASIS_BY_CODE[batch.pol]]

        self.photons_in += int(batch.photons.sum())
        self.photons_out += int(survivors.sum())
        mean_eta = float(eta.mean()) if len(eta) else 0.0
        self._eta_means.append(mean_eta)
        if not np.any(eta > 0):
            self._blocked_blocks += 1
        logger.debug(f"Channel at t={t:.3f} s: mean eta {mean_eta:.3e}")

        received = batch.replace(
            photons=survivors, rotation_deg=batch.rotation_deg + basis_rotation
        )
        return received, eta

    def summarize(self) -> Dict[str, Any]:
        etas = np.array(self._eta_means) if self._eta_means else np.zeros(1)
        return {
            "blocks": len(self._eta_means),
            "blocked_blocks": self._blocked_blocks,
            "eta_mean": float(etas.mean()),
            "eta_min": float(etas.min()),
            "eta_max": float(etas.max()),
            "photons_in": self.photons_in,
            "photons_out": self.photons_out,
            "eavesdropper": self.eavesdropper,
        }

    def format_for_report(self, summary: Dict[str, Any]) -> List[str]:
        lines = [
            f"channel: {summary['blocks']} blocks, eta mean {summary['eta_mean']:.3e} "
            f"(min {summary['eta_min']:.3e}, max {summary['eta_max']:.3e})",
        ]
        if summary["eavesdropper"]:
            lines.append("channel: intercept-resend eavesdropper active")
        return lines
