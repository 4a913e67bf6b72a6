"""Scheduler stage of a pass simulation."""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional

from channel.geometry import PassGeometry
from channel.link import CloudField
from core.base_stage import BaseStage
from core.errors import ConfigurationError
from core.rng import RandomBitSource
from scheduler.planner import (
    DEFAULT_ACQUISITION_LEAD_S,
    DEFAULT_HORIZON_S,
    DEFAULT_TICK_S,
    ActivityPlan,
    CloudOracle,
    Utilization,
    audit_oracle_calls,
    evaluate_plan,
    plan_pass,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SchedulerConfig:
    elevation_mask_deg: float = 20.0
    acquisition_lead_s: float = DEFAULT_ACQUISITION_LEAD_S
    tick_s: float = DEFAULT_TICK_S
    lookahead_horizon_s: float = DEFAULT_HORIZON_S
    false_positive: float = 0.0
    false_negative: float = 0.0

    def __post_init__(self):
        if not 0 <= self.elevation_mask_deg < 90:
            raise ConfigurationError(
                f"elevation_mask_deg must lie in [0, 90), got {self.elevation_mask_deg}"
            )
        if self.tick_s <= 0:
            raise ConfigurationError(f"tick_s must be > 0, got {self.tick_s}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SchedulerConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown scheduler keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


class SchedulerStage(BaseStage):
    """Plans the pass from cloud look-ahead and scores the plan afterwards."""

    name = "scheduler"

    def __init__(
        self,
        config: Dict[str, Any],
        params: SchedulerConfig,
        geometry: PassGeometry,
        clouds: CloudField,
    ):
        super().__init__(config)
        self.params = params
        self.geometry = geometry
        self.clouds = clouds
        self.oracle: Optional[CloudOracle] = None
        self.plan: Optional[ActivityPlan] = None
        self.utilization: Optional[Utilization] = None

    def make_plan(self, rng: RandomBitSource) -> ActivityPlan:
        p = self.params
        self.oracle = CloudOracle(self.clouds, p.false_positive, p.false_negative, rng)
        self.plan = plan_pass(
            self.geometry,
            self.oracle,
            p.elevation_mask_deg,
            p.acquisition_lead_s,
            p.tick_s,
            p.lookahead_horizon_s,
        )
        overreach = audit_oracle_calls(self.oracle, p.lookahead_horizon_s)
        if overreach:
            raise ConfigurationError(f"{len(overreach)} oracle queries looked past the horizon")
        return self.plan

    def evaluate(self, sim_results: Optional[Dict[str, Any]] = None) -> Utilization:
        if self.plan is None:
            raise ConfigurationError("no plan to evaluate")
        self.utilization = evaluate_plan(self.plan, self.clouds, sim_results)
        return self.utilization

    def summarize(self) -> Dict[str, Any]:
        summary: Dict[str, Any] = {
            "segments": len(self.plan.timeline) if self.plan else 0,
            "oracle_queries": len(self.oracle.log) if self.oracle else 0,
        }
        if self.utilization is not None:
            summary.update(self.utilization.to_dict())
        return summary

    def format_for_report(self, summary: Dict[str, Any]) -> List[str]:
        if "qkd_seconds" not in summary:
            return [f"scheduler: {summary['segments']} segments"]
        return [
            f"scheduler: {summary['qkd_seconds']:.1f} s QKD, "
            f"{summary['rng_buffer_seconds']:.1f} s RNG buffering, "
            f"{summary['idle_seconds']:.1f} s idle",
            f"scheduler: {summary['acquisitions']} acquisitions "
            f"({summary['wasted_acquisitions']} wasted), "
            f"{summary['missed_clear_seconds']:.1f} s clear sky missed",
        ]
