"""
Pass activity planning from cloud look-ahead.

The planner walks the pass in decision ticks. Above the elevation mask
and not linked, it asks the oracle whether the sky stays clear long
enough to acquire and run at least one QKD tick; if so it schedules an
acquisition followed by QKD, otherwise the slot goes to randomness
buffering. While in QKD it re-checks every tick and falls back to
buffering when the oracle reports cloud.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from channel.geometry import PassGeometry, pass_window, time_above
from channel.link import CloudField
from core.errors import ConfigurationError
from core.rng import RandomBitSource

logger = logging.getLogger(__name__)

DEFAULT_HORIZON_S = 120.0
DEFAULT_TICK_S = 1.0
DEFAULT_ACQUISITION_LEAD_S = 10.0
EDGE_TOLERANCE_S = 1e-9


class CloudVerdict(Enum):
    CLEAR = "Clear"
    BLOCKED = "Blocked"


class Activity(Enum):
    ACQUIRE = "Acquire"
    QKD = "Qkd"
    RNG_BUFFER = "RngBuffer"
    IDLE = "Idle"


@dataclass(frozen=True)
class OracleQuery:
    t: float
    horizon: float
    truth: CloudVerdict
    answer: CloudVerdict


class CloudOracle:
    """
    Look-ahead cloud classifier over a known cloud field.

    "Positive" means Clear: a false positive reports Clear over a blocked
    span, a false negative reports Blocked over a clear one. Each query's
    answer is flipped independently. Every query is logged for audit.
    """

    def __init__(
        self,
        field_: CloudField,
        false_positive: float = 0.0,
        false_negative: float = 0.0,
        rng: Optional[RandomBitSource] = None,
    ):
        for name, rate in (("false_positive", false_positive), ("false_negative", false_negative)):
            if not 0 <= rate <= 1:
                raise ConfigurationError(f"oracle {name} rate must lie in [0, 1], got {rate}")
        if (false_positive or false_negative) and rng is None:
            raise ConfigurationError("an imperfect oracle needs a random source")
        self.field = field_
        self.false_positive = false_positive
        self.false_negative = false_negative
        self.rng = rng
        self.log: List[OracleQuery] = []

    def query(self, t: float, horizon: float) -> CloudVerdict:
        """Is the line of sight clear over [t, t + horizon]?"""
        if horizon < 0:
            raise ConfigurationError(f"oracle horizon must be >= 0, got {horizon}")
        if horizon == 0:
            clear = not self.field.is_blocked(t)
        else:
            clear = self.field.is_clear_over(t, t + horizon)
        truth = CloudVerdict.CLEAR if clear else CloudVerdict.BLOCKED
        answer = truth
        flip = self.false_negative if clear else self.false_positive
        if flip > 0 and self.rng.uniform() < flip:
            answer = CloudVerdict.BLOCKED if clear else CloudVerdict.CLEAR
        self.log.append(OracleQuery(t, horizon, truth, answer))
        return answer


@dataclass(frozen=True)
class Segment:
    start_s: float
    end_s: float
    activity: Activity

    @property
    def duration(self) -> float:
        return self.end_s - self.start_s


@dataclass
class ActivityPlan:
    """Contiguous, non-overlapping activity timeline over the pass window."""

    timeline: List[Segment]
    lookahead_horizon: float
    tick_s: float
    acquisition_lead_s: float
    elevation_mask_deg: float
    pass_start_s: float
    pass_end_s: float
    mask_window: Tuple[float, float]

    def segments(self, activity: Activity) -> List[Segment]:
        return [s for s in self.timeline if s.activity is activity]

    def seconds(self, activity: Activity) -> float:
        return float(sum(s.duration for s in self.segments(activity)))

    def activity_at(self, t: float) -> Activity:
        for s in self.timeline:
            if s.start_s <= t < s.end_s:
                return s.activity
        raise ConfigurationError(f"time {t} s is outside the plan")

    def validate(self) -> None:
        """
        Raises:
            ConfigurationError: The timeline has a gap or overlap, or does
                not span the pass window
        """
        if not self.timeline:
            raise ConfigurationError("empty activity plan")
        if abs(self.timeline[0].start_s - self.pass_start_s) > EDGE_TOLERANCE_S:
            raise ConfigurationError("plan does not start at the pass start")
        if abs(self.timeline[-1].end_s - self.pass_end_s) > EDGE_TOLERANCE_S:
            raise ConfigurationError("plan does not end at the pass end")
        for a, b in zip(self.timeline, self.timeline[1:]):
            if a.end_s != b.start_s:
                raise ConfigurationError(f"plan gap or overlap at {a.end_s} s")

    def columns(self) -> Tuple[List[str], List[List[Any]]]:
        return (
            ["start_s", "end_s", "activity"],
            [
                [s.start_s for s in self.timeline],
                [s.end_s for s in self.timeline],
                [s.activity.value for s in self.timeline],
            ],
        )


def _boundaries(start: float, end: float, tick: float, mask: Tuple[float, float]) -> np.ndarray:
    n = int(np.floor((end - start) / tick + EDGE_TOLERANCE_S))
    grid = start + tick * np.arange(n + 1)
    extra = [end] + [m for m in mask if start < m < end]
    points = np.unique(np.concatenate([grid, extra]))
    # Drop grid points that nearly coincide with a mask edge.
    keep = np.concatenate([[True], np.diff(points) > EDGE_TOLERANCE_S])
    return points[keep]


def _merge(intervals: List[Segment]) -> List[Segment]:
    merged: List[Segment] = []
    for seg in intervals:
        if merged and merged[-1].activity is seg.activity:
            merged[-1] = Segment(merged[-1].start_s, seg.end_s, seg.activity)
        else:
            merged.append(seg)
    return merged


def plan_pass(
    geom: PassGeometry,
    oracle: CloudOracle,
    elevation_mask: float,
    acquisition_lead: float = DEFAULT_ACQUISITION_LEAD_S,
    tick: float = DEFAULT_TICK_S,
    horizon: float = DEFAULT_HORIZON_S,
) -> ActivityPlan:
    """
    Greedy forward sweep over the pass in decision ticks.

    Args:
        geom: Pass geometry
        oracle: Cloud look-ahead
        elevation_mask: Minimum elevation for any optical activity (deg)
        acquisition_lead: Acquisition time before QKD can start (s)
        tick: Decision tick (s)
        horizon: Furthest the oracle may be asked to look ahead (s)
    """
    if tick <= 0 or acquisition_lead < 0 or horizon < 0:
        raise ConfigurationError("tick must be > 0; acquisition lead and horizon >= 0")
    if acquisition_lead > horizon:
        logger.warning(
            f"Look-ahead horizon {horizon} s is shorter than the acquisition lead "
            f"{acquisition_lead} s; decisions only see part of the acquisition window"
        )
    start, end, _ = pass_window(geom)
    mask_start, mask_end = time_above(geom, elevation_mask)
    points = _boundaries(start, end, tick, (mask_start, mask_end))

    intervals: List[Segment] = []
    state = "unlinked"
    acquire_until = 0.0
    for s, e in zip(points[:-1], points[1:]):
        s, e = float(s), float(e)
        above = s >= mask_start - EDGE_TOLERANCE_S and e <= mask_end + EDGE_TOLERANCE_S
        if not above or mask_end <= mask_start:
            intervals.append(Segment(s, e, Activity.IDLE))
            state = "unlinked"
            continue

        if state == "acquire" and s >= acquire_until - EDGE_TOLERANCE_S:
            state = "qkd"
        if state == "acquire":
            intervals.append(Segment(s, e, Activity.ACQUIRE))
            continue
        if state == "qkd":
            if oracle.query(s, min(horizon, tick)) is CloudVerdict.CLEAR:
                intervals.append(Segment(s, e, Activity.QKD))
                continue
            state = "unlinked"
            intervals.append(Segment(s, e, Activity.RNG_BUFFER))
            continue

        needed = acquisition_lead + tick
        enough_pass = mask_end - s >= needed - EDGE_TOLERANCE_S
        if enough_pass and oracle.query(s, min(horizon, needed)) is CloudVerdict.CLEAR:
            if acquisition_lead > 0:
                state = "acquire"
                acquire_until = s + acquisition_lead
                intervals.append(Segment(s, e, Activity.ACQUIRE))
            else:
                state = "qkd"
                intervals.append(Segment(s, e, Activity.QKD))
        else:
            intervals.append(Segment(s, e, Activity.RNG_BUFFER))

    plan = ActivityPlan(
        timeline=_merge(intervals),
        lookahead_horizon=horizon,
        tick_s=tick,
        acquisition_lead_s=acquisition_lead,
        elevation_mask_deg=elevation_mask,
        pass_start_s=start,
        pass_end_s=end,
        mask_window=(mask_start, mask_end),
    )
    plan.validate()
    logger.info(
        f"Planned pass: {plan.seconds(Activity.QKD):.0f} s QKD, "
        f"{plan.seconds(Activity.RNG_BUFFER):.0f} s RNG buffering, "
        f"{len(plan.segments(Activity.ACQUIRE))} acquisitions"
    )
    return plan


def audit_oracle_calls(oracle: CloudOracle, horizon: float) -> List[OracleQuery]:
    """Oracle queries that looked further ahead than the plan's horizon."""
    return [q for q in oracle.log if q.horizon > horizon + EDGE_TOLERANCE_S]


@dataclass
class Utilization:
    qkd_seconds: float
    acquire_seconds: float
    rng_buffer_seconds: float
    idle_seconds: float
    acquisitions: int
    wasted_acquisitions: int
    missed_clear_seconds: float
    qkd_blocked_seconds: float
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = {k: v for k, v in self.__dict__.items() if k != "extra"}
        data.update(self.extra)
        return data


def evaluate_plan(
    plan: ActivityPlan,
    truth: CloudField,
    sim_results: Optional[Dict[str, Any]] = None,
) -> Utilization:
    """
    Score a plan against the true cloud field.

    An acquisition is wasted when its window or the first QKD tick after
    it is blocked in truth. Missed clear time is buffering time at ticks
    where a perfect oracle would have started an acquisition.

    Args:
        plan: Activity plan
        truth: Actual cloud field
        sim_results: Extra figures from the pass simulation to carry along
    """
    lead, tick = plan.acquisition_lead_s, plan.tick_s
    mask_end = plan.mask_window[1]

    wasted = 0
    for seg in plan.segments(Activity.ACQUIRE):
        if not truth.is_clear_over(seg.start_s, seg.start_s + lead + tick):
            wasted += 1

    missed = 0.0
    for seg in plan.segments(Activity.RNG_BUFFER):
        t = seg.start_s
        while t < seg.end_s - EDGE_TOLERANCE_S:
            step_end = min(t + tick, seg.end_s)
            if mask_end - t >= lead + tick - EDGE_TOLERANCE_S and truth.is_clear_over(t, t + lead + tick):
                missed += step_end - t
            t = step_end

    blocked = sum(
        (s.end_s - s.start_s) - truth.clear_seconds(s.start_s, s.end_s)
        for s in plan.segments(Activity.QKD)
    )
    return Utilization(
        qkd_seconds=plan.seconds(Activity.QKD),
        acquire_seconds=plan.seconds(Activity.ACQUIRE),
        rng_buffer_seconds=plan.seconds(Activity.RNG_BUFFER),
        idle_seconds=plan.seconds(Activity.IDLE),
        acquisitions=len(plan.segments(Activity.ACQUIRE)),
        wasted_acquisitions=wasted,
        missed_clear_seconds=float(missed),
        qkd_blocked_seconds=float(blocked),
        extra=dict(sim_results or {}),
    )
