# Responsive operations: cloud look-ahead and pass activity planning
from scheduler.planner import (
    Activity,
    ActivityPlan,
    CloudOracle,
    CloudVerdict,
    Segment,
    Utilization,
    audit_oracle_calls,
    evaluate_plan,
    plan_pass,
)
from scheduler.stage import SchedulerConfig, SchedulerStage

__all__ = [
    "Activity",
    "ActivityPlan",
    "CloudOracle",
    "CloudVerdict",
    "Segment",
    "Utilization",
    "audit_oracle_calls",
    "evaluate_plan",
    "plan_pass",
    "SchedulerConfig",
    "SchedulerStage",
]
