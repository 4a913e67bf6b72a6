"""Common surface of the subsystem stages a pass runs through."""

import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Mapping, Tuple

logger = logging.getLogger(__name__)


class BaseStage(ABC):
    """
    One subsystem of a pass simulation.

    A stage wraps its model, counts what flows through it during the pass
    and turns those counts into telemetry and report lines afterwards.
    """

    name: str = "stage"

    def __init__(self, config: Mapping[str, Any]):
        """
        Args:
            config: Stage options taken from the scenario
        """
        self.config = dict(config)

    @abstractmethod
    def summarize(self) -> Dict[str, Any]:
        """Telemetry accumulated so far, JSON-serialisable."""

    @abstractmethod
    def format_for_report(self, summary: Dict[str, Any]) -> List[str]:
        """Report lines for a summary, each prefixed with the stage name."""

    def report(self) -> Tuple[Dict[str, Any], List[str]]:
        """
        Telemetry and report lines together.

        A stage that fails here yields `{"error": ...}` and a single
        `"<name>: error"` line so the remaining stages still report.
        """
        try:
            summary = self.summarize()
            return summary, self.format_for_report(summary)
        except Exception as e:
            logger.error(f"Error in {self.name} stage: {e}")
            return {"error": str(e)}, [f"{self.name}: error"]

    def get_report_text(self) -> str:
        _, lines = self.report()
        return "\n".join(lines)
