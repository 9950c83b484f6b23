# strategies/base_strategy.py
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum

from comm_model import AllReduceModel
from model_trace import ModelTrace
from timeline import MergePlan, Timeline, iteration_time

logger = logging.getLogger(__name__)


class Strategy(str, Enum):
    """Gradient communication strategies, in report order."""
    NAIVE = 'naive'
    WFBP = 'wfbp'
    SYNCEASGD = 'synceasgd'
    MGWFBP = 'mgwfbp'

    @property
    def display_name(self) -> str:
        return _DISPLAY_NAMES[self]


_DISPLAY_NAMES = {
    Strategy.NAIVE: 'Naive',
    Strategy.WFBP: 'WFBP',
    Strategy.SYNCEASGD: 'SyncEASGD',
    Strategy.MGWFBP: 'MGWFBP',
}


@dataclass(frozen=True)
class StrategyResult:
    strategy: Strategy
    plan: MergePlan
    timeline: Timeline

    @property
    def iteration_time(self) -> float:
        return self.timeline.iteration_time

    @property
    def comm_nonoverlap(self) -> float:
        return self.timeline.comm_nonoverlap

    @property
    def merged_count(self) -> int:
        return self.plan.merged_count

    @property
    def group_count(self) -> int:
        return self.plan.group_count


class BaseStrategy(ABC):
    """Base class for all strategies"""

    strategy: Strategy

    @abstractmethod
    def build_plan(self, trace: ModelTrace, comm: AllReduceModel) -> MergePlan:
        """Return the merge plan this strategy communicates with"""
        pass

    def evaluate(self, trace: ModelTrace, comm: AllReduceModel) -> StrategyResult:
        """Evaluate the strategy's plan under WFBP scheduling"""
        plan = self.build_plan(trace, comm)
        timeline = iteration_time(trace, plan, comm)
        logger.debug(f"{self.get_name()}: {timeline.iteration_time * 1e6:.3f} us")
        return StrategyResult(strategy=self.strategy, plan=plan, timeline=timeline)

    def get_name(self) -> str:
        """Return strategy display name"""
        return self.strategy.display_name
