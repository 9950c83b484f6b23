# strategies/mgwfbp_strategy.py
from comm_model import AllReduceModel
from model_trace import ModelTrace
from planner import optimal_plan
from timeline import MergePlan
from .base_strategy import BaseStrategy, Strategy


class MGWFBPStrategy(BaseStrategy):
    """WFBP with the planner's optimal gradient merging"""

    strategy = Strategy.MGWFBP

    def build_plan(self, trace: ModelTrace, comm: AllReduceModel) -> MergePlan:
        return optimal_plan(trace, comm)
