# strategies/naive_strategy.py
from comm_model import AllReduceModel
from model_trace import ModelTrace
from timeline import MergePlan, sequential_timeline
from .base_strategy import BaseStrategy, Strategy, StrategyResult


class NaiveStrategy(BaseStrategy):
    """Layer-wise all-reduces issued only after the full backward pass"""

    strategy = Strategy.NAIVE

    def build_plan(self, trace: ModelTrace, comm: AllReduceModel) -> MergePlan:
        return MergePlan.all_normal(trace.num_layers)

    def evaluate(self, trace: ModelTrace, comm: AllReduceModel) -> StrategyResult:
        return StrategyResult(strategy=self.strategy, plan=self.build_plan(trace, comm),
                              timeline=sequential_timeline(trace, comm))
