# strategies/synceasgd_strategy.py
from comm_model import AllReduceModel
from model_trace import ModelTrace
from timeline import MergePlan
from .base_strategy import BaseStrategy, Strategy


class SyncEASGDStrategy(BaseStrategy):
    """All gradients merged into one all-reduce after the backward pass"""

    strategy = Strategy.SYNCEASGD

    def build_plan(self, trace: ModelTrace, comm: AllReduceModel) -> MergePlan:
        return MergePlan.all_merged(trace.num_layers)
