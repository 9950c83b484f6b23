# strategies/wfbp_strategy.py
from comm_model import AllReduceModel
from model_trace import ModelTrace
from timeline import MergePlan
from .base_strategy import BaseStrategy, Strategy


class WFBPStrategy(BaseStrategy):
    """Every layer communicates as soon as its gradients are ready"""

    strategy = Strategy.WFBP

    def build_plan(self, trace: ModelTrace, comm: AllReduceModel) -> MergePlan:
        return MergePlan.all_normal(trace.num_layers)
