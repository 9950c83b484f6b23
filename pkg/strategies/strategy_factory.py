# strategies/strategy_factory.py
import logging
from typing import List, Union

from .base_strategy import BaseStrategy, Strategy
from .naive_strategy import NaiveStrategy
from .wfbp_strategy import WFBPStrategy
from .synceasgd_strategy import SyncEASGDStrategy
from .mgwfbp_strategy import MGWFBPStrategy

logger = logging.getLogger(__name__)


class StrategyFactory:
    """Factory to create strategy instances."""

    @staticmethod
    def create_strategy(name: Union[str, Strategy]) -> BaseStrategy:
        """Create a strategy instance by name ('naive', 'wfbp', 'synceasgd', 'mgwfbp')."""

        strategies = {
            Strategy.NAIVE.value: NaiveStrategy,
            Strategy.WFBP.value: WFBPStrategy,
            Strategy.SYNCEASGD.value: SyncEASGDStrategy,
            Strategy.MGWFBP.value: MGWFBPStrategy,
        }

        key = name.value if isinstance(name, Strategy) else str(name).lower()
        strategy_class = strategies.get(key)
        if strategy_class:
            logger.debug(f"Creating strategy {key}: {strategy_class.__name__}")
            return strategy_class()

        error_msg = f"Unknown strategy: {name}"
        logger.error(error_msg)
        raise ValueError(error_msg)

    @staticmethod
    def all_strategies() -> List[BaseStrategy]:
        return [StrategyFactory.create_strategy(strategy) for strategy in Strategy]
