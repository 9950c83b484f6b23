# sweep.py
"""Scaling studies: every strategy at every worker count for one all-reduce algorithm."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from comm_model import AllReduceAlgorithm, DbtMode, NetworkParams, coefficients_for
from config import get_planner_config
from model_trace import ModelTrace
from strategies.base_strategy import Strategy
from strategies.strategy_factory import StrategyFactory
from timeline import MergePlan, speedup

logger = logging.getLogger(__name__)

DEFAULT_WORKER_COUNTS: Tuple[int, ...] = tuple(2 ** k for k in range(2, 12))

CSV_COLUMNS = ['n_workers', 'strategy', 'algo', 'iter_time_us', 'comm_nonoverlap_us',
               'speedup', 'n_merged', 'n_groups', 'error']

# Absolute slack for dominance checks, seconds
DOMINANCE_TOL = 1e-9


def merged_layer_count(plan: MergePlan) -> int:
    return plan.merged_count


def group_count(plan: MergePlan) -> int:
    return plan.group_count


def parse_worker_counts(text: str) -> List[int]:
    """Parse '4..2048' (doubling range) or '4,8,16' (explicit list)."""
    text = (text or '').strip()
    if not text:
        raise ValueError("worker list is empty")
    try:
        if '..' in text:
            low_text, high_text = text.split('..', 1)
            low, high = int(low_text), int(high_text)
            if low < 1 or high < low:
                raise ValueError(f"invalid worker range {text!r}")
            counts = []
            n = low
            while n <= high:
                counts.append(n)
                n *= 2
        else:
            counts = [int(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise ValueError(f"cannot parse worker counts {text!r}: {e}")
    if not counts:
        raise ValueError("worker list is empty")
    return sorted(set(counts))


@dataclass(frozen=True)
class SweepRow:
    n_workers: int
    strategy: Strategy
    algo: str
    iter_time: float
    """Seconds, NaN on a failed row."""
    comm_nonoverlap: float
    speedup: float
    n_merged: Optional[int]
    n_groups: Optional[int]
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class SweepResult:
    rows: Tuple[SweepRow, ...]
    num_layers: int

    @property
    def failed(self) -> bool:
        """True when every row failed."""
        return all(not row.ok for row in self.rows)

    def worker_counts(self) -> List[int]:
        return sorted({row.n_workers for row in self.rows})

    def by_workers(self) -> Dict[int, Dict[Strategy, SweepRow]]:
        table: Dict[int, Dict[Strategy, SweepRow]] = {}
        for row in self.rows:
            if row.ok:
                table.setdefault(row.n_workers, {})[row.strategy] = row
        return table

    def dominance_violations(self) -> List[str]:
        violations = []
        for n, rows in self.by_workers().items():
            times = {strategy: row.iter_time for strategy, row in rows.items()}
            if len(times) < len(Strategy):
                continue
            mg = times[Strategy.MGWFBP]
            if mg > min(times[Strategy.WFBP], times[Strategy.SYNCEASGD]) + DOMINANCE_TOL:
                violations.append(f"N={n}: MGWFBP {mg:.9f} s slower than a baseline")
            others = [t for s, t in times.items() if s is not Strategy.NAIVE]
            if times[Strategy.NAIVE] < max(others) - DOMINANCE_TOL:
                violations.append(f"N={n}: Naive {times[Strategy.NAIVE]:.9f} s faster than another strategy")
            for row in rows.values():
                if row.speedup > n * (1 + 1e-12):
                    violations.append(f"N={n}: {row.strategy.display_name} speedup {row.speedup} exceeds N")
        return violations

    def crossing_point(self) -> Optional[int]:
        """Smallest N at which SyncEASGD beats WFBP, if any."""
        for n, rows in sorted(self.by_workers().items()):
            if Strategy.WFBP in rows and Strategy.SYNCEASGD in rows:
                if rows[Strategy.SYNCEASGD].iter_time < rows[Strategy.WFBP].iter_time:
                    return n
        return None

    def all_merged_from(self) -> Optional[int]:
        """Smallest N from which MGWFBP merges every layer for all larger N in the sweep."""
        threshold = None
        for n, rows in sorted(self.by_workers().items(), reverse=True):
            row = rows.get(Strategy.MGWFBP)
            if row is None or row.n_merged != self.num_layers - 1:
                break
            threshold = n
        return threshold

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            [
                {
                    'n_workers': row.n_workers,
                    'strategy': row.strategy.display_name,
                    'algo': row.algo,
                    'iter_time_us': row.iter_time * 1e6,
                    'comm_nonoverlap_us': row.comm_nonoverlap * 1e6,
                    'speedup': row.speedup,
                    'n_merged': row.n_merged,
                    'n_groups': row.n_groups,
                    'error': row.error,
                }
                for row in self.rows
            ],
            columns=CSV_COLUMNS,
        )
        frame['n_merged'] = frame['n_merged'].astype('Int64')
        frame['n_groups'] = frame['n_groups'].astype('Int64')
        return frame

    def write_csv(self, path_or_stream):
        self.to_frame().to_csv(path_or_stream, index=False, float_format='%.6f', na_rep='')

    def write_json(self, path_or_stream):
        """Long-format records, one object per row."""
        text = self.to_frame().to_json(orient='records', indent=2, double_precision=15) + '\n'
        if hasattr(path_or_stream, 'write'):
            path_or_stream.write(text)
        else:
            with open(path_or_stream, 'w', encoding='utf-8') as f:
                f.write(text)


class SweepRunner:
    """Evaluates the four strategies over worker counts, one thread-pool task per N.

    Rows are pure-Python and hold the GIL, so threads interleave rather than
    run in parallel; output is sorted afterwards and does not depend on them.
    """

    def __init__(self, trace: ModelTrace, net: NetworkParams, algo: AllReduceAlgorithm,
                 dbt_mode: DbtMode = DbtMode.CORRECTED, max_workers: Optional[int] = None):
        self.trace = trace
        self.net = net
        self.algo = AllReduceAlgorithm(algo)
        self.dbt_mode = DbtMode(dbt_mode)
        self.max_workers = max_workers or get_planner_config()['max_workers']
        self.strategies = StrategyFactory.all_strategies()

    def evaluate_workers(self, n_workers: int) -> List[SweepRow]:
        """All strategy rows for one worker count; errors become annotated rows."""
        try:
            net = self.net.with_workers(n_workers)
            comm = coefficients_for(self.algo, net, self.dbt_mode)
            rows = []
            for strategy in self.strategies:
                result = strategy.evaluate(self.trace, comm)
                rows.append(SweepRow(
                    n_workers=n_workers,
                    strategy=strategy.strategy,
                    algo=self.algo.value,
                    iter_time=result.iteration_time,
                    comm_nonoverlap=result.comm_nonoverlap,
                    speedup=speedup(n_workers, self.trace.forward_time,
                                    self.trace.total_backward_time, result.comm_nonoverlap),
                    n_merged=merged_layer_count(result.plan),
                    n_groups=group_count(result.plan),
                ))
            return rows
        except Exception as e:
            error = f"N={n_workers}: {e}"
            logger.warning(f"Sweep row failed: {error}")
            return [
                SweepRow(n_workers=n_workers, strategy=strategy.strategy, algo=self.algo.value,
                         iter_time=math.nan, comm_nonoverlap=math.nan, speedup=math.nan,
                         n_merged=None, n_groups=None, error=error)
                for strategy in self.strategies
            ]

    def run(self, worker_counts: Sequence[int]) -> SweepResult:
        counts = list(worker_counts)
        if not counts:
            raise ValueError("worker list is empty")
        logger.info(f"Sweeping {self.algo.value} over {len(counts)} worker count(s) "
                    f"with {self.max_workers} thread(s)")

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            per_n = list(executor.map(self.evaluate_workers, counts))

        order = {strategy: index for index, strategy in enumerate(Strategy)}
        rows = sorted((row for rows in per_n for row in rows),
                      key=lambda row: (row.n_workers, order[row.strategy]))
        result = SweepResult(rows=tuple(rows), num_layers=self.trace.num_layers)
        for violation in result.dominance_violations():
            logger.error(f"Dominance violated: {violation}")
        return result


def run_sweep(trace: ModelTrace, net: NetworkParams, algo: AllReduceAlgorithm,
              worker_counts: Sequence[int] = DEFAULT_WORKER_COUNTS,
              dbt_mode: DbtMode = DbtMode.CORRECTED, max_workers: Optional[int] = None) -> SweepResult:
    return SweepRunner(trace, net, algo, dbt_mode=dbt_mode, max_workers=max_workers).run(worker_counts)
