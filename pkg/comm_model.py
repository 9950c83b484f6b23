# comm_model.py
"""Linear all-reduce cost model T_ar(M) = a + b*M.

The (a, b) pair comes either from the closed-form rows of the classic
all-reduce algorithms (latency alpha, per-byte transfer beta, per-byte
reduction gamma over N workers) or from a least-squares fit of measured
(message size, time) pairs. All times are seconds, all sizes bytes.
"""
import json
import logging
import math
import numbers
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Any, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


class DegenerateInputError(ValueError):
    """Too few distinct message sizes to determine a line."""


class FitRejectedError(ValueError):
    """A fitted coefficient violates the model invariants."""


class MeasurementParseError(ValueError):
    """Malformed measurement file."""


class AllReduceAlgorithm(str, Enum):
    BINARY_TREE = 'binary_tree'
    RECURSIVE_DOUBLING = 'recursive_doubling'
    RECURSIVE_HALVING_DOUBLING = 'recursive_halving_doubling'
    DOUBLE_BINARY_TREES = 'double_binary_trees'
    RING = 'ring'


class DbtMode(str, Enum):
    """How the double-binary-trees startup term is evaluated.

    The usual closed form reads ``a = 2 log N`` with no latency factor.
    CORRECTED multiplies it by alpha; LITERAL uses it as seconds directly.
    """
    CORRECTED = 'corrected'
    LITERAL = 'literal'


# 'fit' for measured or hand-given coefficients, 'table2' for closed-form rows
MODEL_SOURCES = ('fit', 'table2')

# Algorithms whose formulas assume a power-of-two worker count
_LOG_ALGORITHMS = {
    AllReduceAlgorithm.BINARY_TREE,
    AllReduceAlgorithm.RECURSIVE_DOUBLING,
    AllReduceAlgorithm.RECURSIVE_HALVING_DOUBLING,
    AllReduceAlgorithm.DOUBLE_BINARY_TREES,
}


@dataclass(frozen=True)
class NetworkParams:
    """Point-to-point network description for N workers."""
    alpha: float
    """Latency (startup time) of one point-to-point message, seconds."""
    beta: float
    """Transmission time per byte, seconds/byte."""
    gamma: float
    """Reduction (summation) time per byte, seconds/byte."""
    n_workers: int

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if isinstance(self.n_workers, bool) or not isinstance(self.n_workers, numbers.Integral) or self.n_workers < 2:
            raise ValueError(f"n_workers must be an integer >= 2, got {self.n_workers}")
        object.__setattr__(self, 'n_workers', int(self.n_workers))

    def with_workers(self, n_workers: int) -> 'NetworkParams':
        return NetworkParams(self.alpha, self.beta, self.gamma, n_workers)


@dataclass(frozen=True)
class AllReduceModel:
    """Fitted or derived all-reduce cost T_ar(M) = a + b*M."""
    a: float
    """Startup time, seconds."""
    b: float
    """Time per byte, seconds/byte."""
    source: str = 'fit'
    algo: Optional[str] = None
    n_workers: Optional[int] = None
    dbt_mode: Optional[str] = None
    preset: Optional[str] = None
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.source not in MODEL_SOURCES:
            raise ValueError(f"model source must be one of {MODEL_SOURCES}, got {self.source!r}")
        # a > 0 is required by the planner and the fit, not by the type:
        # a free network (a = b = 0) is a legal timeline input.
        if not (math.isfinite(self.a) and self.a >= 0):
            raise ValueError(f"startup time a must be >= 0, got {self.a}")
        if not (math.isfinite(self.b) and self.b >= 0):
            raise ValueError(f"per-byte time b must be >= 0, got {self.b}")

    def cost(self, size_bytes: float) -> float:
        return allreduce_cost(self, size_bytes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'a_sec': self.a,
            'b_sec_per_byte': self.b,
            'source': self.source,
            'algo': self.algo,
            'n_workers': self.n_workers,
            'dbt_mode': self.dbt_mode,
            'preset': self.preset,
            'warnings': list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AllReduceModel':
        try:
            a = float(data['a_sec'])
            b = float(data['b_sec_per_byte'])
        except (KeyError, TypeError, ValueError) as e:
            raise ValueError(f"model must define numeric a_sec and b_sec_per_byte: {e}")
        return cls(
            a=a,
            b=b,
            source=data.get('source', 'fit'),
            algo=data.get('algo'),
            n_workers=data.get('n_workers'),
            dbt_mode=data.get('dbt_mode'),
            preset=data.get('preset'),
            warnings=tuple(data.get('warnings') or ()),
        )


@dataclass(frozen=True)
class CommMeasurement:
    size_bytes: int
    time_sec: float

    def __post_init__(self):
        if self.size_bytes < 0:
            raise ValueError(f"size_bytes must be >= 0, got {self.size_bytes}")
        if not (math.isfinite(self.time_sec) and self.time_sec > 0):
            raise ValueError(f"time_sec must be > 0, got {self.time_sec}")


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _row_multipliers(algo: AllReduceAlgorithm, n: int) -> Tuple[float, float, float]:
    """Return (k_alpha, k_beta, k_gamma): a = k_alpha*alpha, b = k_beta*beta + k_gamma*gamma."""
    log_n = math.log2(n)
    if algo is AllReduceAlgorithm.BINARY_TREE:
        return 2 * log_n, 2 * log_n, log_n
    if algo is AllReduceAlgorithm.RECURSIVE_DOUBLING:
        return log_n, log_n, log_n
    if algo is AllReduceAlgorithm.RECURSIVE_HALVING_DOUBLING:
        # 2*beta - (2*beta + gamma)/N + gamma
        return 2 * log_n, 2 - 2 / n, 1 - 1 / n
    if algo is AllReduceAlgorithm.DOUBLE_BINARY_TREES:
        return 2 * log_n, 1.0, 1.0
    if algo is AllReduceAlgorithm.RING:
        return 2 * (n - 1), 2 * (n - 1) / n, (n - 1) / n
    raise ValueError(f"Unknown all-reduce algorithm: {algo}")


def coefficients_for(algo: AllReduceAlgorithm, net: NetworkParams,
                     dbt_mode: DbtMode = DbtMode.CORRECTED) -> AllReduceModel:
    """Evaluate the closed-form (a, b) of an all-reduce algorithm."""
    algo = AllReduceAlgorithm(algo)
    dbt_mode = DbtMode(dbt_mode)
    n = net.n_workers
    warnings: List[str] = []

    if algo in _LOG_ALGORITHMS and not _is_power_of_two(n):
        msg = (f"{algo.value}: N={n} is not a power of two; "
               f"log2(N)={math.log2(n):.4f} is used as a real number")
        logger.warning(msg)
        warnings.append(msg)

    k_alpha, k_beta, k_gamma = _row_multipliers(algo, n)
    a = k_alpha * net.alpha
    b = k_beta * net.beta + k_gamma * net.gamma

    mode = None
    if algo is AllReduceAlgorithm.DOUBLE_BINARY_TREES:
        mode = dbt_mode.value
        if dbt_mode is DbtMode.LITERAL:
            a = k_alpha
            msg = f"double_binary_trees: literal mode, a = 2*log2(N) = {a:.6g} s without alpha"
            logger.warning(msg)
            warnings.append(msg)

    logger.debug(f"{algo.value} N={n}: a={a:.6g} s, b={b:.6g} s/B")
    return AllReduceModel(a=a, b=b, source='table2', algo=algo.value, n_workers=n,
                          dbt_mode=mode, warnings=tuple(warnings))


def allreduce_cost(model: AllReduceModel, size_bytes: float) -> float:
    """T_ar(M) = a + b*M in seconds."""
    return model.a + model.b * size_bytes


def fit_model(measurements: Sequence[CommMeasurement], weighting: str = 'relative') -> AllReduceModel:
    """Least-squares line through (size_bytes, time_sec).

    weighting='relative' scales every residual by 1/time so that each
    measurement counts by its relative error; weighting='none' is plain OLS.
    Both are exact on noiseless linear data.
    """
    if weighting not in ('relative', 'none'):
        raise ValueError(f"Unknown weighting: {weighting}")

    sizes = np.array([m.size_bytes for m in measurements], dtype=float)
    times = np.array([m.time_sec for m in measurements], dtype=float)

    if len(measurements) < 2 or len(np.unique(sizes)) < 2:
        msg = (f"Need at least 2 measurements with 2 distinct sizes, "
               f"got {len(measurements)} measurement(s) and {len(np.unique(sizes))} distinct size(s)")
        logger.error(msg)
        raise DegenerateInputError(msg)

    weights = 1.0 / times if weighting == 'relative' else None
    slope, intercept = np.polyfit(sizes, times, 1, w=weights)
    a, b = float(intercept), float(slope)

    if a <= 0:
        msg = f"Fitted startup time a={a:.6g} s is not positive"
        logger.error(msg)
        raise FitRejectedError(msg)
    if b < 0:
        msg = f"Fitted per-byte time b={b:.6g} s/B is negative"
        logger.error(msg)
        raise FitRejectedError(msg)

    logger.info(f"Fitted all-reduce model from {len(measurements)} points: a={a:.6g} s, b={b:.6g} s/B")
    return AllReduceModel(a=a, b=b, source='fit')


def load_measurements(path_or_stream) -> List[CommMeasurement]:
    """Read a `size_bytes,time_us` CSV into measurements (times converted to seconds)."""
    try:
        frame = pd.read_csv(path_or_stream)
    except Exception as e:
        raise MeasurementParseError(f"Unable to read measurement CSV: {e}")

    missing = [col for col in ('size_bytes', 'time_us') if col not in frame.columns]
    if missing:
        raise MeasurementParseError(f"Measurement CSV lacks column(s): {', '.join(missing)}")

    measurements = []
    for row_number, (size, time_us) in enumerate(zip(frame['size_bytes'], frame['time_us']), start=1):
        try:
            size_f = float(size)
            time_f = float(time_us)
        except (TypeError, ValueError):
            raise MeasurementParseError(f"row {row_number}: non-numeric value ({size!r}, {time_us!r})")
        if not math.isfinite(size_f) or size_f != int(size_f):
            raise MeasurementParseError(f"row {row_number}: size_bytes must be an integer, got {size!r}")
        try:
            measurements.append(CommMeasurement(size_bytes=int(size_f), time_sec=time_f * 1e-6))
        except ValueError as e:
            raise MeasurementParseError(f"row {row_number}: {e}")

    logger.debug(f"Loaded {len(measurements)} measurements")
    return measurements


def network_from_model(model: AllReduceModel, algo: AllReduceAlgorithm, n_workers: int,
                       gamma: float = 0.0) -> NetworkParams:
    """Recover (alpha, beta) from an (a, b) observed at a known worker count."""
    algo = AllReduceAlgorithm(algo)
    k_alpha, k_beta, k_gamma = _row_multipliers(algo, n_workers)
    alpha = model.a / k_alpha
    beta = (model.b - k_gamma * gamma) / k_beta
    if beta < 0:
        raise ValueError(f"gamma={gamma} exceeds the per-byte time b={model.b} at N={n_workers}")
    return NetworkParams(alpha=alpha, beta=beta, gamma=gamma, n_workers=n_workers)


# Fitted ring all-reduce coefficients of the measured clusters: (a, b, nodes)
CLUSTER_FITS: Dict[str, Tuple[float, float, int]] = {
    'cluster1': (9.72e-4, 1.97e-9, 8),    # 8-node K80, 10GbE
    'cluster2': (9.08e-4, 7.4e-10, 4),    # 4-node V100, 10GbE
    'cluster3': (2.36e-4, 4.06e-10, 4),   # 4-node V100, 56GbIB
}


def cluster_model(name: str) -> AllReduceModel:
    try:
        a, b, nodes = CLUSTER_FITS[name]
    except KeyError:
        raise ValueError(f"Unknown cluster preset: {name}")
    return AllReduceModel(a=a, b=b, source='fit', algo=AllReduceAlgorithm.RING.value,
                          n_workers=nodes, preset=name)


def cluster_network(name: str) -> NetworkParams:
    """Network parameters of a measured cluster, by ring inversion with gamma = 0."""
    model = cluster_model(name)
    return network_from_model(model, AllReduceAlgorithm.RING, model.n_workers)


def load_model(path_or_stream) -> AllReduceModel:
    """Read a model.json file."""
    try:
        if hasattr(path_or_stream, 'read'):
            data = json.load(path_or_stream)
        else:
            with open(path_or_stream, 'r', encoding='utf-8') as f:
                data = json.load(f)
    except json.JSONDecodeError as e:
        raise ValueError(f"invalid model JSON: {e}")
    if not isinstance(data, dict):
        raise ValueError("model file must hold a JSON object")
    return AllReduceModel.from_dict(data)


def save_model(model: AllReduceModel, path_or_stream):
    text = json.dumps(model.to_dict(), indent=2) + '\n'
    if hasattr(path_or_stream, 'write'):
        path_or_stream.write(text)
    else:
        with open(path_or_stream, 'w', encoding='utf-8') as f:
            f.write(text)
