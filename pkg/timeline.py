# timeline.py
"""Backward/communication schedule of one training iteration.

Arrays are Python lists in forward order: position 0 is layer 1 and
position L-1 is layer L, the first layer whose gradients become ready.
Communications are serialized: one all-reduce in flight at a time, issued
in backward order.
"""
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Any, Iterable, List, Optional, Sequence, Tuple

from comm_model import AllReduceModel, allreduce_cost
from model_trace import ModelTrace

logger = logging.getLogger(__name__)


class PlanMismatchError(ValueError):
    """Plan length does not match the trace."""


class ZeroComputeError(ValueError):
    """Speedup asked for a trace without any computation time."""


class LayerTag(str, Enum):
    NORMAL = 'normal'
    MERGED = 'merged'


@dataclass(frozen=True)
class MergePlan:
    """Per-layer tags in forward order. A merged layer folds its gradients into layer l-1."""
    tags: Tuple[LayerTag, ...]

    def __post_init__(self):
        tags = tuple(LayerTag(tag) for tag in self.tags)
        object.__setattr__(self, 'tags', tags)
        if not tags:
            raise ValueError("plan must tag at least one layer")
        if tags[0] is not LayerTag.NORMAL:
            raise ValueError("layer 1 cannot be a merged layer")

    @classmethod
    def all_normal(cls, num_layers: int) -> 'MergePlan':
        return cls((LayerTag.NORMAL,) * num_layers)

    @classmethod
    def all_merged(cls, num_layers: int) -> 'MergePlan':
        return cls((LayerTag.NORMAL,) + (LayerTag.MERGED,) * (num_layers - 1))

    @classmethod
    def from_flags(cls, merged: Iterable[bool]) -> 'MergePlan':
        return cls(tuple(LayerTag.MERGED if flag else LayerTag.NORMAL for flag in merged))

    @property
    def num_layers(self) -> int:
        return len(self.tags)

    def is_merged(self, l: int) -> bool:
        if not 1 <= l <= self.num_layers:
            raise IndexError(f"layer index {l} out of range 1..{self.num_layers}")
        return self.tags[l - 1] is LayerTag.MERGED

    def merged_flags(self) -> Tuple[bool, ...]:
        return tuple(tag is LayerTag.MERGED for tag in self.tags)

    @property
    def merged_count(self) -> int:
        return sum(self.merged_flags())

    @property
    def group_count(self) -> int:
        return self.num_layers - self.merged_count

    def groups(self) -> List[List[int]]:
        """Communication groups as ascending 1-based layer lists, lowest group first."""
        groups: List[List[int]] = []
        for l, tag in enumerate(self.tags, start=1):
            if tag is LayerTag.NORMAL:
                groups.append([l])
            else:
                groups[-1].append(l)
        return groups

    def to_dict(self) -> Dict[str, Any]:
        return {'tags': [tag.value for tag in self.tags], 'groups': self.groups()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MergePlan':
        return cls(tuple(data['tags']))


@dataclass(frozen=True)
class CommGroup:
    head: int
    """Normal layer that issues the all-reduce (1-based)."""
    layers: Tuple[int, ...]
    size_bytes: int


@dataclass(frozen=True)
class MergedLayout:
    """Result of folding merged layers into their group heads."""
    groups: Tuple[CommGroup, ...]
    layer_sizes: Tuple[int, ...]
    """Bytes communicated by each layer: group total at heads, 0 at merged layers."""
    merged: Tuple[bool, ...]


def backward_starts(trace: ModelTrace) -> List[float]:
    """tau_b[L] = t_f, tau_b[l] = tau_b[l+1] + t_b[l+1]."""
    t_b = trace.backward_times()
    n = len(t_b)
    tau_b = [0.0] * n
    tau_b[n - 1] = trace.forward_time
    for p in range(n - 2, -1, -1):
        tau_b[p] = tau_b[p + 1] + t_b[p + 1]
    return tau_b


def apply_merge(trace: ModelTrace, plan: MergePlan) -> MergedLayout:
    if plan.num_layers != trace.num_layers:
        msg = f"plan has {plan.num_layers} tags but the trace has {trace.num_layers} layers"
        logger.error(msg)
        raise PlanMismatchError(msg)

    sizes = trace.all_layer_bytes()
    layer_sizes = [0] * len(sizes)
    groups = []
    for members in plan.groups():
        total = sum(sizes[l - 1] for l in members)
        layer_sizes[members[0] - 1] = total
        groups.append(CommGroup(head=members[0], layers=tuple(members), size_bytes=total))
    return MergedLayout(groups=tuple(groups), layer_sizes=tuple(layer_sizes), merged=plan.merged_flags())


def calculate_comm_start(t_c: Sequence[float], t_b: Sequence[float], tau_b: Sequence[float],
                         release_time: Optional[float] = None) -> List[float]:
    """Communication start of every layer, walking from layer L down to layer 1.

    A layer starts once its own gradients are ready and the previous
    all-reduce has finished. With release_time set, no communication may
    start before it (the sequential schedule releases at end of backward).
    """
    n = len(t_c)
    tau_c = [0.0] * n
    ready = tau_b[n - 1] + t_b[n - 1]
    tau_c[n - 1] = ready if release_time is None else max(ready, release_time)
    for p in range(n - 2, -1, -1):
        ready = tau_b[p] + t_b[p]
        if release_time is not None:
            ready = max(ready, release_time)
        tau_c[p] = max(tau_c[p + 1] + t_c[p + 1], ready)
    return tau_c


def comm_durations(layout: MergedLayout, comm: AllReduceModel) -> List[float]:
    return [0.0 if merged else allreduce_cost(comm, size)
            for size, merged in zip(layout.layer_sizes, layout.merged)]


def comm_starts(layout: MergedLayout, tau_b: Sequence[float], t_b: Sequence[float],
                comm: AllReduceModel) -> Tuple[List[float], List[float]]:
    """Return (tau_c, t_c) for a merged layout."""
    t_c = comm_durations(layout, comm)
    return calculate_comm_start(t_c, t_b, tau_b), t_c


@dataclass(frozen=True)
class Timeline:
    tau_b: Tuple[float, ...]
    t_b: Tuple[float, ...]
    tau_c: Tuple[float, ...]
    t_c: Tuple[float, ...]
    merged: Tuple[bool, ...]
    forward_time: float
    iteration_time: float
    comm_nonoverlap: float
    comm: Optional[AllReduceModel] = field(default=None, compare=False)

    @property
    def num_layers(self) -> int:
        return len(self.tau_b)

    @property
    def compute_time(self) -> float:
        """t_f plus the whole backward pass."""
        return self.tau_b[0] + self.t_b[0]

    def to_records(self) -> List[Dict[str, Any]]:
        return [
            {
                'layer': p + 1,
                'tau_b_us': self.tau_b[p] * 1e6,
                't_b_us': self.t_b[p] * 1e6,
                'tau_c_us': self.tau_c[p] * 1e6,
                't_c_us': self.t_c[p] * 1e6,
                'merged': self.merged[p],
            }
            for p in range(self.num_layers)
        ]


def _build_timeline(trace: ModelTrace, tau_b: List[float], tau_c: List[float], t_c: List[float],
                    merged: Tuple[bool, ...], comm: AllReduceModel) -> Timeline:
    t_b = trace.backward_times()
    iteration = tau_c[0] + t_c[0]
    nonoverlap = iteration - (tau_b[0] + t_b[0])
    return Timeline(tau_b=tuple(tau_b), t_b=tuple(t_b), tau_c=tuple(tau_c), t_c=tuple(t_c),
                    merged=merged, forward_time=trace.forward_time,
                    iteration_time=iteration, comm_nonoverlap=nonoverlap, comm=comm)


def iteration_time(trace: ModelTrace, plan: MergePlan, comm: AllReduceModel) -> Timeline:
    """Evaluate a merge plan under WFBP scheduling."""
    layout = apply_merge(trace, plan)
    tau_b = backward_starts(trace)
    tau_c, t_c = comm_starts(layout, tau_b, trace.backward_times(), comm)
    return _build_timeline(trace, tau_b, tau_c, t_c, layout.merged, comm)


def sequential_timeline(trace: ModelTrace, comm: AllReduceModel) -> Timeline:
    """Layer-wise all-reduces held back until the whole backward pass is done."""
    plan = MergePlan.all_normal(trace.num_layers)
    layout = apply_merge(trace, plan)
    t_b = trace.backward_times()
    tau_b = backward_starts(trace)
    t_c = comm_durations(layout, comm)
    tau_c = calculate_comm_start(t_c, t_b, tau_b, release_time=tau_b[0] + t_b[0])
    return _build_timeline(trace, tau_b, tau_c, t_c, layout.merged, comm)


def _compute_end(trace: ModelTrace) -> float:
    return backward_starts(trace)[0] + trace.layers[0].backward_time


def naive_time(trace: ModelTrace, comm: AllReduceModel) -> float:
    """t_f + t_b + one all-reduce per layer, none of them overlapped."""
    total = _compute_end(trace)
    # same summation order as the engine so both agree bit for bit
    for size in reversed(trace.all_layer_bytes()):
        total += allreduce_cost(comm, size)
    return total


def synceasgd_time(trace: ModelTrace, comm: AllReduceModel) -> float:
    """t_f + t_b + a single all-reduce of every gradient."""
    return _compute_end(trace) + allreduce_cost(comm, sum(trace.all_layer_bytes()))


def speedup(n_workers: int, t_f: float, t_b: float, comm_nonoverlap: float) -> float:
    """N / (1 + r) with r the non-overlapped communication to computation ratio."""
    compute = t_f + t_b
    if compute <= 0:
        msg = f"speedup needs t_f + t_b > 0, got {compute}"
        logger.error(msg)
        raise ZeroComputeError(msg)
    return n_workers / (1.0 + comm_nonoverlap / compute)


def timeline_speedup(timeline: Timeline, n_workers: int) -> float:
    return speedup(n_workers, timeline.forward_time, timeline.compute_time - timeline.forward_time,
                   timeline.comm_nonoverlap)


def write_timeline(timeline: Timeline, path_or_stream):
    text = json.dumps(timeline.to_records(), indent=2) + '\n'
    if hasattr(path_or_stream, 'write'):
        path_or_stream.write(text)
    else:
        with open(path_or_stream, 'w', encoding='utf-8') as f:
            f.write(text)
