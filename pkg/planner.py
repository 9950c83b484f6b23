# planner.py
"""Gradient-merge planning.

greedy_plan runs the top-down merge pass: layer l is merged into l-1 when
layer l-1 finishes its backward computation less than one startup time `a`
after layer l could start communicating. That pass is not optimal on every
trace, so optimal_plan checks it against exact_plan, a dynamic program over
contiguous communication groups, and keeps whichever is faster.
"""
import itertools
import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Any, Optional, Tuple

from comm_model import AllReduceModel, allreduce_cost
from config import get_planner_config
from model_trace import LayerProfile, ModelTrace
from timeline import (
    MergePlan,
    Timeline,
    apply_merge,
    backward_starts,
    calculate_comm_start,
    iteration_time,
)

logger = logging.getLogger(__name__)

# Relative slack allowed before the greedy pass counts as beaten
CERTIFY_RTOL = 1e-12


class ModelRejectedError(ValueError):
    """Cost model unusable for planning (startup time must be positive)."""


class OracleGuardError(ValueError):
    """Exhaustive enumeration refused: too many layers."""


class CaseError(ValueError):
    """Overlap case asked for layer 1, which has no lower neighbour."""


class Case(str, Enum):
    CASE1 = 'case1'
    """Communication of l finishes before l-1 finishes computing."""
    CASE2 = 'case2'
    """Partial overlap, l-1 finishes less than `a` after l starts communicating."""
    CASE3 = 'case3'
    """Partial overlap with at least `a` of hidden communication."""
    CASE4 = 'case4'
    """l starts communicating only after l-1 has finished computing."""


def _check_model(comm: AllReduceModel):
    if not comm.a > 0:
        msg = f"planning requires a startup time a > 0, got a={comm.a}"
        logger.error(msg)
        raise ModelRejectedError(msg)


def greedy_plan(trace: ModelTrace, comm: AllReduceModel) -> MergePlan:
    """Top-down merge pass, recomputing every communication start after each merge."""
    _check_model(comm)
    n = trace.num_layers
    t_b = trace.backward_times()
    tau_b = backward_starts(trace)
    sizes = trace.all_layer_bytes()
    t_c = [allreduce_cost(comm, size) for size in sizes]
    merged = [False] * n
    tau_c = calculate_comm_start(t_c, t_b, tau_b)

    for p in range(n - 1, 0, -1):
        below = p - 1
        if tau_b[below] + t_b[below] - tau_c[p] < comm.a:
            merged[p] = True
            t_c[p] = 0.0
            sizes[below] += sizes[p]
            t_c[below] = allreduce_cost(comm, sizes[below])
            tau_c = calculate_comm_start(t_c, t_b, tau_b)
            logger.debug(f"merge layer {p + 1} into layer {p}")

    return MergePlan.from_flags(merged)


def exact_plan(trace: ModelTrace, comm: AllReduceModel) -> MergePlan:
    """Minimum-iteration-time plan over all 2^(L-1) plans in O(L^2).

    Works in time order (position 0 is layer L). best_end[v] is the earliest
    time the first v ready layers can all be communicated; the last group is
    [u, v) and starts when both its lowest layer is ready and best_end[u]
    has passed. Ties keep the shortest last group.
    """
    _check_model(comm)
    n = trace.num_layers
    t_b = trace.backward_times()
    tau_b = backward_starts(trace)
    ready = [tau_b[n - 1 - i] + t_b[n - 1 - i] for i in range(n)]
    sizes = trace.all_layer_bytes()
    prefix = [0]
    for i in range(n):
        prefix.append(prefix[-1] + sizes[n - 1 - i])

    best_end = [-math.inf] + [math.inf] * n
    choice = [0] * (n + 1)
    for v in range(1, n + 1):
        for u in range(v - 1, -1, -1):
            end = max(best_end[u], ready[v - 1]) + allreduce_cost(comm, prefix[v] - prefix[u])
            if end < best_end[v]:
                best_end[v] = end
                choice[v] = u

    merged = [True] * n
    v = n
    while v > 0:
        head_layer = n - v + 1
        merged[head_layer - 1] = False
        v = choice[v]
    return MergePlan.from_flags(merged)


@dataclass(frozen=True)
class PlanReport:
    plan: MergePlan
    method: str
    """'greedy' when the top-down pass was optimal, 'exact' otherwise."""
    greedy_time: float
    optimal_time: float
    timeline: Timeline

    def to_dict(self) -> Dict[str, Any]:
        data = self.plan.to_dict()
        data['predicted_iter_time_us'] = self.optimal_time * 1e6
        data['method'] = self.method
        return data


def plan_with_report(trace: ModelTrace, comm: AllReduceModel) -> PlanReport:
    greedy = greedy_plan(trace, comm)
    greedy_timeline = iteration_time(trace, greedy, comm)
    exact = exact_plan(trace, comm)
    exact_timeline = iteration_time(trace, exact, comm)

    greedy_time = greedy_timeline.iteration_time
    exact_time = exact_timeline.iteration_time
    if greedy_time > exact_time + CERTIFY_RTOL * max(1.0, exact_time):
        logger.warning(f"greedy merge pass is {(greedy_time - exact_time) * 1e6:.3f} us slower than "
                       f"the optimum; using the exact plan ({exact.merged_count} merged layer(s))")
        return PlanReport(plan=exact, method='exact', greedy_time=greedy_time,
                          optimal_time=exact_time, timeline=exact_timeline)

    logger.info(f"Plan: {greedy.merged_count} merged layer(s), {greedy.group_count} group(s), "
                f"iteration {greedy_time * 1e6:.3f} us")
    return PlanReport(plan=greedy, method='greedy', greedy_time=greedy_time,
                      optimal_time=greedy_time, timeline=greedy_timeline)


def optimal_plan(trace: ModelTrace, comm: AllReduceModel) -> MergePlan:
    return plan_with_report(trace, comm).plan


def brute_force_plan(trace: ModelTrace, comm: AllReduceModel,
                     max_layers: Optional[int] = None) -> Tuple[MergePlan, float]:
    """Evaluate every plan with the timeline engine and return the fastest.

    Ties go to fewer merged layers, then to the lexicographically smaller
    tag sequence (normal before merged).
    """
    if max_layers is None:
        max_layers = get_planner_config()['oracle_max_layers']
    n = trace.num_layers
    if n > max_layers:
        msg = (f"refusing exhaustive search over {n} layers: 2^{n - 1} = {2 ** (n - 1)} plans "
               f"(limit is {max_layers} layers)")
        logger.error(msg)
        raise OracleGuardError(msg)

    best_key = None
    best_plan = None
    for tail in itertools.product((False, True), repeat=n - 1):
        flags = (False,) + tail
        plan = MergePlan.from_flags(flags)
        time = iteration_time(trace, plan, comm).iteration_time
        key = (time, sum(flags), flags)
        if best_key is None or key < best_key:
            best_key = key
            best_plan = plan

    logger.debug(f"exhaustive search over {2 ** (n - 1)} plans: best {best_key[0]:.9f} s")
    return best_plan, best_key[0]


def case_classify(l: int, timeline: Timeline, comm: Optional[AllReduceModel] = None) -> Case:
    """Overlap case of layer l against layer l-1 on an evaluated timeline."""
    if l == 1:
        raise CaseError("layer 1 has no lower layer to overlap with")
    if not 2 <= l <= timeline.num_layers:
        raise IndexError(f"layer index {l} out of range 2..{timeline.num_layers}")
    comm = comm or timeline.comm
    if comm is None:
        raise ValueError("timeline carries no cost model; pass comm explicitly")

    p = l - 1
    slack = timeline.tau_b[p - 1] + timeline.t_b[p - 1] - timeline.tau_c[p]
    if slack <= 0:
        return Case.CASE4
    if slack >= timeline.t_c[p]:
        return Case.CASE1
    if slack < comm.a:
        return Case.CASE2
    return Case.CASE3


def collapse_groups(trace: ModelTrace, plan: MergePlan) -> ModelTrace:
    """One layer per communication group, carrying the group's params and backward time."""
    layout = apply_merge(trace, plan)
    layers = []
    for group in layout.groups:
        members = [trace.layers[l - 1] for l in group.layers]
        layers.append(LayerProfile(
            name=members[0].name,
            params=sum(m.params for m in members),
            backward_time=sum(m.backward_time for m in members),
        ))
    return ModelTrace(layers=tuple(layers), forward_time=trace.forward_time,
                      bytes_per_element=trace.bytes_per_element)


def write_plan(report: PlanReport, path_or_stream):
    text = json.dumps(report.to_dict(), indent=2) + '\n'
    if hasattr(path_or_stream, 'write'):
        path_or_stream.write(text)
    else:
        with open(path_or_stream, 'w', encoding='utf-8') as f:
            f.write(text)
