#!/usr/bin/env python3
"""Random search for traces on which the greedy merge pass is not optimal.

Usage: run from repository root:
PYTHONPATH=. python scripts/greedy_gap_search.py --trials 2000 --seed 1
"""
import argparse
import sys

import numpy as np

try:
    from comm_model import AllReduceModel
    from model_trace import LayerProfile, ModelTrace
    from planner import exact_plan, greedy_plan
    from timeline import iteration_time
except Exception as e:
    print(f"Failed to import planner modules (is PYTHONPATH set to the repo root?): {e}")
    sys.exit(1)


def random_instance(rng: np.random.Generator, n_layers: int):
    sizes = np.exp(rng.uniform(np.log(1e2), np.log(1e8), size=n_layers))
    layers = tuple(
        LayerProfile(name=f"l{i + 1}", params=max(1, int(sizes[i] // 4)),
                     backward_time=float(rng.uniform(0.0, 5e-3)))
        for i in range(n_layers)
    )
    trace = ModelTrace(layers=layers, forward_time=float(rng.uniform(0.0, 1e-2)))
    comm = AllReduceModel(a=float(np.exp(rng.uniform(np.log(1e-5), np.log(1e-2)))),
                          b=float(np.exp(rng.uniform(np.log(1e-10), np.log(1e-8)))))
    return trace, comm


def main():
    parser = argparse.ArgumentParser(description='Search for greedy merge-pass gaps')
    parser.add_argument('--trials', type=int, default=1000)
    parser.add_argument('--min-layers', type=int, default=3)
    parser.add_argument('--max-layers', type=int, default=12)
    parser.add_argument('--seed', type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    gaps = 0
    for trial in range(args.trials):
        n_layers = int(rng.integers(args.min_layers, args.max_layers + 1))
        trace, comm = random_instance(rng, n_layers)
        greedy = iteration_time(trace, greedy_plan(trace, comm), comm).iteration_time
        best_plan = exact_plan(trace, comm)
        best = iteration_time(trace, best_plan, comm).iteration_time
        if greedy > best + 1e-12 * max(1.0, best):
            gaps += 1
            print(f"trial {trial}: L={n_layers} a={comm.a:.3e} b={comm.b:.3e} "
                  f"greedy={greedy * 1e6:.3f} us optimum={best * 1e6:.3f} us "
                  f"groups={best_plan.groups()}")

    print(f"{gaps} of {args.trials} instance(s) where the greedy pass loses")


if __name__ == '__main__':
    main()
