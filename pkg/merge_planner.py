# merge_planner.py
"""Command-line front end: fit cost models, plan merges, simulate and sweep.

Exit codes: 0 ok, 2 bad input, 3 planner error or oracle mismatch,
4 oracle guard, 5 every sweep row failed.
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

# Make sibling modules importable when run as a script from another directory
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from comm_model import (  # noqa: E402
    AllReduceAlgorithm,
    CLUSTER_FITS,
    DbtMode,
    NetworkParams,
    cluster_model,
    cluster_network,
    coefficients_for,
    fit_model,
    load_measurements,
    load_model,
    save_model,
)
from config import get_planner_config  # noqa: E402
from model_trace import (  # noqa: E402
    MODEL_PRESETS,
    ModelTrace,
    SynthSpec,
    bundled_trace,
    load_trace,
    preset_trace,
    save_trace,
    synth_trace,
)
from planner import (  # noqa: E402
    ModelRejectedError,
    OracleGuardError,
    brute_force_plan,
    plan_with_report,
    write_plan,
)
from strategies.base_strategy import Strategy  # noqa: E402
from strategies.strategy_factory import StrategyFactory  # noqa: E402
from sweep import parse_worker_counts, run_sweep  # noqa: E402
from timeline import PlanMismatchError, speedup, write_timeline  # noqa: E402

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PLANNER = 3
EXIT_GUARD = 4
EXIT_ALL_FAILED = 5

# Oracle agreement tolerance, seconds
ORACLE_TOL = 1e-9

BUNDLED_TRACE = 'bundled'


def _read_trace(value: str) -> ModelTrace:
    if value == BUNDLED_TRACE:
        return bundled_trace()
    return load_trace(value)


def cmd_fit(args) -> int:
    if args.measurements:
        model = fit_model(load_measurements(args.measurements), weighting=args.weighting)
    elif args.cluster:
        model = cluster_model(args.cluster)
    elif args.algo:
        if args.workers is None or args.alpha is None:
            raise ValueError("--algo needs --workers and --alpha")
        net = NetworkParams(alpha=args.alpha, beta=args.beta, gamma=args.gamma, n_workers=args.workers)
        model = coefficients_for(AllReduceAlgorithm(args.algo), net, DbtMode(args.dbt_mode))
    else:
        raise ValueError("give a measurement CSV, --cluster or --algo")

    if args.out:
        save_model(model, args.out)
    else:
        save_model(model, sys.stdout)
    logger.info(f"Model ({model.source}): a={model.a:.6g} s, b={model.b:.6g} s/B")
    return EXIT_OK


def cmd_plan(args) -> int:
    trace = _read_trace(args.trace)
    comm = load_model(args.model)
    report = plan_with_report(trace, comm)

    if args.oracle:
        max_layers = args.max_layers or get_planner_config()['oracle_max_layers']
        _, best_time = brute_force_plan(trace, comm, max_layers=max_layers)
        if abs(report.optimal_time - best_time) > ORACLE_TOL:
            logger.error(f"Planner time {report.optimal_time:.12f} s disagrees with "
                         f"exhaustive minimum {best_time:.12f} s")
            return EXIT_PLANNER
        logger.info("Plan agrees with exhaustive search")

    write_plan(report, args.out or sys.stdout)
    return EXIT_OK


def cmd_simulate(args) -> int:
    trace = _read_trace(args.trace)
    comm = load_model(args.model)
    result = StrategyFactory.create_strategy(args.strategy).evaluate(trace, comm)

    if args.out:
        write_timeline(result.timeline, args.out)
    summary = (f"strategy={result.strategy.value} iter_time_us={result.iteration_time * 1e6:.3f} "
               f"comm_nonoverlap_us={result.comm_nonoverlap * 1e6:.3f}")
    if args.workers:
        ratio = speedup(args.workers, trace.forward_time, trace.total_backward_time, result.comm_nonoverlap)
        summary += f" speedup={ratio:.4f}"
    print(summary)
    return EXIT_OK


def cmd_compare(args) -> int:
    trace = _read_trace(args.trace)
    comm = load_model(args.model)
    results = {s.strategy: s.evaluate(trace, comm) for s in StrategyFactory.all_strategies()}
    mg_time = results[Strategy.MGWFBP].iteration_time
    compute = trace.forward_time + trace.total_backward_time

    for strategy, result in results.items():
        line = (f"{strategy.display_name:<10} compute_us={compute * 1e6:.3f} "
                f"comm_nonoverlap_us={result.comm_nonoverlap * 1e6:.3f} "
                f"iter_time_us={result.iteration_time * 1e6:.3f} "
                f"mgwfbp_gain={result.iteration_time / mg_time:.4f}x")
        if args.workers:
            ratio = speedup(args.workers, trace.forward_time, trace.total_backward_time, result.comm_nonoverlap)
            line += f" speedup={ratio:.4f}"
        print(line)
    return EXIT_OK


def _sweep_network(args) -> NetworkParams:
    if args.alpha is not None:
        return NetworkParams(alpha=args.alpha, beta=args.beta, gamma=args.gamma, n_workers=2)
    return cluster_network(args.cluster)


def cmd_sweep(args) -> int:
    trace = _read_trace(args.trace)
    counts = parse_worker_counts(args.workers)
    result = run_sweep(trace, _sweep_network(args), AllReduceAlgorithm(args.algo), counts,
                       dbt_mode=DbtMode(args.dbt_mode))

    result.write_csv(args.out or sys.stdout)
    if args.json:
        result.write_json(args.json)

    if result.failed:
        logger.error("Every sweep row failed")
        return EXIT_ALL_FAILED
    crossing = result.crossing_point()
    if crossing is not None:
        logger.info(f"SyncEASGD overtakes WFBP at N={crossing}")
    return EXIT_OK


def cmd_synth(args) -> int:
    bytes_per_element = 2 if args.fp16 else 4
    if args.preset:
        trace = preset_trace(args.preset, forward_time=args.forward_us * 1e-6,
                             backward_time=args.backward_us * 1e-6, size_sigma=args.sigma,
                             bytes_per_element=bytes_per_element, seed=args.seed)
    else:
        trace = synth_trace(SynthSpec(
            n_layers=args.layers,
            total_params=args.params,
            total_backward_time=args.backward_us * 1e-6,
            forward_time=args.forward_us * 1e-6,
            size_sigma=args.sigma,
            bytes_per_element=bytes_per_element,
            seed=args.seed,
        ))
    save_trace(trace, args.out)
    logger.info(f"Wrote {trace.num_layers}-layer trace to {args.out}")
    return EXIT_OK


def _add_network_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--alpha', type=float, help='Point-to-point latency, seconds')
    parser.add_argument('--beta', type=float, default=0.0, help='Transmission time per byte, seconds')
    parser.add_argument('--gamma', type=float, default=0.0, help='Reduction time per byte, seconds')
    parser.add_argument('--dbt-mode', choices=[m.value for m in DbtMode], default=DbtMode.CORRECTED.value,
                        help='Startup term of the double-binary-trees formula')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Gradient merge planner and WFBP timeline simulator')
    parser.add_argument('--debug', action='store_true', help='Enable detailed logging')
    sub = parser.add_subparsers(dest='command', required=True)
    algos = [a.value for a in AllReduceAlgorithm]

    fit = sub.add_parser('fit', help='Fit or derive an all-reduce cost model')
    fit.add_argument('measurements', nargs='?', help='CSV with size_bytes,time_us')
    fit.add_argument('--weighting', choices=['relative', 'none'], default='relative')
    fit.add_argument('--algo', choices=algos)
    fit.add_argument('--workers', type=int)
    fit.add_argument('--cluster', choices=sorted(CLUSTER_FITS))
    _add_network_flags(fit)
    fit.add_argument('--out', help='model.json path (default: stdout)')
    fit.set_defaults(func=cmd_fit)

    plan = sub.add_parser('plan', help='Compute the optimal merge plan')
    plan.add_argument('trace', help=f"trace.json or '{BUNDLED_TRACE}'")
    plan.add_argument('model', help='model.json')
    plan.add_argument('--oracle', action='store_true', help='Check against exhaustive search')
    plan.add_argument('--max-layers', type=int, help='Layer limit of the exhaustive search')
    plan.add_argument('--out', help='plan.json path (default: stdout)')
    plan.set_defaults(func=cmd_plan)

    simulate = sub.add_parser('simulate', help='Simulate one strategy')
    simulate.add_argument('trace')
    simulate.add_argument('model')
    simulate.add_argument('--strategy', choices=[s.value for s in Strategy], required=True)
    simulate.add_argument('--workers', type=int, help='Worker count for the speedup figure')
    simulate.add_argument('--out', help='timeline.json path')
    simulate.set_defaults(func=cmd_simulate)

    compare = sub.add_parser('compare', help='Compare all strategies')
    compare.add_argument('trace')
    compare.add_argument('model')
    compare.add_argument('--workers', type=int)
    compare.set_defaults(func=cmd_compare)

    sweep = sub.add_parser('sweep', help='Scale all strategies over worker counts')
    sweep.add_argument('trace')
    sweep.add_argument('--algo', choices=algos, default=AllReduceAlgorithm.RING.value)
    sweep.add_argument('--workers', default='4..2048', help="'4..2048' or '4,8,16'")
    sweep.add_argument('--cluster', choices=sorted(CLUSTER_FITS), default='cluster1')
    _add_network_flags(sweep)
    sweep.add_argument('--out', help='results.csv path (default: stdout)')
    sweep.add_argument('--json', help='Long-format JSON path')
    sweep.set_defaults(func=cmd_sweep)

    synth = sub.add_parser('synth', help='Write a synthetic trace')
    synth.add_argument('--out', required=True)
    synth.add_argument('--preset', choices=sorted(MODEL_PRESETS))
    synth.add_argument('--layers', type=int, default=161)
    synth.add_argument('--params', type=int, default=25_500_000)
    synth.add_argument('--forward-us', type=float, default=100_000.0)
    synth.add_argument('--backward-us', type=float, default=270_000.0)
    synth.add_argument('--sigma', type=float, default=1.5)
    synth.add_argument('--seed', type=int, default=7)
    synth.add_argument('--fp16', action='store_true', help='Half-precision gradients')
    synth.set_defaults(func=cmd_synth)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK

    config = get_planner_config()
    logging.basicConfig(
        level=logging.DEBUG if args.debug else config['log_level'],
        format='%(asctime)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )
    if args.debug:
        logging.getLogger().setLevel(logging.DEBUG)
        logger.info("Detailed logging enabled")

    try:
        return args.func(args)
    except OracleGuardError as e:
        logger.error(str(e))
        return EXIT_GUARD
    except (ModelRejectedError, PlanMismatchError) as e:
        logger.error(str(e))
        return EXIT_PLANNER
    except (ValueError, OSError) as e:
        logger.error(str(e))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
