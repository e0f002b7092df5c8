"""
Command-line interface for the mixlab laboratory.
Computes mixing diagnostics, rotation-scheme ledgers, sliding-puzzle searches,
seminorm identity checks and counterexample bounds, writing CSV and SVG reports.
"""

import argparse
import math
import sys
from typing import List, Optional

from .bianchini import SemiNormParams, bianchini_seminorm, mixing_scale
from .config import (
    DEFAULT_KAPPA, DEFAULT_RHO, FINE_RHO, SCHEME_KAPPA,
    FlowFamily, GreedyStrategy, PlotKind, RunConfig, SlideMode,
    validate_greedy_strategy, validate_plot_kind, validate_slide_mode,
)
from .counterexample_bounds import growth_curve, upper_bound_probe
from .error_handler import GridMismatchError, error_handler
from .flow_verifier import make_flow, verify_prop22
from .formats import (
    format_value, read_moves, read_set, write_csv,
    write_moves, write_set, write_slide_state,
)
from .plotting import PlotSeries, PlotSpec, emit_svg
from .rotation_mixer import apply_sequence, recursive_scheme, scheme_start, seminorm_ledger
from .slide_torus import bfs_search, goal_state, greedy_mix, start_state
from .torus_grid import GridSpec, make_half_torus, rotate90


class MixlabArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors are a single line on stderr."""

    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _report(message: str):
    """Status lines go to stderr; stdout carries data only."""
    print(message, file=sys.stderr)


def run_config(args) -> RunConfig:
    """Resolved flags of this run, as echoed in CSV headers."""
    flags = {key: value for key, value in vars(args).items()
             if key not in ('func', 'command', 'seed') and value is not None}
    return RunConfig(subcommand=args.command, flags=flags, seed=args.seed)


def default_scheme_eps(N: int) -> Optional[float]:
    """About two cells, kept below 1/8; None when the grid cannot resolve any eps."""
    eps = min(2.0 / N, 1.0 / 16.0)
    if eps < 1.0 / N:
        return None
    return eps


def seminorm_command(args):
    """Print the truncated seminorm of a set."""
    try:
        error_handler.log_operation_start("seminorm", {"set": args.set, "eps": args.eps, "rho": args.rho})

        A = read_set(args.set)
        params = SemiNormParams.build(args.eps, rho=args.rho)
        value = bianchini_seminorm(A, params)
        print(format_value(value))

        error_handler.log_operation_success("seminorm", {"value": value})

    except Exception as e:
        error_handler.log_operation_failure("seminorm", e)
        error_handler.handle_error(e, {
            "operation": "seminorm",
            "set": args.set,
            "eps": args.eps
        })


def mixscale_command(args):
    """Ball-average extremes per radius and the mixing scale."""
    try:
        error_handler.log_operation_start("mixscale", {"set": args.set, "kappa": args.kappa, "eps": args.eps})

        A = read_set(args.set)
        params = SemiNormParams.build(args.eps, rho=args.rho, kappa=args.kappa)
        report = mixing_scale(A, params)
        rows = [(s.r, s.min_avg, s.max_avg) for s in report.per_radius]
        rows.append(('scale', report.scale))
        write_csv(args.csv, run_config(args), ('r', 'min_avg', 'max_avg'), rows)
        _report(f"✅ Mixing scale: {report.describe_scale()}")

        error_handler.log_operation_success("mixscale", {"scale": report.scale})

    except Exception as e:
        error_handler.log_operation_failure("mixscale", e)
        error_handler.handle_error(e, {
            "operation": "mixscale",
            "set": args.set,
            "kappa": args.kappa,
            "eps": args.eps
        })


def run_scheme_command(args):
    """Run the recursive quadrisection scheme and write its outputs."""
    try:
        error_handler.log_operation_start("run_scheme", {"levels": args.levels, "N": args.N})

        spec = GridSpec(N=args.N)
        eps = args.eps if args.eps is not None else default_scheme_eps(args.N)
        params = None
        if eps is not None:
            params = SemiNormParams.build(eps, rho=args.rho, kappa=args.kappa)
        else:
            error_handler.logger.warning(f"N={args.N} is too coarse for any eps; ledger seminorm columns left empty")

        seq, ledger = recursive_scheme(args.levels, spec, params)
        final = apply_sequence(scheme_start(spec), seq)

        if args.out:
            write_set(final, args.out)
            _report(f"📁 Final set written to {args.out}")
        if args.moves:
            write_moves(seq, args.moves)
            _report(f"📁 {len(seq)} moves written to {args.moves}")

        rows = [(row.level, row.moves, row.cost, row.mixing_scale, row.seminorm) for row in ledger.rows]
        header = ('level', 'moves', 'cost', 'mixing_scale', 'seminorm')
        if args.ledger or not (args.out or args.moves):
            write_csv(args.ledger, run_config(args), header, rows)
        _report(f"✅ Scheme with {args.levels} levels: {len(seq)} moves, total cost {float(seq.total_cost):.6g}")

        error_handler.log_operation_success("run_scheme", {"moves": len(seq), "cost": str(seq.total_cost)})

    except Exception as e:
        error_handler.log_operation_failure("run_scheme", e)
        error_handler.handle_error(e, {
            "operation": "run_scheme",
            "levels": args.levels,
            "N": args.N
        })


def ledger_command(args):
    """Seminorm after every move of a move list."""
    try:
        error_handler.log_operation_start("ledger", {"set": args.set, "moves": args.moves, "eps": args.eps})

        A = read_set(args.set)
        seq = read_moves(args.moves)
        params = SemiNormParams.build(args.eps, rho=args.rho, kappa=args.kappa)
        summary = seminorm_ledger(A, seq, params, with_rhs=not args.no_rhs)

        rows = [(row.index, row.seminorm, row.delta, row.cost, row.ratio, row.rhs) for row in summary.rows]
        rows.append(('initial_seminorm', summary.initial_seminorm))
        rows.append(('max_ratio', summary.max_ratio))
        rows.append(('net_delta', summary.net_delta))
        write_csv(args.csv, run_config(args), ('index', 'seminorm', 'delta', 'cost', 'ratio', 'rhs'), rows)
        _report(f"✅ Ledger over {len(seq)} moves: max increase per unit cost {summary.max_ratio:.6g}")

        error_handler.log_operation_success("ledger", {"max_ratio": summary.max_ratio})

    except Exception as e:
        error_handler.log_operation_failure("ledger", e)
        error_handler.handle_error(e, {
            "operation": "ledger",
            "set": args.set,
            "moves": args.moves
        })


def slider_command(args):
    """Exhaustive search or greedy mixing on the sliding-puzzle torus."""
    try:
        error_handler.log_operation_start("slider", {"n": args.n, "mode": args.mode, "strategy": args.strategy})

        mode = validate_slide_mode(args.mode)
        config = run_config(args)

        if mode == SlideMode.BFS:
            start, goal = start_state(args.n), goal_state(args.n)
            rows = []
            for direction, source, target in (('A0->A1', start, goal), ('A1->A0', goal, start)):
                word = bfs_search(args.n, source, target, args.max_depth)
                if word is None:
                    rows.append((direction, None, None))
                    _report(f"⚠️  {direction}: no solution within {args.max_depth} moves")
                else:
                    rows.append((direction, len(word), ' '.join(m.label() for m in word)))
                    _report(f"✅ {direction}: {len(word)} moves")
            write_csv(args.out, config, ('direction', 'distance', 'moves'), rows)
        else:
            report = greedy_mix(args.n, args.budget, validate_greedy_strategy(args.strategy))
            rows = [(step.moves, step.finest_scale_cells, step.parity_agreement) for step in report.history]
            rows.append(('single_cell_moves', report.single_cell_moves))
            write_csv(args.out, config, ('moves', 'finest_scale_cells', 'parity_agreement'), rows)
            if args.state_out:
                write_slide_state(report.state, args.state_out)
                _report(f"📁 Final state written to {args.state_out}")
            _report(f"✅ Greedy {report.strategy.value} mixing used {report.moves_used} moves; "
                    f"finest mixed scale {report.finest_scale_cells} cells, parity agreement {report.parity_agreement:.4f}")

        error_handler.log_operation_success("slider", {"mode": mode.value})

    except Exception as e:
        error_handler.log_operation_failure("slider", e)
        error_handler.handle_error(e, {
            "operation": "slider",
            "n": args.n,
            "mode": args.mode
        })


def verify_prop22_command(args):
    """Compare seminorm growth with the integrated singular form."""
    try:
        error_handler.log_operation_start("verify_prop22", {
            "flow": args.flow, "T": args.T, "eps": args.eps, "N": args.N, "steps": args.steps
        })

        if args.set:
            A = read_set(args.set)
            if args.N is not None and A.spec.N != args.N:
                raise GridMismatchError(f"--N {args.N} does not match the set grid N={A.spec.N}")
        else:
            A = rotate90(make_half_torus(GridSpec(N=args.N)))
        flow = make_flow(args.flow, a=args.a, period=args.period, c=(args.c1, args.c2))
        result = verify_prop22(A, flow, args.T, args.eps, args.steps, rho=args.rho)

        rows = [(t, value) for t, value in zip(result.times, result.integrands)]
        rows.append(('lhs', result.lhs))
        rows.append(('rhs', result.rhs))
        rows.append(('gap', result.gap))
        write_csv(args.csv, run_config(args), ('t', 'integrand'), rows)
        _report(f"✅ Seminorm growth {result.lhs:.6g} vs integrated form {result.rhs:.6g} (relative gap {result.gap:.3g})")

        error_handler.log_operation_success("verify_prop22", {"gap": result.gap})

    except Exception as e:
        error_handler.log_operation_failure("verify_prop22", e)
        error_handler.handle_error(e, {
            "operation": "verify_prop22",
            "flow": args.flow,
            "N": args.N,
            "eps": args.eps
        })


def counterexample_command(args):
    """Decomposition of the multiscale counterexample integral for L' = 2..L."""
    try:
        error_handler.log_operation_start("counterexample", {"M": args.M, "L": args.L})

        curve = growth_curve(args.M, args.L)
        rows = [(row.L, row.eps, row.E1, row.E2, row.E3, row.I, row.paper_floor, row.E3_abs, ';'.join(row.modes))
                for row in curve]
        if args.probe_trials:
            probe = upper_bound_probe(curve[-1].eps, args.probe_trials, args.seed)
            rows.append(('probe_max_ratio', probe.max_ratio))
            rows.append(('probe_bound_ratio', probe.bound_ratio))
        write_csv(args.csv, run_config(args), ('L', 'eps', 'E1', 'E2', 'E3', 'I', 'paper_floor', 'E3_abs', 'modes'), rows)
        last = curve[-1]
        _report(f"✅ L={last.L}: I={last.I:.6g}, I/log(1/eps)={last.I / math.log(1.0 / last.eps):.6g}")

        error_handler.log_operation_success("counterexample", {"I": last.I})

    except Exception as e:
        error_handler.log_operation_failure("counterexample", e)
        error_handler.handle_error(e, {
            "operation": "counterexample",
            "M": args.M,
            "L": args.L
        })


def scheme_cost_plot(levels: int, N: int) -> PlotSpec:
    """Cumulative scheme cost against log(1/eps) with eps = 2^-n."""
    _, ledger = recursive_scheme(levels, GridSpec(N=N))
    points = []
    total = 0.0
    for row in ledger.rows:
        total += float(row.cost)
        points.append((row.level * math.log(2.0), total))
    return PlotSpec(
        title=f"Rotation scheme cost, N={N}",
        x_label="log(1/eps)",
        y_label="cumulative cost",
        series=[PlotSeries(label="quadrisection scheme", points=points)],
    )


def counterexample_plot(M: int, L: int) -> PlotSpec:
    curve = growth_curve(M, L)
    return PlotSpec(
        title=f"Counterexample integral, M={M}",
        x_label="log(1/eps)",
        y_label="value",
        series=[
            PlotSeries(label="I(A, B)", points=[(math.log(1.0 / row.eps), row.I) for row in curve]),
            PlotSeries(label="E1", points=[(math.log(1.0 / row.eps), row.E1) for row in curve]),
            PlotSeries(label="lower bound", points=[(math.log(1.0 / row.eps), row.paper_floor) for row in curve]),
        ],
    )


def plot_command(args):
    """Draw one of the standard figures as SVG."""
    try:
        error_handler.log_operation_start("plot", {"kind": args.kind, "out": args.out})

        kind = validate_plot_kind(args.kind)
        if kind == PlotKind.SCHEME_COST:
            plot = scheme_cost_plot(args.levels, args.N)
        else:
            plot = counterexample_plot(args.M, args.L)
        emit_svg(plot, args.out)
        _report(f"✅ Plot written to {args.out}")

        error_handler.log_operation_success("plot", {"out": args.out})

    except Exception as e:
        error_handler.log_operation_failure("plot", e)
        error_handler.handle_error(e, {
            "operation": "plot",
            "kind": args.kind,
            "out": args.out
        })


def build_parser() -> argparse.ArgumentParser:
    common = MixlabArgumentParser(add_help=False)
    common.add_argument('--seed', type=_non_negative_int, default=0, help='Seed for randomized probes (default 0)')

    parser = MixlabArgumentParser(
        prog='mixlab',
        description="Numerical laboratory for mixing of sets and the Bianchini seminorm",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Seminorm of a stored set
  mixlab seminorm --set half.txt --eps 0.0625 --rho 1.189207115

  # Three levels of the rotation scheme with its ledger
  mixlab run-scheme --levels 3 --N 64 --ledger ledger.csv --out final.txt

  # Exhaustive search on the smallest sliding puzzles
  mixlab slider --n 2 --mode bfs --max-depth 12
  mixlab slider --n 8 --mode greedy --strategy cat-map --budget 2000

  # Seminorm identity along a shear flow
  mixlab verify-prop22 --flow shear --a 1.0 --T 0.3 --eps 0.0625 --N 512 --steps 12 --csv prop.csv

  # Counterexample decomposition and its plot
  mixlab counterexample --M 16 --L 4 --csv bounds.csv
  mixlab plot --kind counterexample --M 16 --L 6 --out bounds.svg

Troubleshooting:
  # Full tracebacks in the log
  MIXLAB_LOG_LEVEL=DEBUG mixlab ...

  # Smoke test of every module
  python -m src.test_system
        """
    )

    subparsers = parser.add_subparsers(dest='command', help='Available commands', required=True)

    seminorm_parser = subparsers.add_parser('seminorm', parents=[common], help='Truncated seminorm of a set')
    seminorm_parser.add_argument('--set', required=True, help='Set file (mixlab-set v1)')
    seminorm_parser.add_argument('--eps', required=True, type=float, help='Smallest radius')
    seminorm_parser.add_argument('--rho', type=float, default=DEFAULT_RHO, help='Radius ratio')
    seminorm_parser.set_defaults(func=seminorm_command)

    mixscale_parser = subparsers.add_parser('mixscale', parents=[common], help='Mixing scale of a set')
    mixscale_parser.add_argument('--set', required=True, help='Set file (mixlab-set v1)')
    mixscale_parser.add_argument('--kappa', required=True, type=float, help='Mixing threshold in (0, 1/2)')
    mixscale_parser.add_argument('--eps', required=True, type=float, help='Smallest radius tested')
    mixscale_parser.add_argument('--rho', type=float, default=DEFAULT_RHO, help='Radius ratio')
    mixscale_parser.add_argument('--csv', help='Output CSV (default: stdout)')
    mixscale_parser.set_defaults(func=mixscale_command)

    scheme_parser = subparsers.add_parser('run-scheme', parents=[common], help='Recursive quadrisection scheme')
    scheme_parser.add_argument('--levels', required=True, type=_positive_int, help='Number of levels n')
    scheme_parser.add_argument('--N', required=True, type=_positive_int, help='Grid size (power of two)')
    scheme_parser.add_argument('--out', help='Write the final set here')
    scheme_parser.add_argument('--ledger', help='Per-level ledger CSV (default: stdout when nothing else is written)')
    scheme_parser.add_argument('--moves', help='Write the move list here')
    scheme_parser.add_argument('--eps', type=float, help='Ledger seminorm eps (default: about two cells)')
    scheme_parser.add_argument('--kappa', type=float, default=SCHEME_KAPPA, help='Ledger mixing threshold')
    scheme_parser.add_argument('--rho', type=float, default=DEFAULT_RHO, help='Radius ratio')
    scheme_parser.set_defaults(func=run_scheme_command)

    ledger_parser = subparsers.add_parser('ledger', parents=[common], help='Seminorm after each move')
    ledger_parser.add_argument('--set', required=True, help='Initial set file')
    ledger_parser.add_argument('--moves', required=True, help='Move list file (mixlab-moves v1)')
    ledger_parser.add_argument('--eps', required=True, type=float, help='Smallest radius')
    ledger_parser.add_argument('--rho', type=float, default=DEFAULT_RHO, help='Radius ratio')
    ledger_parser.add_argument('--kappa', type=float, default=DEFAULT_KAPPA, help='Mixing threshold')
    ledger_parser.add_argument('--no-rhs', action='store_true', help='Skip the per-move bound column')
    ledger_parser.add_argument('--csv', help='Output CSV (default: stdout)')
    ledger_parser.set_defaults(func=ledger_command)

    slider_parser = subparsers.add_parser('slider', parents=[common], help='Sliding-puzzle torus')
    slider_parser.add_argument('--n', required=True, type=_positive_int, help='Half side of the 2n x 2n torus')
    slider_parser.add_argument('--mode', required=True, choices=[m.value for m in SlideMode], help='Search mode')
    slider_parser.add_argument('--budget', type=_non_negative_int, default=1000, help='Greedy move budget')
    slider_parser.add_argument('--strategy', choices=[s.value for s in GreedyStrategy], default=GreedyStrategy.HALVING.value,
                               help='Greedy round shape')
    slider_parser.add_argument('--max-depth', type=_non_negative_int, default=12, help='BFS depth limit')
    slider_parser.add_argument('--out', help='Output CSV (default: stdout)')
    slider_parser.add_argument('--state-out', help='Write the final greedy state here')
    slider_parser.set_defaults(func=slider_command)

    prop_parser = subparsers.add_parser('verify-prop22', parents=[common],
                                        help='Seminorm growth against the integrated singular form')
    prop_parser.add_argument('--flow', required=True, choices=[f.value for f in FlowFamily], help='Flow family')
    prop_parser.add_argument('--a', type=float, default=1.0, help='Shear amplitude')
    prop_parser.add_argument('--period', type=float, default=1.0, help='Alternating shear period')
    prop_parser.add_argument('--c1', type=float, default=0.0, help='Translation velocity, first component')
    prop_parser.add_argument('--c2', type=float, default=0.0, help='Translation velocity, second component')
    prop_parser.add_argument('--T', required=True, type=float, help='Final time')
    prop_parser.add_argument('--eps', required=True, type=float, help='Inner radius')
    prop_parser.add_argument('--N', type=_positive_int, help='Grid size for the default start set')
    prop_parser.add_argument('--set', help='Start set file (default: the band x2 < 1/2)')
    prop_parser.add_argument('--steps', required=True, type=_positive_int, help='Midpoint time steps')
    prop_parser.add_argument('--rho', type=float, default=FINE_RHO, help='Radius ratio of the seminorm grid')
    prop_parser.add_argument('--csv', help='Output CSV (default: stdout)')
    prop_parser.set_defaults(func=verify_prop22_command)

    bounds_parser = subparsers.add_parser('counterexample', parents=[common],
                                          help='Multiscale counterexample decomposition')
    bounds_parser.add_argument('--M', required=True, type=int, help='Scale exponent (>= 11)')
    bounds_parser.add_argument('--L', required=True, type=int, help='Number of levels (>= 2)')
    bounds_parser.add_argument('--probe-trials', type=_non_negative_int, default=0,
                               help='Random separated unions tried by the upper-bound probe')
    bounds_parser.add_argument('--csv', help='Output CSV (default: stdout)')
    bounds_parser.set_defaults(func=counterexample_command)

    plot_parser = subparsers.add_parser('plot', parents=[common], help='Standalone SVG figures')
    plot_parser.add_argument('--kind', required=True, choices=[k.value for k in PlotKind], help='Figure')
    plot_parser.add_argument('--out', required=True, help='Output SVG path')
    plot_parser.add_argument('--levels', type=_positive_int, help='Scheme levels (scheme-cost)')
    plot_parser.add_argument('--N', type=_positive_int, help='Grid size (scheme-cost)')
    plot_parser.add_argument('--M', type=int, help='Scale exponent (counterexample)')
    plot_parser.add_argument('--L', type=int, help='Number of levels (counterexample)')
    plot_parser.set_defaults(func=plot_command)

    return parser


def _check_usage(parser: argparse.ArgumentParser, args):
    """Flag combinations argparse cannot express."""
    if args.command == 'plot':
        if args.kind == PlotKind.SCHEME_COST.value and (args.levels is None or args.N is None):
            parser.error("plot --kind scheme-cost requires --levels and --N")
        if args.kind == PlotKind.COUNTEREXAMPLE.value and (args.M is None or args.L is None):
            parser.error("plot --kind counterexample requires --M and --L")
    if args.command == 'verify-prop22' and args.N is None and args.set is None:
        parser.error("verify-prop22 requires --N or --set")


def dispatch(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; 0 on success, 2 on usage error, 1 on computation error."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_usage(parser, args)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    error_handler.setup_logging()
    if not error_handler.validate_environment():
        return 1

    try:
        args.func(args)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1
    except Exception as e:
        try:
            error_handler.handle_error(e, {"command": args.command})
        except SystemExit as exit_:
            return exit_.code if isinstance(exit_.code, int) else 1
    return 0


def main():
    """Main CLI entry point."""
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
