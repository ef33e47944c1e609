"""Command-line entry point: ``dayahead <subcommand> ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .commitment import CommitmentInfeasible, solve_uc
from .dispatch import DispatchInfeasible, economic_dispatch, nodal_prices
from .grid import SUSCEPTANCE_MODES, CaseFormatError, CaseValidationError, load_case
from .network import DisconnectedNetworkError, build_network, dump_matrices
from .scenario import (
    OutputError,
    TopologyMismatchError,
    compare_scenarios,
    emit_plot_data,
    format_value,
    run_day_ahead,
)

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 1, 2, 3, 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _case(args, attr="case"):
    case = load_case(getattr(args, attr))
    if args.susceptance and args.susceptance != case.susceptance_mode:
        case = case.with_susceptance_mode(args.susceptance)
    return case


def cmd_validate(args) -> int:
    case = _case(args)
    build_network(case)
    print(f"{case.name}: ok ({case.bus_count} buses, {len(case.generators)} generators, "
          f"{len(case.lines)} lines, slack bus {case.slack_bus}, {case.susceptance_mode} susceptances)")
    if args.dump_matrices:
        for p in dump_matrices(case, args.out or "."):
            print(p)
    return EXIT_OK


def cmd_run(args) -> int:
    case = _case(args)
    result = run_day_ahead(case, args.uc, args.out, free_first_hour_startup=args.free_first_hour_startup,
                           dump_network=args.dump_matrices)
    print(f"{case.name}: total cost {result.total_cost:.2f} "
          f"(production {result.hourly_social_cost.sum():.2f}, startup {result.hourly_startup_cost.sum():.2f}); "
          f"outputs in {args.out}")
    return EXIT_OK


def cmd_lmp(args) -> int:
    case = _case(args)
    if not 1 <= args.hour <= len(case.demand):
        raise _UsageError(f"--hour must be in 1..{len(case.demand)}")
    net = build_network(case)
    schedule = solve_uc(case, args.uc, net=net, free_first_hour_startup=args.free_first_hour_startup)
    committed = schedule.committed(args.hour)
    print(f"hour {args.hour}: demand {case.demand[args.hour - 1]:g} MW, committed {', '.join(committed) or 'none'}")
    if not committed:
        print("no units committed; prices undefined")
        return EXIT_OK
    result, duals = economic_dispatch(case, args.hour, committed, net)
    prices = nodal_prices(duals, net.T)
    for name, p in zip(case.generator_names, result.output):
        print(f"  {name:>4} {p:10.4f} MW")
    if result.binding_lines:
        print("  binding lines: " + ", ".join(str(i) for i in result.binding_lines))
    print("bus,price")
    for bus, rho in zip(case.buses, prices.prices):
        print(f"{bus},{format_value(rho)}")
    return EXIT_OK


def cmd_compare(args) -> int:
    report = compare_scenarios(_case(args, "base"), _case(args, "variant"), args.out, uc_method=args.uc)
    print(f"peak hour {report.peak_hour}")
    print("bus,base_peak_price,variant_peak_price,delta")
    for r in report.rows:
        print(",".join([str(r.bus), *map(format_value, (r.base_peak_price, r.variant_peak_price, r.delta))]))
    print(f"total cost {report.base.total_cost:.2f} -> {report.variant.total_cost:.2f} "
          f"(delta {report.total_cost_delta:.2f})")
    return EXIT_OK


def cmd_plot_data(args) -> int:
    result = run_day_ahead(_case(args), args.uc, free_first_hour_startup=args.free_first_hour_startup)
    for p in emit_plot_data(result, args.out):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dayahead", description="Day-ahead unit commitment, dispatch and nodal pricing.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, case_flag=True, out_required=False):
        if case_flag:
            p.add_argument("--case", required=True, help="case JSON path or bundled case name")
        p.add_argument("--susceptance", choices=SUSCEPTANCE_MODES, default=None,
                       help="override the case's line susceptance mode")
        p.add_argument("--out", type=Path, required=out_required, help="output directory")

    def uc(p):
        p.add_argument("--uc", choices=("dp", "milp"), default="milp", help="unit commitment method")
        p.add_argument("--free-first-hour-startup", action="store_true",
                       help="do not charge startup costs in hour 1")

    p = sub.add_parser("validate", help="parse and check a case file")
    common(p)
    p.add_argument("--dump-matrices", action="store_true", help="write B, B' and T as CSV to --out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="full 24-hour pipeline with CSV reports")
    common(p, out_required=True)
    uc(p)
    p.add_argument("--dump-matrices", action="store_true", help="also write B, B' and T")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("lmp", help="dispatch and nodal prices for one hour")
    common(p)
    uc(p)
    p.add_argument("--hour", type=int, required=True)
    p.set_defaults(func=cmd_lmp)

    p = sub.add_parser("compare", help="compare peak prices and costs of two cases")
    common(p, case_flag=False, out_required=True)
    p.add_argument("--base", required=True)
    p.add_argument("--variant", required=True)
    p.add_argument("--uc", choices=("dp", "milp"), default="milp")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot-data", help="write per-hour series for plotting")
    common(p, out_required=True)
    uc(p)
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CaseValidationError as exc:
        msgs = "; ".join(str(v) for v in exc.violations)
        print(f"error: invalid case: {msgs}", file=sys.stderr)
        return EXIT_INPUT
    except (CaseFormatError, DisconnectedNetworkError, TopologyMismatchError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CommitmentInfeasible, DispatchInfeasible) as exc:
        print(f"error: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        print(f"error: internal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
