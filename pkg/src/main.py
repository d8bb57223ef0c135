import argparse
import logging
import os
import sys
from dataclasses import replace

from colorama import init, Fore, Style
from tabulate import tabulate

# Fix import paths
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.calibrate import calibrate, load_calibration_targets, load_taxi_samples, write_config_fragment
from src.config_loader import get_airline_distribution, get_runway_ids, load_sim_config
from src.errors import CalibrationError, ConfigError, ScheduleError, SimulationError
from src.experiment import (DEFAULT_SCENARIOS, day_schedule, emit_results, emit_scenarios, report,
                            resolve_distribution, run_scenarios, smallest_safe_limit, sweep_alpha,
                            sweep_load_limit)
from src.metrics import (format_sweep_report, passenger_weighted_wait, sweep_frame, taxi_out_summary,
                         trend_summary, wait_records)
from src.sim_core import day_seed, run_day
from src.traffic import load_schedule

init(autoreset=True)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def parse_alpha(token):
    """'0.5' | '0,0.5,1' | 'start:stop:step' (inclusive grid)."""
    try:
        if ':' in token:
            start, stop, step = (float(x) for x in token.split(':'))
            if step <= 0:
                raise ValueError
            n = int((stop - start) / step + 1e-9)
            alphas = [round(start + i * step, 10) for i in range(n + 1)]
        else:
            alphas = [float(x) for x in token.split(',') if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an alpha list or start:stop:step grid: '{token}'")
    if not alphas or any(not 0.0 <= a <= 1.0 for a in alphas):
        raise argparse.ArgumentTypeError(f"alpha values must lie in [0, 1]: '{token}'")
    return alphas


def parse_limits(token):
    """'1:15' (inclusive range) or '5,7,9'."""
    try:
        if ':' in token:
            low, high = (int(x) for x in token.split(':'))
            return list(range(low, high + 1))
        return [int(x) for x in token.split(',') if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a load-limit list or range: '{token}'")


def build_parser():
    parser = argparse.ArgumentParser(description="Departure simulator with collaborative virtual queue gate holding")
    parser.add_argument('--config', default='cvq_config.json', help="Simulator config file")
    parser.add_argument('--seed', type=int, help="Master seed (overrides seeds.master_seed)")
    parser.add_argument('--verbose', action='store_true', help="Debug logging")
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help="Simulate one day")
    run.add_argument('--day', type=int, default=0, help="Day index within the seeded batch")
    run.add_argument('--alpha', type=float, help="Push-back policy alpha")
    run.add_argument('--load-limit', type=int, help="Planes-out limit (0 disables gate holding)")
    run.add_argument('--distribution', help="monopoly | top5 | top10 | custom:<path>")
    run.add_argument('--schedule', help="Replay a schedule file instead of drawing one")
    run.add_argument('--out', help="Write the day trace here")

    for name, help_text in (('sweep', "Alpha sweep over seeded days"),
                            ('scenarios', "Alpha sweep per airline distribution")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument('--alpha', type=parse_alpha, help="Alpha list or start:stop:step grid")
        p.add_argument('--days', type=int, help="Days per alpha")
        p.add_argument('--workers', type=int, default=1, help="Worker processes")
        p.add_argument('--out', default=f'results/{name}', help="Output directory")
        if name == 'sweep':
            p.add_argument('--distribution', help="monopoly | top5 | top10 | custom:<path>")
        else:
            p.add_argument('--distribution', action='append',
                           help="Repeatable; defaults to monopoly, top5 and top10")

    cal = sub.add_parser('calibrate', help="Fit taxi and runway parameters")
    cal.add_argument('--targets', default='calibration_targets.json', help="Calibration targets file")
    cal.add_argument('--out', help="Write the fitted config fragment here")

    sub.add_parser('validate-config', help="Check the config and exit")

    rep = sub.add_parser('report', help="Recompute tables from persisted traces")
    rep.add_argument('--out', required=True, help="Result directory of an earlier sweep")

    lim = sub.add_parser('load-limit', help="Throughput against the planes-out limit")
    lim.add_argument('--limits', type=parse_limits, default=list(range(1, 16)), help="e.g. 1:15 or 5,7,9")
    lim.add_argument('--days', type=int, help="Days per limit")
    lim.add_argument('--workers', type=int, default=1, help="Worker processes")
    lim.add_argument('--out', help="Write load_limit.csv here")
    return parser


def with_overrides(config, args):
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
        config = replace(config, seeds=replace(config.seeds, master_seed=args.seed))
    distribution = getattr(args, 'distribution', None)
    if isinstance(distribution, str):
        config = config.with_distribution(*resolve_distribution(distribution))
        get_airline_distribution(config)
    return config


def cmd_run(config, args):
    if args.day < 0:
        raise ConfigError(f"--day must be non-negative, got {args.day}")
    if args.alpha is not None:
        config = config.with_alpha(args.alpha)
    if args.load_limit is not None:
        config = config.with_load_limit(args.load_limit)
    seed = day_seed(config.seeds.master_seed, args.day)
    if args.schedule:
        schedule = load_schedule(args.schedule, gates=config.graph.gates, fleet=config.traffic.fleet_mix,
                                 step_seconds=config.step_seconds)
    else:
        schedule = day_schedule(config, seed)

    print(Fore.CYAN + f"Simulating day {args.day} (seed {seed}, alpha {config.policy.alpha}, "
                      f"load limit {config.load_limit or 'off'}) with {len(schedule)} flights...")
    trace = run_day(config, schedule, seed)
    if len(trace) == 0:
        print(Fore.YELLOW + "No departures scheduled.")
        return EXIT_OK

    records = wait_records(trace.flights, config.minutes_per_step)
    summary = taxi_out_summary(records)
    rows = [
        ["Departures", len(trace)],
        ["Runways", ", ".join(get_runway_ids(config))],
        ["Passenger wait (min)", f"{passenger_weighted_wait(records):.2f}"],
        ["Plane wait (min)", f"{records['wait_minutes'].mean():.2f}"],
        ["Taxi-out mean (min)", f"{summary['taxi_out_mean_min']:.2f}"],
        ["Taxi-out std (min)", f"{summary['taxi_out_std_min']:.2f}"],
        ["Planes out at push-back", f"{summary['planes_out_at_pushback']:.2f}"],
        ["Last wheels-off (step)", int(trace.flights['wheelsoff_step'].max())],
    ]
    print(tabulate(rows, tablefmt='grid'))

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        trace.flights.to_csv(os.path.join(args.out, 'flights.csv'), index=False)
        trace.steps.to_csv(os.path.join(args.out, 'steps.csv'), index=False)
        print(Fore.GREEN + f"Trace written to {args.out}")
    return EXIT_OK


def print_sweep(result):
    print(format_sweep_report(sweep_frame(result.points), trend_summary(result.points)))


def cmd_sweep(config, args):
    print(Fore.CYAN + f"Sweeping {len(args.alpha or config.sweep.grid())} alpha values "
                      f"over {args.days or config.seeds.n_days} days...")
    result = sweep_alpha(config, args.alpha, args.days, args.workers)
    print_sweep(result)
    emit_results(result, args.out)
    print(Fore.GREEN + f"Results written to {args.out}")
    return EXIT_OK


def cmd_scenarios(config, args):
    distributions = args.distribution if args.distribution is not None else list(DEFAULT_SCENARIOS)
    if not distributions:
        print(Fore.YELLOW + "No distributions requested.")
        return EXIT_OK
    results = run_scenarios(config, distributions, args.alpha, args.days, args.workers)
    for label, result in results.items():
        print(Style.BRIGHT + f"\n{label}")
        print_sweep(result)
    table = emit_scenarios(results, args.out)
    print(tabulate(table, headers='keys', tablefmt='grid', floatfmt='.2f', showindex=False))
    print(Fore.GREEN + f"Results written to {args.out}")
    return EXIT_OK


def cmd_calibrate(config, args):
    targets = load_calibration_targets(args.targets)
    base_dir = os.path.dirname(os.path.abspath(args.targets))
    samples = load_taxi_samples(os.path.join(base_dir, targets['taxi']['samples_path']))
    fragment = calibrate(targets, config.graph, samples, config.step_seconds)

    rows = [["taxi.p_stop", fragment['taxi']['p_stop']]]
    for rw in fragment['runways']:
        rows.append([f"runway {rw['id']} p1", rw['p1']])
        rows.append([f"runway {rw['id']} p2", rw['p2']])
    for key, value in fragment['diagnostics'].items():
        rows.append([key, value])
    print(tabulate(rows, headers=['Parameter', 'Value'], tablefmt='grid'))

    if args.out:
        write_config_fragment(fragment, args.out)
        print(Fore.GREEN + f"Fragment written to {args.out}")
    return EXIT_OK


def cmd_validate(config, args):
    rows = [
        ["Lattice", config.lattice_path],
        ["Gates", len(config.graph.gates)],
        ["Runways", ", ".join(get_runway_ids(config))],
        ["Load limit", config.load_limit or 'off'],
        ["Distribution", config.traffic.mode],
        ["Alpha grid", len(config.sweep.grid())],
    ]
    print(tabulate(rows, tablefmt='grid'))
    print(Fore.GREEN + "Config OK.")
    return EXIT_OK


def cmd_report(config, args):
    result = report(args.out)
    print_sweep(result)
    print(Fore.GREEN + f"Tables recomputed in {args.out}")
    return EXIT_OK


def cmd_load_limit(config, args):
    table = sweep_load_limit(config, args.limits, args.days, args.workers)
    print(tabulate(table, headers='keys', tablefmt='grid', floatfmt='.3f', showindex=False))
    best = smallest_safe_limit(table)
    if best is None:
        print(Fore.YELLOW + "Every tested limit costs more than 1% of throughput.")
    else:
        print(Fore.GREEN + f"Smallest limit within 1% of unrestricted throughput: {best}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        table.to_csv(os.path.join(args.out, 'load_limit.csv'), index=False, float_format='%.6f')
    return EXIT_OK


COMMANDS = {
    'run': cmd_run,
    'sweep': cmd_sweep,
    'scenarios': cmd_scenarios,
    'calibrate': cmd_calibrate,
    'validate-config': cmd_validate,
    'report': cmd_report,
    'load-limit': cmd_load_limit,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s")

    try:
        if args.command == 'report':
            return cmd_report(None, args)
        config = with_overrides(load_sim_config(args.config), args)
        return COMMANDS[args.command](config, args)
    except (ConfigError, ScheduleError) as e:
        print(Fore.RED + f"Config Error: {e}")
        return EXIT_CONFIG
    except (CalibrationError, SimulationError) as e:
        print(Fore.RED + f"Run Error: {e}")
        return EXIT_RUNTIME
    except OSError as e:
        print(Fore.RED + f"I/O Error: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
