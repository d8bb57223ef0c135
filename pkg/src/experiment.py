"""
Experiment harness: alpha sweeps over seeded Monte Carlo days, airline
distribution scenarios, load-limit search and result files.

Day i of a batch uses the same derived seed for every alpha, so policies
are compared on identical schedules and identical taxi/runway draws.
"""

import json
import logging
import multiprocessing as mp
import os
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from . import __version__
from .config_loader import SimConfig, config_hash, get_airline_distribution
from .errors import CalibrationError, ConfigError, ScheduleError, SimulationError
from .metrics import (SweepPoint, finalize_sweep, sweep_frame, sweep_point, taxi_out_summary,
                      taxi_std_vs_planes_out, wait_records, wait_vs_active_planes)
from .sim_core import (STREAM_SCHEDULE, DayTrace, day_seed, make_stream, normalise_flight_frame,
                       normalise_step_frame, run_day)
from .traffic import (AirlineDistribution, Schedule, distribution_table,
                      load_schedule, make_airline_distribution, synth_schedule)

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.6f"
DEFAULT_SCENARIOS = ("monopoly", "top5", "top10")
CURVE_COLUMNS = ["curve", "alpha", "bin", "value", "count", "low_confidence"]
TRACE_STR_COLUMNS = {"id": str, "airline": str, "weight_class": str, "runway": str}


@dataclass
class SweepResult:
    points: List[SweepPoint]
    records: Dict[float, pd.DataFrame]
    traces: Dict[Tuple[float, int], DayTrace] = field(repr=False)
    provenance: Dict = field(default_factory=dict)
    distribution: Optional[AirlineDistribution] = None

    @property
    def alphas(self) -> List[float]:
        return [p.alpha for p in self.points]

    def point(self, alpha: float) -> SweepPoint:
        for p in self.points:
            if p.alpha == alpha:
                return p
        raise KeyError(f"alpha {alpha} was not swept")


def day_schedule(config: SimConfig, seed: int, dist: Optional[AirlineDistribution] = None) -> Schedule:
    """The replay file when one is configured, otherwise a synthetic day drawn from `seed`."""
    traffic = config.traffic
    if traffic.schedule_path:
        return load_schedule(traffic.schedule_path, gates=config.graph.gates,
                             fleet=traffic.fleet_mix, step_seconds=config.step_seconds)
    return synth_schedule(
        n_flights=traffic.n_flights,
        rate_profile=traffic.rate_profile,
        fleet=traffic.fleet_mix,
        dist=dist or get_airline_distribution(config),
        rng=make_stream(seed, STREAM_SCHEDULE),
        gates=config.graph.gates,
        step_seconds=config.step_seconds,
    )


def _run_task(task) -> DayTrace:
    config, schedule, seed, alpha, day = task
    try:
        return run_day(config, schedule, seed)
    except (ConfigError, ScheduleError, CalibrationError, SimulationError) as e:
        raise type(e)(f"alpha={alpha}, day={day}: {e}") from e


def _run_tasks(tasks: List[tuple], workers: int) -> List[DayTrace]:
    """Results come back in task order whatever the worker count."""
    if workers <= 1 or len(tasks) <= 1:
        return [_run_task(task) for task in tasks]
    with mp.Pool(processes=workers) as pool:
        return pool.map(_run_task, tasks)


def aggregate(traces: Mapping[Tuple[float, int], DayTrace], alphas: Sequence[float], days: int,
              minutes_per_step: float) -> Tuple[List[SweepPoint], Dict[float, pd.DataFrame]]:
    """Pool each alpha's days in day order and reduce them to sweep points."""
    points, records = [], {}
    for alpha in alphas:
        flights = pd.concat([traces[(alpha, day)].flights for day in range(days)], ignore_index=True)
        records[alpha] = wait_records(flights, minutes_per_step)
        points.append(sweep_point(alpha, records[alpha]))
    return finalize_sweep(points), records


def sweep_alpha(config: SimConfig, alpha_grid: Optional[Sequence[float]] = None,
                days: Optional[int] = None, workers: int = 1) -> SweepResult:
    """Run `days` seeded days at every alpha of the grid; alpha = 0 is the benefit baseline."""
    alphas = list(alpha_grid) if alpha_grid is not None else config.sweep.grid()
    days = days if days is not None else config.seeds.n_days
    if days < 1:
        raise ConfigError(f"days must be at least 1, got {days}")
    if not alphas:
        raise ConfigError("alpha grid is empty")
    if len(set(alphas)) != len(alphas):
        raise ConfigError(f"alpha grid has repeated values: {alphas}")

    master = config.seeds.master_seed
    dist = get_airline_distribution(config)
    seeds = [day_seed(master, day) for day in range(days)]
    schedules = []
    for day, seed in enumerate(seeds):
        try:
            schedules.append(day_schedule(config, seed, dist))
        except ScheduleError as e:
            raise ScheduleError(f"day={day}: {e}") from e

    tasks = [(config.with_alpha(alpha), schedules[day], seeds[day], alpha, day)
             for alpha in alphas for day in range(days)]
    logger.info("[Sweep] %d alpha values x %d days (%s, load limit %s) on %d worker(s)",
                len(alphas), days, dist.mode, config.load_limit, max(workers, 1))
    results = _run_tasks(tasks, workers)
    traces = {(task[3], task[4]): trace for task, trace in zip(tasks, results)}

    points, records = aggregate(traces, alphas, days, config.minutes_per_step)
    provenance = {
        "config_path": config.source_path,
        "config_hash": config_hash(config.source_path) if config.source_path else None,
        "master_seed": master,
        "days": days,
        "alphas": alphas,
        "distribution": dist.mode,
        "custom_path": config.traffic.custom_path,
        "load_limit": config.load_limit,
        "step_seconds": config.step_seconds,
        "version": __version__,
    }
    return SweepResult(points=points, records=records, traces=traces, provenance=provenance,
                       distribution=dist)


def resolve_distribution(token: str) -> Tuple[str, Optional[str]]:
    """'monopoly' | 'top5' | 'top10' | 'custom:<path>' -> (mode, custom path)."""
    if token.startswith("custom:"):
        path = token.split(":", 1)[1]
        if not path:
            raise ConfigError("custom distribution needs a path: custom:<path>")
        return "custom", path
    make_airline_distribution(token)
    return token, None


def scenario_label(mode: str, custom_path: Optional[str]) -> str:
    if mode != "custom":
        return mode
    return os.path.splitext(os.path.basename(custom_path))[0]


def run_scenarios(config: SimConfig, distributions: Sequence[str] = DEFAULT_SCENARIOS,
                  alpha_grid: Optional[Sequence[float]] = None, days: Optional[int] = None,
                  workers: int = 1) -> Dict[str, SweepResult]:
    """One alpha sweep per airline distribution, all on the same day seeds."""
    results = {}
    for token in distributions:
        mode, custom_path = resolve_distribution(token)
        label = scenario_label(mode, custom_path)
        logger.info("[Scenario] %s", label)
        results[label] = sweep_alpha(config.with_distribution(mode, custom_path), alpha_grid, days, workers)
    return results


def scenario_table(results: Mapping[str, SweepResult]) -> pd.DataFrame:
    """Benefit at the largest swept alpha (alpha = 1 on the default grid) per distribution."""
    rows = []
    for label, result in results.items():
        top = max(result.points, key=lambda p: p.alpha)
        rows.append({
            "distribution": label,
            "alpha": top.alpha,
            "benefit_pct": top.benefit_percent,
            "passenger_wait_mean_min": top.passenger_wait_mean,
            "plane_wait_std_min": top.plane_wait_std,
        })
    return pd.DataFrame(rows, columns=["distribution", "alpha", "benefit_pct",
                                       "passenger_wait_mean_min", "plane_wait_std_min"])


def curves_frame(result: SweepResult) -> pd.DataFrame:
    frames = []
    for alpha in result.alphas:
        records = result.records[alpha]
        for name, curve in (("wait_vs_active_planes", wait_vs_active_planes(records)),
                            ("taxi_std_vs_planes_out", taxi_std_vs_planes_out(records))):
            if len(curve) == 0:
                continue
            curve = curve.copy()
            curve.insert(0, "alpha", alpha)
            curve.insert(0, "curve", name)
            frames.append(curve)
    if not frames:
        return pd.DataFrame(columns=CURVE_COLUMNS)
    return pd.concat(frames, ignore_index=True)[CURVE_COLUMNS]


def _trace_stem(alpha: float, day: int) -> str:
    return f"a{alpha:.6f}_d{day:03d}"


def _write_tables(result: SweepResult, out_dir: str) -> None:
    sweep_frame(result.points).to_csv(os.path.join(out_dir, "sweep.csv"), index=False,
                                      float_format=CSV_FLOAT_FORMAT)
    curves_frame(result).to_csv(os.path.join(out_dir, "curves.csv"), index=False,
                                float_format=CSV_FLOAT_FORMAT)


def emit_results(result: SweepResult, out_dir: str) -> List[str]:
    """
    Write sweep.csv, curves.csv, traces/ and provenance.json under
    `out_dir`. Everything except the provenance timestamp is a pure
    function of the config and seed.
    """
    trace_dir = os.path.join(out_dir, "traces")
    try:
        os.makedirs(trace_dir, exist_ok=True)
        _write_tables(result, out_dir)
        for (alpha, day), trace in sorted(result.traces.items()):
            stem = os.path.join(trace_dir, _trace_stem(alpha, day))
            trace.flights.to_csv(f"{stem}_flights.csv", index=False)
            trace.steps.to_csv(f"{stem}_steps.csv", index=False)
        provenance = dict(result.provenance, created_at=datetime.now().isoformat(timespec="seconds"))
        with open(os.path.join(out_dir, "provenance.json"), "w") as f:
            json.dump(provenance, f, indent=4, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise OSError(e.errno, f"Cannot write results to {out_dir}: {e.strerror}", e.filename) from e

    logger.info("[Sweep] results written to %s", out_dir)
    return [os.path.join(out_dir, name) for name in ("sweep.csv", "curves.csv", "traces", "provenance.json")]


def load_provenance(out_dir: str) -> Dict:
    path = os.path.join(out_dir, "provenance.json")
    if not os.path.exists(path):
        raise ConfigError(f"No provenance record in {out_dir}")
    with open(path, "r") as f:
        return json.load(f)


def load_traces(out_dir: str, provenance: Optional[Dict] = None) -> Dict[Tuple[float, int], DayTrace]:
    provenance = provenance or load_provenance(out_dir)
    traces = {}
    for alpha in provenance["alphas"]:
        for day in range(provenance["days"]):
            stem = os.path.join(out_dir, "traces", _trace_stem(alpha, day))
            flights = pd.read_csv(f"{stem}_flights.csv", dtype=TRACE_STR_COLUMNS, keep_default_na=False)
            steps = pd.read_csv(f"{stem}_steps.csv", dtype={"runway": str}, keep_default_na=False)
            traces[(alpha, day)] = DayTrace(
                flights=normalise_flight_frame(flights),
                steps=normalise_step_frame(steps),
                seed=day_seed(provenance["master_seed"], day),
                alpha=alpha,
                load_limit=provenance["load_limit"],
            )
    return traces


def report(out_dir: str) -> SweepResult:
    """Recompute sweep.csv and curves.csv from the persisted traces."""
    provenance = load_provenance(out_dir)
    traces = load_traces(out_dir, provenance)
    points, records = aggregate(traces, provenance["alphas"], provenance["days"],
                                provenance["step_seconds"] / 60.0)
    result = SweepResult(points=points, records=records, traces=traces, provenance=provenance)
    try:
        _write_tables(result, out_dir)
    except OSError as e:
        raise OSError(e.errno, f"Cannot write results to {out_dir}: {e.strerror}", e.filename) from e
    return result


def emit_scenarios(results: Mapping[str, SweepResult], out_dir: str) -> pd.DataFrame:
    """Per-distribution result folders plus distributions.csv and scenarios.csv."""
    table = scenario_table(results)
    dists = {}
    for label, result in results.items():
        emit_results(result, os.path.join(out_dir, label))
        dists[label] = result.distribution
    try:
        os.makedirs(out_dir, exist_ok=True)
        pd.DataFrame(distribution_table(dists), columns=["distribution", "airline", "share"]).to_csv(
            os.path.join(out_dir, "distributions.csv"), index=False, float_format=CSV_FLOAT_FORMAT)
        table.to_csv(os.path.join(out_dir, "scenarios.csv"), index=False, float_format=CSV_FLOAT_FORMAT)
    except OSError as e:
        raise OSError(e.errno, f"Cannot write results to {out_dir}: {e.strerror}", e.filename) from e
    return table


def sweep_load_limit(config: SimConfig, limits: Sequence[int], days: Optional[int] = None,
                     workers: int = 1) -> pd.DataFrame:
    """
    Throughput and taxi-out statistics per load limit, compared against
    gate holding disabled. Limit 0 stands for disabled.
    """
    days = days if days is not None else config.seeds.n_days
    if days < 1:
        raise ConfigError(f"days must be at least 1, got {days}")
    dist = get_airline_distribution(config)
    seeds = [day_seed(config.seeds.master_seed, day) for day in range(days)]
    schedules = [day_schedule(config, seed, dist) for seed in seeds]

    candidates = [0] + sorted({int(n) for n in limits if int(n) > 0})
    tasks = [(config.with_load_limit(limit), schedules[day], seeds[day], config.policy.alpha, day)
             for limit in candidates for day in range(days)]
    results = _run_tasks(tasks, workers)

    rows = []
    for i, limit in enumerate(candidates):
        day_traces = results[i * days:(i + 1) * days]
        flights = pd.concat([t.flights for t in day_traces], ignore_index=True)
        summary = taxi_out_summary(wait_records(flights, config.minutes_per_step))
        makespans = [int(t.flights["wheelsoff_step"].max()) + 1 for t in day_traces if len(t)]
        hours = sum(makespans) * config.step_seconds / 3600.0
        rows.append({
            "load_limit": limit,
            "takeoffs": sum(t.total_takeoffs for t in day_traces),
            "takeoffs_per_hour": sum(t.total_takeoffs for t in day_traces) / hours if hours else 0.0,
            "makespan_min": sum(makespans) / len(makespans) * config.minutes_per_step if makespans else 0.0,
            "taxi_out_mean_min": summary["taxi_out_mean_min"],
            "taxi_out_std_min": summary["taxi_out_std_min"],
            "planes_out_at_pushback": summary["planes_out_at_pushback"],
        })
    table = pd.DataFrame(rows)
    unlimited = table.loc[0, "makespan_min"]
    table["throughput_ratio"] = unlimited / table["makespan_min"]
    return table


def smallest_safe_limit(table: pd.DataFrame, tolerance: float = 0.99) -> Optional[int]:
    """Smallest positive load limit keeping throughput within `tolerance` of no holding."""
    safe = table[(table["load_limit"] > 0) & (table["throughput_ratio"] >= tolerance)]
    if safe.empty:
        return None
    return int(safe["load_limit"].min())
