"""
Waiting-time and fairness metrics computed from day traces.

Plane waiting time runs from ready to wheels-off, so gate holding counts.
Passenger waiting time is the plane waiting time weighted by passengers.
Standard deviations are population statistics (ddof=0).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import spearmanr
from tabulate import tabulate

from .traffic import WEIGHT_CLASSES

logger = logging.getLogger(__name__)

MINUTES_PER_STEP = 0.5
MIN_BIN_COUNT = 20

WAIT_COLUMNS = [
    "wait_minutes", "taxi_out_minutes", "passengers", "weight_class", "airline",
    "active_planes_at_ready", "planes_out_at_pushback",
]


@dataclass(frozen=True)
class WaitRecord:
    wait_minutes: float
    passengers: int
    weight_class: str
    airline: str
    active_planes_at_ready: int
    planes_out_at_pushback: int
    taxi_out_minutes: float = 0.0


def records_frame(records: Iterable[WaitRecord]) -> pd.DataFrame:
    return pd.DataFrame([vars(r) for r in records], columns=WAIT_COLUMNS)


def wait_records(flights: pd.DataFrame, minutes_per_step: float = MINUTES_PER_STEP) -> pd.DataFrame:
    """Wait records from the per-aircraft part of one or more day traces."""
    return pd.DataFrame({
        "wait_minutes": (flights["wheelsoff_step"] - flights["ready_step"]) * minutes_per_step,
        "taxi_out_minutes": (flights["wheelsoff_step"] - flights["pushback_step"]) * minutes_per_step,
        "passengers": flights["passengers"],
        "weight_class": flights["weight_class"],
        "airline": flights["airline"],
        "active_planes_at_ready": flights["active_planes_at_ready"],
        "planes_out_at_pushback": flights["planes_out_at_pushback"],
    }, columns=WAIT_COLUMNS)


def passenger_weighted_wait(records: pd.DataFrame) -> float:
    if len(records) == 0:
        raise ValueError("Passenger-weighted wait of an empty record set is undefined")
    weights = records["passengers"].to_numpy(dtype=float)
    if weights.sum() <= 0:
        raise ValueError("Passenger-weighted wait needs at least one passenger")
    return float(np.dot(weights, records["wait_minutes"].to_numpy(dtype=float)) / weights.sum())


def wait_std(records: pd.DataFrame, weight_class: Optional[str] = None) -> float:
    if weight_class is not None:
        records = records[records["weight_class"] == weight_class]
    if len(records) < 2:
        raise ValueError(f"Need at least 2 records for a standard deviation, got {len(records)}")
    return float(np.std(records["wait_minutes"].to_numpy(dtype=float)))


@dataclass
class SweepPoint:
    alpha: float
    passenger_wait_mean: float
    plane_wait_mean: float
    plane_wait_std: float
    per_class: Dict[str, Dict[str, float]] = field(default_factory=dict)
    benefit_percent: float = 0.0
    n_flights: int = 0


def sweep_point(alpha: float, records: pd.DataFrame) -> SweepPoint:
    """Aggregate the pooled records of every day simulated at `alpha`."""
    per_class = {}
    for weight_class in WEIGHT_CLASSES:
        subset = records[records["weight_class"] == weight_class]
        per_class[weight_class] = {
            "wait_mean": float(subset["wait_minutes"].mean()) if len(subset) else math.nan,
            "wait_std": wait_std(subset) if len(subset) >= 2 else math.nan,
        }
    return SweepPoint(
        alpha=alpha,
        passenger_wait_mean=passenger_weighted_wait(records),
        plane_wait_mean=float(records["wait_minutes"].mean()),
        plane_wait_std=wait_std(records),
        per_class=per_class,
        n_flights=len(records),
    )


def benefit_percent(sweep: SweepPoint, baseline: SweepPoint) -> float:
    """Passenger waiting time saved relative to the FCFS baseline (negative = worse)."""
    if not baseline.passenger_wait_mean > 0:
        raise ValueError("Baseline passenger waiting time must be positive")
    return 100.0 * (baseline.passenger_wait_mean - sweep.passenger_wait_mean) / baseline.passenger_wait_mean


def per_type_evolution(sweep: SweepPoint, baseline: SweepPoint) -> Dict[str, float]:
    """
    Change of each class's mean wait relative to the same class at alpha = 0.
    A class without a positive baseline mean gets NaN.
    """
    evolution = {}
    for weight_class in WEIGHT_CLASSES:
        base = baseline.per_class.get(weight_class, {}).get("wait_mean", math.nan)
        current = sweep.per_class.get(weight_class, {}).get("wait_mean", math.nan)
        if not base > 0:
            logger.warning("[Metrics] No positive alpha=0 baseline for %s planes", weight_class)
            evolution[weight_class] = math.nan
            continue
        evolution[weight_class] = 100.0 * (current - base) / base
    return evolution


def wait_vs_active_planes(records: pd.DataFrame, bin_width: int = 1,
                          min_count: int = MIN_BIN_COUNT) -> pd.DataFrame:
    """Passenger-weighted wait per bin of active planes at ready time."""
    if len(records) == 0:
        return pd.DataFrame(columns=["bin", "value", "count", "low_confidence"])
    bins = (records["active_planes_at_ready"] // bin_width) * bin_width
    rows = []
    for b, group in records.groupby(bins, sort=True):
        rows.append({
            "bin": int(b),
            "value": passenger_weighted_wait(group),
            "count": len(group),
            "low_confidence": len(group) < min_count,
        })
    curve = pd.DataFrame(rows)
    flagged = int(curve["low_confidence"].sum())
    if flagged:
        logger.warning("[Metrics] %d active-plane bins below %d samples", flagged, min_count)
    return curve


def taxi_std_vs_planes_out(records: pd.DataFrame, min_count: int = MIN_BIN_COUNT) -> pd.DataFrame:
    """Spread of taxi-out time per number of planes already out at push-back."""
    if len(records) == 0:
        return pd.DataFrame(columns=["bin", "value", "count", "low_confidence"])
    rows = []
    for b, group in records.groupby("planes_out_at_pushback", sort=True):
        rows.append({
            "bin": int(b),
            "value": float(np.std(group["taxi_out_minutes"].to_numpy(dtype=float))),
            "count": len(group),
            "low_confidence": len(group) < min_count,
        })
    curve = pd.DataFrame(rows)
    flagged = int(curve["low_confidence"].sum())
    if flagged:
        logger.warning("[Metrics] %d planes-out bins below %d samples", flagged, min_count)
    return curve


def taxi_out_summary(records: pd.DataFrame) -> Dict[str, float]:
    taxi = records["taxi_out_minutes"].to_numpy(dtype=float)
    return {
        "taxi_out_mean_min": float(taxi.mean()),
        "taxi_out_std_min": float(taxi.std()),
        "planes_out_at_pushback": float(records["planes_out_at_pushback"].mean()),
    }


def trend_summary(points: Sequence[SweepPoint]) -> Dict[str, float]:
    """Rank correlation of alpha against passenger wait and against plane-wait spread."""
    alphas = [p.alpha for p in points]
    if len(points) < 3:
        return {"spearman_passenger_wait": math.nan, "spearman_wait_std": math.nan}
    return {
        "spearman_passenger_wait": float(spearmanr(alphas, [p.passenger_wait_mean for p in points])[0]),
        "spearman_wait_std": float(spearmanr(alphas, [p.plane_wait_std for p in points])[0]),
    }


def finalize_sweep(points: List[SweepPoint]) -> List[SweepPoint]:
    """Fill in benefits against the alpha = 0 point (or the first point if 0 was not swept)."""
    if not points:
        return points
    baseline = next((p for p in points if p.alpha == 0.0), points[0])
    for p in points:
        p.benefit_percent = benefit_percent(p, baseline)
    return points


def sweep_frame(points: Sequence[SweepPoint]) -> pd.DataFrame:
    if not points:
        return pd.DataFrame()
    baseline = next((p for p in points if p.alpha == 0.0), points[0])
    rows = []
    for p in points:
        row = {
            "alpha": p.alpha,
            "passenger_wait_mean_min": p.passenger_wait_mean,
            "plane_wait_mean_min": p.plane_wait_mean,
            "plane_wait_std_min": p.plane_wait_std,
            "benefit_pct": p.benefit_percent,
        }
        evolution = per_type_evolution(p, baseline)
        for weight_class in WEIGHT_CLASSES:
            key = weight_class.lower()
            stats = p.per_class.get(weight_class, {})
            row[f"{key}_wait_mean_min"] = stats.get("wait_mean", math.nan)
            row[f"{key}_wait_std_min"] = stats.get("wait_std", math.nan)
            row[f"{key}_evolution_pct"] = evolution[weight_class]
        row["n_flights"] = p.n_flights
        rows.append(row)
    return pd.DataFrame(rows)


def format_sweep_report(frame: pd.DataFrame, trends: Optional[Dict[str, float]] = None) -> str:
    columns = ["alpha", "passenger_wait_mean_min", "plane_wait_mean_min", "plane_wait_std_min", "benefit_pct",
               "small_evolution_pct", "large_evolution_pct", "heavy_evolution_pct"]
    table = tabulate(frame[columns], headers=["alpha", "pax wait", "plane wait", "wait std", "benefit %",
                                              "small %", "large %", "heavy %"],
                     tablefmt="grid", floatfmt=".2f", showindex=False)
    report = f"""
    CVQ PUSH-BACK POLICY SWEEP
    ==========================
    Points: {len(frame)}  Flights per point: {int(frame['n_flights'].iloc[0]) if len(frame) else 0}

{table}
    """
    if trends:
        report += (f"\n    Spearman(alpha, passenger wait) = {trends['spearman_passenger_wait']:.3f}"
                   f"\n    Spearman(alpha, wait std)       = {trends['spearman_wait_std']:.3f}\n")
    return report
