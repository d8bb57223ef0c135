"""
Calibration of the stochastic airside parameters.

- Taxi stop probability: matched on the mean of unimpeded taxi-out times.
  With k = ceil(route / step distance) moving steps needed, the total
  number of steps is k plus a negative-binomial count of stops, so its
  mean is k / (1 - p).
- Runway Bernoulli pair: matched on the mean and standard deviation of
  take-offs per step in saturated conditions. With s = p1 + p2 and
  v = p1(1 - p1) + p2(1 - p2), p1 and p2 are the roots of
  x^2 - s x + (s^2 - s + v) / 2.
"""

import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .airside import path_length, shortest_path, unimpeded_cells
from .errors import CalibrationError

logger = logging.getLogger(__name__)

MIN_TAXI_SAMPLES = 30
TAXI_TARGET_KEYS = ("samples_path", "reference_gate", "threshold", "step_distance_m")
RUNWAY_TARGET_KEYS = ("id", "threshold", "mean_rate", "std_rate")


@dataclass(frozen=True)
class TaxiCalibrationTarget:
    samples: Tuple[float, ...]  # minutes

    def __post_init__(self):
        if len(self.samples) < MIN_TAXI_SAMPLES:
            raise CalibrationError(f"Need at least {MIN_TAXI_SAMPLES} taxi samples, got {len(self.samples)}")
        if any(not s > 0 for s in self.samples):
            raise CalibrationError("Taxi-out samples must be positive")


@dataclass(frozen=True)
class RunwayCalibrationTarget:
    mean_rate: float  # take-offs per step
    std_rate: float

    @property
    def variance(self) -> float:
        return self.std_rate ** 2


@dataclass(frozen=True)
class TaxiFit:
    p_stop: float
    cells: int
    sample_mean_steps: float
    sample_var_steps: float
    model_var_steps: float

    @property
    def variance_residual(self) -> float:
        return self.sample_var_steps - self.model_var_steps


def fit_stop_probability(target: TaxiCalibrationTarget, path_length_m: float, step_distance_m: float,
                         step_seconds: int = 30) -> TaxiFit:
    if path_length_m <= 0 or step_distance_m <= 0:
        raise CalibrationError("Route length and step distance must be positive")

    k = unimpeded_cells(path_length_m, step_distance_m)
    steps = np.asarray(target.samples, dtype=float) * 60.0 / step_seconds
    mean = float(steps.mean())
    var = float(steps.var())

    if mean < k - 1e-9:
        raise CalibrationError(
            f"Sample mean {mean:.2f} steps is below the deterministic minimum of {k} steps "
            f"({k * step_seconds / 60.0:.1f} min) for a {path_length_m:.0f} m route"
        )

    # k / (1 - p) = mean has an exact solution, so the squared error is zero there
    p = max(0.0, 1.0 - k / mean)
    model_var = k * p / (1.0 - p) ** 2
    fit = TaxiFit(p_stop=p, cells=k, sample_mean_steps=mean, sample_var_steps=var, model_var_steps=model_var)
    logger.info("[Calibrate] p_stop=%.4f (k=%d, mean %.2f steps); variance residual %.2f steps^2",
                p, k, mean, fit.variance_residual)
    return fit


def achievable_variance(mean: float) -> Tuple[float, float]:
    """Range of Var(b1 + b2) over Bernoulli pairs with p1 + p2 = mean."""
    if not 0.0 <= mean <= 2.0:
        return (math.nan, math.nan)
    low = mean - mean ** 2 if mean <= 1.0 else (mean - 1.0) * (2.0 - mean)
    high = mean - mean ** 2 / 2.0
    return (low, high)


def fit_runway_bernoullis(target: RunwayCalibrationTarget) -> Tuple[float, float]:
    """Return (p1, p2) with p1 >= p2 matching the target mean and standard deviation."""
    s, v = target.mean_rate, target.variance
    low, high = achievable_variance(s)
    if not 0.0 <= s <= 2.0:
        raise CalibrationError(f"Mean take-off rate {s} per step is outside [0, 2]")

    # discriminant of x^2 - s x + (s^2 - s + v) / 2, expanded
    disc = 2.0 * s - s * s - 2.0 * v
    if disc < -1e-12:
        raise CalibrationError(
            f"Variance {v:.4f} is not reachable at mean {s}: achievable interval [{low:.4f}, {high:.4f}]"
        )
    root = math.sqrt(max(disc, 0.0))
    p1, p2 = (s + root) / 2.0, (s - root) / 2.0
    if p2 < -1e-12 or p1 > 1.0 + 1e-12:
        raise CalibrationError(
            f"Variance {v:.4f} is not reachable at mean {s}: achievable interval [{low:.4f}, {high:.4f}]"
        )
    return (min(max(p1, 0.0), 1.0), min(max(p2, 0.0), 1.0))


def runway_moments(p1: float, p2: float) -> Tuple[float, float]:
    """Analytic (mean, variance) of take-offs per step."""
    return p1 + p2, p1 * (1.0 - p1) + p2 * (1.0 - p2)


def simulate_runway_moments(p1: float, p2: float, n_steps: int, rng) -> Tuple[float, float]:
    """Monte Carlo (mean, variance) of take-offs per step under a saturated queue."""
    takeoffs = (rng.random(n_steps) < p1).astype(int) + (rng.random(n_steps) < p2).astype(int)
    return float(takeoffs.mean()), float(takeoffs.var())


def simulate_taxi_steps(cells: int, p_stop: float, n: int, rng) -> np.ndarray:
    """Unimpeded taxi durations in steps: `cells` moves plus the stops in between."""
    return cells + rng.negative_binomial(cells, 1.0 - p_stop, size=n)


def load_taxi_samples(path) -> TaxiCalibrationTarget:
    """One duration in minutes per line; '#' starts a comment."""
    if not os.path.exists(path):
        raise CalibrationError(f"Taxi samples file not found: {path}")
    samples: List[float] = []
    with open(path, 'r') as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            try:
                samples.append(float(line))
            except ValueError:
                raise CalibrationError(f"{path}:{line_number}: not a duration: '{line}'")
    return TaxiCalibrationTarget(samples=tuple(samples))


def load_calibration_targets(path) -> Dict:
    if not os.path.exists(path):
        raise CalibrationError(f"Calibration targets not found: {path}")
    with open(path, 'r') as f:
        try:
            targets = json.load(f)
        except json.JSONDecodeError as e:
            raise CalibrationError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(targets, dict) or 'taxi' not in targets or 'runways' not in targets:
        raise CalibrationError("Calibration targets must contain 'taxi' and 'runways'")

    missing = [key for key in TAXI_TARGET_KEYS if key not in targets['taxi']]
    if missing:
        raise CalibrationError(f"{path}: taxi target is missing {', '.join(missing)}")
    for i, rw in enumerate(targets['runways']):
        missing = [key for key in RUNWAY_TARGET_KEYS if key not in rw]
        if missing:
            raise CalibrationError(f"{path}: runway target {i} is missing {', '.join(missing)}")
    return targets


def calibrate(targets: Dict, graph, samples: TaxiCalibrationTarget, step_seconds: int = 30) -> Dict:
    """
    Fit every parameter named by `targets` and return a config fragment
    ({"taxi": {...}, "runways": [...]}) ready to merge into cvq_config.json.
    """
    taxi = targets['taxi']
    route = shortest_path(graph, int(taxi['reference_gate']), int(taxi['threshold']))
    step_distance = float(taxi['step_distance_m'])
    taxi_fit = fit_stop_probability(samples, path_length(graph, route), step_distance, step_seconds)

    runways = []
    for rw in targets['runways']:
        p1, p2 = fit_runway_bernoullis(RunwayCalibrationTarget(mean_rate=float(rw['mean_rate']),
                                                               std_rate=float(rw['std_rate'])))
        logger.info("[Calibrate] runway %s: p1=%.4f p2=%.4f", rw['id'], p1, p2)
        runways.append({'id': str(rw['id']), 'threshold': int(rw['threshold']),
                        'p1': round(p1, 6), 'p2': round(p2, 6)})

    return {
        'taxi': {'p_stop': round(taxi_fit.p_stop, 6), 'step_distance_m': step_distance},
        'runways': runways,
        'diagnostics': {
            'taxi_cells': taxi_fit.cells,
            'taxi_sample_mean_steps': round(taxi_fit.sample_mean_steps, 6),
            'taxi_variance_residual_steps2': round(taxi_fit.variance_residual, 6),
        },
    }


def write_config_fragment(fragment: Dict, path) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(fragment, f, indent=4, sort_keys=True)
        f.write('\n')
