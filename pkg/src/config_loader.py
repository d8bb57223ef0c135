import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from .airside import TaxiwayGraph, load_lattice, shortest_path
from .errors import ConfigError
from .policy import PolicyParams
from .traffic import (AIRLINE_CODES, DEFAULT_AVG_SEATS, DEFAULT_FLEET_MIX, DEFAULT_FLEET_SHARES, DISTRIBUTION_MODES,
                      AirlineDistribution, FleetMix, load_custom_distribution, make_airline_distribution)

HOURS_PER_DAY = 24


@dataclass(frozen=True)
class RunwaySettings:
    id: str
    threshold: int
    p1: float
    p2: float


@dataclass(frozen=True)
class TaxiSettings:
    p_stop: float = 0.2
    step_distance_m: float = 200.0


@dataclass(frozen=True)
class TrafficSettings:
    mode: str = "top10"
    custom_path: Optional[str] = None
    n_flights: int = 380
    rate_profile: Tuple[float, ...] = (1.0,) * HOURS_PER_DAY
    schedule_path: Optional[str] = None
    fleet_mix: FleetMix = DEFAULT_FLEET_MIX


@dataclass(frozen=True)
class SeedSettings:
    master_seed: int = 2006
    n_days: int = 64


@dataclass(frozen=True)
class SweepSettings:
    alpha_start: float = 0.0
    alpha_stop: float = 1.0
    alpha_step: float = 0.05

    def grid(self) -> List[float]:
        """Inclusive grid, rounded so 0.05 steps print and hash cleanly."""
        n = int(math.floor((self.alpha_stop - self.alpha_start) / self.alpha_step + 1e-9))
        return [round(self.alpha_start + i * self.alpha_step, 10) for i in range(n + 1)]


@dataclass(frozen=True)
class SimConfig:
    lattice_path: str
    graph: TaxiwayGraph = field(compare=False, repr=False)
    runways: Tuple[RunwaySettings, ...]
    step_seconds: int = 30
    load_limit: Optional[int] = 9  # None = gate holding disabled
    policy: PolicyParams = PolicyParams()
    traffic: TrafficSettings = TrafficSettings()
    taxi: TaxiSettings = TaxiSettings()
    seeds: SeedSettings = SeedSettings()
    sweep: SweepSettings = SweepSettings()
    max_extension_steps: int = 2880
    source_path: Optional[str] = None

    @property
    def minutes_per_step(self) -> float:
        return self.step_seconds / 60.0

    def with_alpha(self, alpha: float) -> "SimConfig":
        try:
            policy = replace(self.policy, alpha=alpha)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        return replace(self, policy=policy)

    def with_load_limit(self, load_limit: Optional[int]) -> "SimConfig":
        if load_limit is not None and load_limit < 0:
            raise ConfigError(f"load limit must be a non-negative integer, got {load_limit!r}")
        return replace(self, load_limit=load_limit or None)

    def with_distribution(self, mode: str, custom_path: Optional[str] = None) -> "SimConfig":
        return replace(self, traffic=replace(self.traffic, mode=mode, custom_path=custom_path))


def _section(config: Dict, name: str) -> Dict:
    value = config.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"Section '{name}' must be an object")
    return value


def _probability(value, name: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must be within [0, 1], got {value}")
    return value


def _resolve(base_dir: str, path: Optional[str]) -> Optional[str]:
    if path is None or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def load_sim_config(config_path='cvq_config.json') -> SimConfig:
    """Load and validate the simulator configuration"""
    if not os.path.exists(config_path):
        raise ConfigError(f"Simulator config not found: {config_path}")

    with open(config_path, 'r') as f:
        try:
            config = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{config_path}: {e}") from e

    return build_sim_config(config, base_dir=os.path.dirname(os.path.abspath(config_path)),
                            source_path=config_path)


def build_sim_config(config: Dict, base_dir: str = ".", source_path: Optional[str] = None) -> SimConfig:
    """Validate a parsed config dictionary and resolve its files."""
    # Validate structure
    if 'lattice' not in config:
        raise ConfigError("Config must contain 'lattice'")
    if not config.get('runways'):
        raise ConfigError("At least one runway must be configured")

    step_seconds = config.get('step_seconds', 30)
    if not isinstance(step_seconds, int) or step_seconds <= 0:
        raise ConfigError(f"step_seconds must be a positive integer, got {step_seconds!r}")

    cvq = _section(config, 'cvq')
    load_limit = cvq.get('load_limit', 0)
    if not isinstance(load_limit, int) or isinstance(load_limit, bool) or load_limit < 0:
        raise ConfigError(f"cvq.load_limit must be a non-negative integer, got {load_limit!r}")

    policy = _section(config, 'policy')
    try:
        policy_params = PolicyParams(
            alpha=float(policy.get('alpha', 0.0)),
            w1=float(policy.get('w1', 4.0)),
            w2=float(policy.get('w2', 1.0)),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"policy: {e}") from e

    taxi = _section(config, 'taxi')
    p_stop = _probability(taxi.get('p_stop', 0.2), 'taxi.p_stop')
    if p_stop >= 1.0:
        raise ConfigError("taxi.p_stop must be below 1, otherwise aircraft never reach the runway")
    step_distance = float(taxi.get('step_distance_m', 200.0))
    if step_distance <= 0:
        raise ConfigError(f"taxi.step_distance_m must be positive, got {step_distance}")

    runways = []
    for i, rw in enumerate(config['runways']):
        if 'id' not in rw or 'threshold' not in rw:
            raise ConfigError(f"runways[{i}] needs 'id' and 'threshold'")
        p1 = _probability(rw.get('p1'), f"runways[{i}].p1")
        p2 = _probability(rw.get('p2'), f"runways[{i}].p2")
        if p1 + p2 <= 0:
            raise ConfigError(f"runway {rw['id']} never serves departures (p1 + p2 = 0)")
        runways.append(RunwaySettings(id=str(rw['id']), threshold=int(rw['threshold']), p1=p1, p2=p2))
    if len({rw.id for rw in runways}) != len(runways):
        raise ConfigError("Runway ids must be unique")

    traffic = _section(config, 'traffic')
    mode = traffic.get('mode', 'top10')
    if mode not in DISTRIBUTION_MODES:
        raise ConfigError(f"traffic.mode must be one of {DISTRIBUTION_MODES}, got '{mode}'")
    custom_path = _resolve(base_dir, traffic.get('custom_path'))
    if mode == 'custom' and not custom_path:
        raise ConfigError("traffic.mode 'custom' needs traffic.custom_path")
    n_flights = traffic.get('n_flights', 380)
    if not isinstance(n_flights, int) or n_flights < 0:
        raise ConfigError(f"traffic.n_flights must be a non-negative integer, got {n_flights!r}")
    rate_profile = tuple(float(x) for x in traffic.get('rate_profile', [1.0] * HOURS_PER_DAY))
    if len(rate_profile) != HOURS_PER_DAY:
        raise ConfigError(f"traffic.rate_profile needs {HOURS_PER_DAY} hourly weights, got {len(rate_profile)}")
    if any(x < 0 or not math.isfinite(x) for x in rate_profile):
        raise ConfigError("traffic.rate_profile weights must be non-negative")
    fleet = traffic.get('fleet_mix', {})
    try:
        fleet_mix = FleetMix.from_mapping(
            {name: spec['share'] for name, spec in fleet.items()} or DEFAULT_FLEET_SHARES,
            {name: spec['avg_seats'] for name, spec in fleet.items()} or DEFAULT_AVG_SEATS,
        )
    except (KeyError, TypeError) as e:
        raise ConfigError(f"traffic.fleet_mix entries need 'share' and 'avg_seats': {e}") from e

    seeds = _section(config, 'seeds')
    master_seed = seeds.get('master_seed', 2006)
    n_days = seeds.get('n_days', 64)
    if not isinstance(master_seed, int) or not 0 <= master_seed < 2 ** 64:
        raise ConfigError(f"seeds.master_seed must be an unsigned 64-bit integer, got {master_seed!r}")
    if not isinstance(n_days, int) or n_days < 1:
        raise ConfigError(f"seeds.n_days must be a positive integer, got {n_days!r}")

    sweep = _section(config, 'sweep')
    sweep_settings = SweepSettings(
        alpha_start=float(sweep.get('alpha_start', 0.0)),
        alpha_stop=float(sweep.get('alpha_stop', 1.0)),
        alpha_step=float(sweep.get('alpha_step', 0.05)),
    )
    if sweep_settings.alpha_step <= 0 or not 0 <= sweep_settings.alpha_start <= sweep_settings.alpha_stop <= 1:
        raise ConfigError("sweep grid must satisfy 0 <= alpha_start <= alpha_stop <= 1 with alpha_step > 0")

    max_extension = _section(config, 'simulation').get('max_extension_steps', 2880)
    if not isinstance(max_extension, int) or max_extension < 1:
        raise ConfigError("simulation.max_extension_steps must be a positive integer")

    lattice_path = _resolve(base_dir, config['lattice'])
    graph = load_lattice(lattice_path)
    validate_connectivity(graph, runways)

    sim_config = SimConfig(
        lattice_path=lattice_path,
        graph=graph,
        runways=tuple(runways),
        step_seconds=step_seconds,
        load_limit=load_limit or None,
        policy=policy_params,
        traffic=TrafficSettings(
            mode=mode,
            custom_path=custom_path,
            n_flights=n_flights,
            rate_profile=rate_profile,
            schedule_path=_resolve(base_dir, traffic.get('schedule_path')),
            fleet_mix=fleet_mix,
        ),
        taxi=TaxiSettings(p_stop=p_stop, step_distance_m=step_distance),
        seeds=SeedSettings(master_seed=master_seed, n_days=n_days),
        sweep=sweep_settings,
        max_extension_steps=max_extension,
        source_path=source_path,
    )
    # Fail early on a custom distribution that cannot be normalised
    get_airline_distribution(sim_config)
    return sim_config


def validate_connectivity(graph: TaxiwayGraph, runways) -> None:
    """Every gate must reach every configured runway threshold."""
    for rw in runways:
        if rw.threshold not in graph.runway_thresholds:
            raise ConfigError(f"Runway {rw.id}: node {rw.threshold} is not a labeled threshold")
        for gate in sorted(graph.gates):
            shortest_path(graph, gate, rw.threshold)


def get_runway_ids(config: SimConfig) -> List[str]:
    """Runway ids in the order runways are served each step"""
    return sorted(rw.id for rw in config.runways)


def get_airline_distribution(config: SimConfig) -> AirlineDistribution:
    """Airline shares for the configured traffic mode"""
    if config.traffic.mode == 'custom':
        return load_custom_distribution(config.traffic.custom_path)
    return make_airline_distribution(config.traffic.mode)


def known_airlines(config: SimConfig) -> set:
    """Graded airline codes plus any airline named by the configured distribution"""
    return set(AIRLINE_CODES) | set(get_airline_distribution(config).airlines)


def config_hash(config_path: str) -> str:
    """sha256 of the canonical JSON form of a config file"""
    with open(config_path, 'r') as f:
        canonical = json.dumps(json.load(f), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()
