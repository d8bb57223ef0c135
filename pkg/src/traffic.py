"""
Departure traffic: schedule files, the synthetic day generator, fleet mix
and airline market shares.

Schedule file, one flight per line ('#' starts a comment):

    flight <id> <airline> <H|L|S> <gate_node> <ready_minute>
"""

import json
import logging
import math
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ScheduleError

logger = logging.getLogger(__name__)

CLASS_CODES = {"H": "Heavy", "L": "Large", "S": "Small"}
CLASS_LETTERS = {name: code for code, name in CLASS_CODES.items()}
WEIGHT_CLASSES = ("Heavy", "Large", "Small")

# Boston Logan departures, January to September 2006
DEFAULT_FLEET_SHARES = {"Heavy": 0.1673, "Large": 0.7721, "Small": 0.0606}
DEFAULT_AVG_SEATS = {"Heavy": 214, "Large": 97, "Small": 4}

# Airlines are graded by departure count, AA being the busiest
AIRLINE_CODES = tuple(
    first + second
    for first in "ABC"
    for second in string.ascii_uppercase
)[: 26 * 2 + 16]  # AA..CP

TOP_AIRLINE_SHARES = (
    ("AA", 0.1060), ("AB", 0.0927), ("AC", 0.0904), ("AD", 0.0895), ("AE", 0.0814),
    ("AF", 0.0677), ("AG", 0.0593), ("AH", 0.0587), ("AI", 0.0587), ("AJ", 0.0373),
)

DISTRIBUTION_MODES = ("monopoly", "top5", "top10", "custom")
SHARE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class FleetMix:
    shares: Tuple[Tuple[str, float], ...]
    avg_seats: Tuple[Tuple[str, int], ...]

    def __post_init__(self):
        total = sum(share for _, share in self.shares)
        if abs(total - 1.0) > SHARE_TOLERANCE:
            raise ConfigError(f"Fleet mix shares sum to {total}, expected 1")
        if any(share < 0 for _, share in self.shares):
            raise ConfigError("Fleet mix shares must be non-negative")
        unknown = {name for name, _ in self.shares} - set(WEIGHT_CLASSES)
        if unknown:
            raise ConfigError(f"Unknown weight classes in fleet mix: {sorted(unknown)}")

    @classmethod
    def from_mapping(cls, shares: Mapping[str, float], seats: Mapping[str, int]):
        return cls(
            shares=tuple((name, float(shares[name])) for name in WEIGHT_CLASSES if name in shares),
            avg_seats=tuple((name, int(seats[name])) for name in WEIGHT_CLASSES if name in seats),
        )

    def seats(self, weight_class: str) -> int:
        return dict(self.avg_seats)[weight_class]


DEFAULT_FLEET_MIX = FleetMix.from_mapping(DEFAULT_FLEET_SHARES, DEFAULT_AVG_SEATS)


@dataclass(frozen=True)
class AirlineDistribution:
    shares: Tuple[Tuple[str, float], ...]
    mode: str

    def __post_init__(self):
        total = sum(share for _, share in self.shares)
        if abs(total - 1.0) > SHARE_TOLERANCE:
            raise ConfigError(f"Airline shares sum to {total}, expected 1")

    @property
    def airlines(self) -> List[str]:
        return [airline for airline, _ in self.shares]

    def share_of(self, airline: str) -> float:
        return dict(self.shares).get(airline, 0.0)


def make_airline_distribution(mode: str, custom_shares: Optional[Mapping[str, float]] = None) -> AirlineDistribution:
    """
    monopoly: every departure flown by AA.
    topK: the K busiest airlines, with the departures of everyone else
    handed out in proportion to their own shares.
    custom: the given raw weights, normalised.
    """
    if mode == "monopoly":
        return AirlineDistribution(shares=(("AA", 1.0),), mode=mode)

    if mode in ("top5", "top10"):
        k = int(mode[3:])
        raw = TOP_AIRLINE_SHARES[:k]
        total = sum(share for _, share in raw)
        return AirlineDistribution(
            shares=tuple((airline, share / total) for airline, share in raw),
            mode=mode,
        )

    if mode == "custom":
        if not custom_shares:
            raise ConfigError("Custom airline distribution needs at least one airline")
        weights = {airline: float(w) for airline, w in custom_shares.items()}
        total = sum(weights.values())
        if any(w < 0 or not math.isfinite(w) for w in weights.values()) or not total > 0 or not math.isfinite(total):
            raise ConfigError(f"Custom airline shares cannot be normalised: {weights}")
        return AirlineDistribution(
            shares=tuple((airline, w / total) for airline, w in weights.items()),
            mode=mode,
        )

    raise ConfigError(f"Unknown airline distribution mode '{mode}' (expected one of {DISTRIBUTION_MODES})")


def load_custom_distribution(path) -> AirlineDistribution:
    """Custom distribution file: {"shares": {"AA": 1, "AB": 1, ...}}."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Airline distribution file not found: {path}")
    with open(path, "r") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
    if "shares" not in payload:
        raise ConfigError(f"{path}: distribution file must contain 'shares'")
    return make_airline_distribution("custom", payload["shares"])


@dataclass(frozen=True)
class ScheduledFlight:
    id: str
    airline: str
    weight_class: str
    passengers: int
    gate: int
    ready_step: int


@dataclass(frozen=True)
class Schedule:
    flights: Tuple[ScheduledFlight, ...] = ()

    def __len__(self):
        return len(self.flights)

    def __iter__(self):
        return iter(self.flights)

    @property
    def airlines(self) -> set:
        return {f.airline for f in self.flights}

    @property
    def gates(self) -> set:
        return {f.gate for f in self.flights}

    @property
    def last_ready_step(self) -> int:
        return max((f.ready_step for f in self.flights), default=0)


def minute_to_step(minute: float, step_seconds: int) -> int:
    # epsilon absorbs the rounding of minutes written with six decimals
    return int(math.floor(minute * 60.0 / step_seconds + 1e-4))


def step_to_minute(step: int, step_seconds: int) -> float:
    return step * step_seconds / 60.0


def load_schedule(path, gates: Optional[Iterable[int]] = None,
                  fleet: FleetMix = DEFAULT_FLEET_MIX, step_seconds: int = 30) -> Schedule:
    """
    Parse and validate a schedule file.

    Syntax errors stop at the first bad line. Semantic problems (unknown
    weight class, negative ready time, unknown gate, duplicate id) are
    collected and reported together.
    """
    path = Path(path)
    if not path.exists():
        raise ScheduleError(f"Schedule file not found: {path}")

    known_gates = set(gates) if gates is not None else None
    flights: List[ScheduledFlight] = []
    problems: List[str] = []
    seen_ids = set()

    with open(path, "r") as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if tokens[0] != "flight" or len(tokens) != 6:
                raise ScheduleError(f"expected 'flight <id> <airline> <H|L|S> <gate> <ready_minute>', got '{line}'",
                                    line_number=line_number)
            _, flight_id, airline, class_code, gate_token, minute_token = tokens
            try:
                gate = int(gate_token)
                minute = float(minute_token)
            except ValueError:
                raise ScheduleError(f"non-numeric gate or ready minute in '{line}'", line_number=line_number)

            if class_code not in CLASS_CODES:
                problems.append(f"line {line_number}: unknown weight class '{class_code}'")
                continue
            if not math.isfinite(minute) or minute < 0:
                problems.append(f"line {line_number}: negative ready time {minute_token}")
                continue
            if known_gates is not None and gate not in known_gates:
                problems.append(f"line {line_number}: unknown gate node {gate}")
                continue
            if flight_id in seen_ids:
                problems.append(f"line {line_number}: duplicate flight id '{flight_id}'")
                continue
            seen_ids.add(flight_id)

            weight_class = CLASS_CODES[class_code]
            flights.append(ScheduledFlight(
                id=flight_id,
                airline=airline,
                weight_class=weight_class,
                passengers=fleet.seats(weight_class),
                gate=gate,
                ready_step=minute_to_step(minute, step_seconds),
            ))

    if problems:
        raise ScheduleError(f"{path}: {len(problems)} invalid record(s): " + "; ".join(problems),
                            offending=problems)

    ordered = sorted(flights, key=lambda fl: fl.ready_step)
    if ordered != flights:
        logger.warning("[Traffic] %s: ready times out of order, records re-sorted", path.name)

    return Schedule(flights=tuple(ordered))


def save_schedule(schedule: Schedule, path, step_seconds: int = 30):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for flight in schedule:
            minute = step_to_minute(flight.ready_step, step_seconds)
            f.write(f"flight {flight.id} {flight.airline} {CLASS_LETTERS[flight.weight_class]} "
                    f"{flight.gate} {minute:.6f}\n")


def synth_schedule(n_flights: int, rate_profile: Sequence[float], fleet: FleetMix,
                   dist: AirlineDistribution, rng, gates: Iterable[int],
                   step_seconds: int = 30) -> Schedule:
    """
    Draw one day of departures.

    Ready times follow a piecewise-constant intensity (one weight per
    hour) conditioned on `n_flights`: each flight picks an hour in
    proportion to its weight, then a uniform instant within it. Weight
    class, airline and gate are drawn independently.
    """
    if n_flights < 0:
        raise ScheduleError(f"n_flights must be >= 0, got {n_flights}")
    rate = np.asarray(rate_profile, dtype=float)
    if np.any(rate < 0) or not np.all(np.isfinite(rate)):
        raise ScheduleError("rate profile must be non-negative and finite")
    if n_flights == 0:
        return Schedule()
    if rate.sum() <= 0:
        raise ScheduleError("rate profile is all zero but flights were requested")

    gate_nodes = np.array(sorted(gates))
    if gate_nodes.size == 0:
        raise ScheduleError("no gate nodes to assign flights to")

    class_names = [name for name, _ in fleet.shares]
    class_p = np.array([share for _, share in fleet.shares])
    airline_names = dist.airlines
    airline_p = np.array([share for _, share in dist.shares])

    hours = rng.choice(rate.size, size=n_flights, p=rate / rate.sum())
    seconds = hours * 3600.0 + rng.random(n_flights) * 3600.0
    ready_steps = (seconds // step_seconds).astype(np.int64)
    class_idx = rng.choice(len(class_names), size=n_flights, p=class_p / class_p.sum())
    airline_idx = rng.choice(len(airline_names), size=n_flights, p=airline_p / airline_p.sum())
    gate_idx = rng.integers(0, gate_nodes.size, size=n_flights)

    order = np.argsort(ready_steps, kind="stable")
    flights = []
    for rank, i in enumerate(order, start=1):
        weight_class = class_names[class_idx[i]]
        flights.append(ScheduledFlight(
            id=f"F{rank:04d}",
            airline=airline_names[airline_idx[i]],
            weight_class=weight_class,
            passengers=fleet.seats(weight_class),
            gate=int(gate_nodes[gate_idx[i]]),
            ready_step=int(ready_steps[i]),
        ))
    return Schedule(flights=tuple(flights))


def distribution_table(distributions: Mapping[str, AirlineDistribution]) -> List[Dict]:
    """Rows of (distribution, airline, share) for the airline-mix output."""
    rows = []
    for name, dist in distributions.items():
        for airline, share in dist.shares:
            rows.append({"distribution": name, "airline": airline, "share": share})
    return rows
