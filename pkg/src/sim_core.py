"""
Time-driven departure simulation (30 s steps).

Each step runs, in this order:
  1. newly ready aircraft are held at the gate and leave a virtual plane
  2. the virtual queue releases clearances while below the load limit
  3. taxiing aircraft move (aircraft cleared this step wait one step)
  4. aircraft reaching their threshold join the runway queue
  5. each runway serves its queue
  6. the clock advances

All timestamps are integer step indices. Randomness comes from named
numpy streams derived from one seed, so a day is reproducible bit for bit.
"""

import logging
import zlib
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .airside import (RunwayServer, TaxiState, advance_taxi, path_length, planes_out_by_runway,
                      runway_service, shortest_path)
from .config_loader import SimConfig, get_runway_ids, known_airlines
from .cvq import VirtualQueue, assign_runway, enqueue_virtual, release_eligible
from .errors import ScheduleError, SimulationError
from .policy import select_pushback
from .traffic import Schedule

logger = logging.getLogger(__name__)

STREAM_TAXI = "taxi"
STREAM_SCHEDULE = "schedule"

FLIGHT_COLUMNS = [
    "id", "airline", "weight_class", "passengers", "gate", "runway",
    "ready_step", "pushback_step", "queue_entry_step", "wheelsoff_step",
    "planes_out_at_pushback", "active_planes_at_ready",
]
STEP_COLUMNS = ["step", "runway", "planes_out", "takeoffs"]


def runway_stream_name(runway_id: str) -> str:
    return f"runway-{runway_id}"


def make_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for `name`; the key depends only on the name."""
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(zlib.crc32(name.encode("utf-8")),))
    return np.random.Generator(np.random.PCG64(seq))


def day_seed(master_seed: int, day: int) -> int:
    """Seed of day `day` in a batch; the same for every policy."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(day,))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass
class SimClock:
    step_index: int = 0

    def tick(self):
        self.step_index += 1


@dataclass(eq=False)
class Aircraft:
    id: str
    airline: str
    weight_class: str
    passengers: int
    gate: int
    ready_step: int
    runway: Optional[str] = None
    taxi: Optional[TaxiState] = None
    pushback_step: Optional[int] = None
    queue_entry_step: Optional[int] = None
    wheelsoff_step: Optional[int] = None
    planes_out_at_pushback: Optional[int] = None
    active_planes_at_ready: Optional[int] = None


@dataclass
class SimState:
    config: SimConfig
    clock: SimClock
    cvq: VirtualQueue
    runways: Dict[str, RunwayServer]
    routes: Dict[Tuple[int, str], Tuple[tuple, float]]
    streams: Dict[str, np.random.Generator]
    pending: Deque[Aircraft] = field(default_factory=deque)
    held: Dict[str, List[Aircraft]] = field(default_factory=dict)
    taxiing: List[Aircraft] = field(default_factory=list)
    departed: List[Aircraft] = field(default_factory=list)
    step_records: List[tuple] = field(default_factory=list)

    @property
    def now(self) -> int:
        return self.clock.step_index

    @property
    def held_count(self) -> int:
        return sum(len(planes) for planes in self.held.values())

    @property
    def active_count(self) -> int:
        queued = sum(len(server.queue) for server in self.runways.values())
        return self.held_count + len(self.taxiing) + queued

    @property
    def finished(self) -> bool:
        return not self.pending and self.active_count == 0


@dataclass
class DayTrace:
    flights: pd.DataFrame
    steps: pd.DataFrame
    seed: int
    alpha: float
    load_limit: Optional[int]

    def __len__(self):
        return len(self.flights)

    @property
    def total_takeoffs(self) -> int:
        return int(self.steps["takeoffs"].sum()) if len(self.steps) else 0

    def equals(self, other: "DayTrace") -> bool:
        return self.flights.equals(other.flights) and self.steps.equals(other.steps)


def build_routes(config: SimConfig, gates) -> Dict[Tuple[int, str], Tuple[tuple, float]]:
    routes = {}
    for gate in sorted(gates):
        for rw in config.runways:
            path = tuple(shortest_path(config.graph, gate, rw.threshold))
            routes[(gate, rw.id)] = (path, path_length(config.graph, path))
    return routes


def init_state(config: SimConfig, schedule: Schedule, seed: int) -> SimState:
    unknown_gates = sorted(schedule.gates - set(config.graph.gates))
    if unknown_gates:
        raise ScheduleError(f"Schedule references unknown gate node(s): {unknown_gates}")
    unknown_airlines = sorted(schedule.airlines - known_airlines(config))
    if unknown_airlines:
        raise ScheduleError(f"Schedule references unknown airline(s): {unknown_airlines}")

    runway_ids = get_runway_ids(config)
    settings = {rw.id: rw for rw in config.runways}
    streams = {STREAM_TAXI: make_stream(seed, STREAM_TAXI)}
    for rid in runway_ids:
        streams[runway_stream_name(rid)] = make_stream(seed, runway_stream_name(rid))

    pending = deque(
        Aircraft(id=f.id, airline=f.airline, weight_class=f.weight_class, passengers=f.passengers,
                 gate=f.gate, ready_step=f.ready_step)
        for f in sorted(schedule, key=lambda fl: fl.ready_step)
    )

    return SimState(
        config=config,
        clock=SimClock(),
        cvq=VirtualQueue(load_limit=config.load_limit),
        runways={rid: RunwayServer(id=rid, p1=settings[rid].p1, p2=settings[rid].p2) for rid in runway_ids},
        routes=build_routes(config, schedule.gates),
        streams=streams,
        pending=pending,
    )


def push_back(state: SimState, aircraft: Aircraft, runway: str, planes_out: int):
    state.held[aircraft.airline].remove(aircraft)
    path, length = state.routes[(aircraft.gate, runway)]
    aircraft.runway = runway
    aircraft.pushback_step = state.now
    aircraft.planes_out_at_pushback = planes_out
    aircraft.taxi = TaxiState(
        path=path,
        length=length,
        step_distance=state.config.taxi.step_distance_m,
        p_stop=state.config.taxi.p_stop,
    )
    state.taxiing.append(aircraft)


def step(state: SimState) -> SimState:
    now = state.now
    config = state.config

    # 1. ready aircraft wait at the gate behind a virtual plane
    while state.pending and state.pending[0].ready_step <= now:
        aircraft = state.pending.popleft()
        state.held.setdefault(aircraft.airline, []).append(aircraft)
        enqueue_virtual(state.cvq, aircraft.airline, now)
        aircraft.active_planes_at_ready = state.active_count

    # 2. clearances, recounting after each push-back
    while True:
        counts = planes_out_by_runway(state)
        airline = release_eligible(state.cvq, counts)
        if airline is None:
            break
        runway = assign_runway(state)
        chosen = select_pushback(state.held.get(airline, []), config.policy, now, config.minutes_per_step)
        push_back(state, chosen, runway, planes_out=sum(counts.values()))

    # 3. taxi motion; aircraft cleared this step start moving next step
    taxi_rng = state.streams[STREAM_TAXI]
    for aircraft in state.taxiing:
        if aircraft.pushback_step < now:
            aircraft.taxi = advance_taxi(aircraft.taxi, taxi_rng)

    # 4. runway queue entry
    still_taxiing = []
    for aircraft in state.taxiing:
        if aircraft.taxi.arrived:
            aircraft.queue_entry_step = now
            state.runways[aircraft.runway].queue.append(aircraft)
        else:
            still_taxiing.append(aircraft)
    state.taxiing = still_taxiing

    # 5. take-offs
    takeoffs = {}
    for rid in sorted(state.runways):
        departed = runway_service(state.runways[rid], state.streams[runway_stream_name(rid)], now)
        state.departed.extend(departed)
        takeoffs[rid] = len(departed)

    planes_out = planes_out_by_runway(state)
    for rid in sorted(state.runways):
        state.step_records.append((now, rid, planes_out[rid], takeoffs[rid]))

    # 6.
    state.clock.tick()
    return state


def run_day(config: SimConfig, schedule: Schedule, seed: int) -> DayTrace:
    """Simulate one day until every scheduled aircraft is airborne."""
    state = init_state(config, schedule, seed)
    horizon = schedule.last_ready_step + config.max_extension_steps

    while not state.finished:
        if state.now > horizon:
            raise SimulationError(
                f"Day did not finish within {config.max_extension_steps} steps after the last ready time "
                f"({len(state.departed)}/{len(schedule)} departed)"
            )
        step(state)

    logger.debug("[Sim] seed %d: %d departures in %d steps", seed, len(state.departed), state.now)
    return build_trace(state, seed)


def build_trace(state: SimState, seed: int) -> DayTrace:
    rows = [
        (a.id, a.airline, a.weight_class, a.passengers, a.gate, a.runway,
         a.ready_step, a.pushback_step, a.queue_entry_step, a.wheelsoff_step,
         a.planes_out_at_pushback, a.active_planes_at_ready)
        for a in sorted(state.departed, key=lambda a: (a.ready_step, a.id))
    ]
    flights = pd.DataFrame(rows, columns=FLIGHT_COLUMNS)
    steps = pd.DataFrame(state.step_records, columns=STEP_COLUMNS)
    return DayTrace(
        flights=normalise_flight_frame(flights),
        steps=normalise_step_frame(steps),
        seed=seed,
        alpha=state.config.policy.alpha,
        load_limit=state.config.load_limit,
    )


def normalise_flight_frame(flights: pd.DataFrame) -> pd.DataFrame:
    """Fixed dtypes so traces compare equal whether built in memory or read back from CSV."""
    flights = flights.astype({
        "id": str, "airline": str, "weight_class": str, "runway": str,
        "passengers": "int64", "gate": "int64", "ready_step": "int64", "pushback_step": "int64",
        "queue_entry_step": "int64", "wheelsoff_step": "int64",
        "planes_out_at_pushback": "int64", "active_planes_at_ready": "int64",
    })
    return flights.reset_index(drop=True)


def normalise_step_frame(steps: pd.DataFrame) -> pd.DataFrame:
    steps = steps.astype({"step": "int64", "runway": str, "planes_out": "int64", "takeoffs": "int64"})
    return steps.reset_index(drop=True)
