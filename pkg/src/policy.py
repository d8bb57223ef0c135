"""
Airline push-back policies.

When the virtual queue hands a clearance to an airline, the airline picks
which of its held aircraft pushes back. Each held aircraft gets a holding
cost and the most expensive one goes first:

    C(alpha) = w1 * C1 * (1 - alpha) + w2 * C2 * alpha

- C1: minutes since ready (any strictly increasing function gives FCFS)
- C2: passengers on board (Heaviest Plane First)
"""

from dataclasses import dataclass
from typing import Iterable

from .errors import SimulationError

MINUTES_PER_STEP = 0.5


@dataclass(frozen=True)
class PolicyParams:
    alpha: float = 0.0
    w1: float = 4.0
    w2: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha {self.alpha} outside [0, 1]")
        if self.w1 <= 0 or self.w2 <= 0:
            raise ValueError(f"weights must be positive (w1={self.w1}, w2={self.w2})")


@dataclass(frozen=True)
class HoldingCostInputs:
    time_since_ready: float  # minutes
    passengers: int

    def __post_init__(self):
        if self.time_since_ready < 0 or self.passengers < 0:
            raise ValueError("holding cost inputs must be non-negative")


def holding_cost(inputs: HoldingCostInputs, p: PolicyParams) -> float:
    return (p.w1 * inputs.time_since_ready * (1.0 - p.alpha)
            + p.w2 * inputs.passengers * p.alpha)


def cost_of(aircraft, p: PolicyParams, now: int, minutes_per_step: float = MINUTES_PER_STEP) -> float:
    """Holding cost of a held aircraft at step `now`."""
    inputs = HoldingCostInputs(
        time_since_ready=(now - aircraft.ready_step) * minutes_per_step,
        passengers=aircraft.passengers,
    )
    return holding_cost(inputs, p)


def select_pushback(held: Iterable, p: PolicyParams, now: int,
                    minutes_per_step: float = MINUTES_PER_STEP):
    """
    Pick the held aircraft with the highest holding cost.

    Ties go to the earliest ready step, then the smallest aircraft id, so
    alpha = 1 never reorders two aircraft carrying the same passengers.
    """
    candidates = list(held)
    if not candidates:
        raise SimulationError("Clearance granted to an airline with no held aircraft")

    return min(
        candidates,
        key=lambda a: (-cost_of(a, p, now, minutes_per_step), a.ready_step, a.id),
    )
