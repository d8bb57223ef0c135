"""
Collaborative Virtual Queue.

Every ready aircraft leaves a virtual plane (a floating push-back slot
tagged with its airline) in a single queue shared by all runways. While
fewer than `load_limit` planes are out, the oldest slot becomes a real
clearance for its airline; the airline then decides which of its own
held aircraft uses it (see policy.py).
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Mapping, Optional

from .airside import planes_out_by_runway


@dataclass(frozen=True)
class VirtualPlane:
    airline: str
    virtual_pushback_step: int
    sequence_id: int


@dataclass
class VirtualQueue:
    # None disables gate holding (infinite limit)
    load_limit: Optional[int] = 9
    planes: Deque[VirtualPlane] = field(default_factory=deque)
    next_sequence: int = 0

    def __len__(self):
        return len(self.planes)


def enqueue_virtual(q: VirtualQueue, airline: str, now: int) -> VirtualPlane:
    """Stack a virtual plane for an aircraft of `airline` that became ready at `now`."""
    if q.planes and q.planes[-1].virtual_pushback_step > now:
        raise ValueError(
            f"Virtual push-back at step {now} precedes queue tail "
            f"({q.planes[-1].virtual_pushback_step})"
        )
    vp = VirtualPlane(airline=airline, virtual_pushback_step=now, sequence_id=q.next_sequence)
    q.next_sequence += 1
    q.planes.append(vp)
    return vp


def release_eligible(q: VirtualQueue, planes_out: Mapping[str, int]) -> Optional[str]:
    """
    Pop the oldest virtual plane if the system is below the load limit.

    `planes_out` holds per-runway counts; one queue balances all runways so
    the total is compared. Callers recount after each push-back, so
    repeated calls within a step stop exactly at the limit.
    """
    if not q.planes:
        return None
    if q.load_limit is not None and sum(planes_out.values()) >= q.load_limit:
        return None
    return q.planes.popleft().airline


def assign_runway(state) -> str:
    """Runway with the fewest planes taxiing toward or queued at it; ties to the smallest id."""
    counts = planes_out_by_runway(state)
    return min(counts, key=lambda rid: (counts[rid], rid))
