"""Deterministic discrete-event engine.

Provides the virtual clock, an ordered event queue, and named RNG streams
for every other component. Ties at equal fire times dispatch in insertion
order (FIFO), so a run has a total event order and the trace is
reproducible bit for bit for a fixed seed and scenario.

Virtual time is real-valued seconds with no wall-clock coupling. The
engine is single-threaded and must not be shared across threads during a
run; parallelism, if any, belongs at the level of independent scenario
replicas that each own a private engine.
"""

import hashlib
import heapq
from typing import Callable

import numpy as np

# virtual time: non-negative real seconds, no wall-clock coupling
SimTime = float


class CausalityError(Exception):
    """An event was scheduled to fire before the current virtual time."""


class RngStreams:
    """Named, independently seeded random streams.

    A stream is identified by (root seed, stream label). The label is
    hashed with SHA-256 so the seeding is stable across platforms and
    interpreter invocations, and so adding a new consumer module never
    perturbs the draw sequence of an existing one.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, np.random.Generator] = {}

    def stream(self, stream_id: str) -> np.random.Generator:
        if stream_id not in self._streams:
            digest = hashlib.sha256(f"{self.seed}/{stream_id}".encode()).digest()
            child_seed = int.from_bytes(digest[:16], "little")
            self._streams[stream_id] = np.random.default_rng(child_seed)
        return self._streams[stream_id]


class Engine:
    """Single-threaded event loop over virtual seconds."""

    def __init__(self, seed: int = 0):
        self.now = 0.0
        self.rng = RngStreams(seed)
        self.dispatched = 0
        # trace of (fire_at, label) for every dispatched event
        self.trace: list[tuple[float, str]] = []
        self._heap: list[tuple[float, int, int]] = []
        self._actions: dict[int, tuple[Callable[[], None], str]] = {}
        self._seq = 0

    def schedule(self, fire_at: SimTime, action: Callable[[], None], label: str = "") -> int:
        """Enqueue `action` to run at virtual time `fire_at`; returns the event id."""
        if fire_at < self.now:
            raise CausalityError(
                f"cannot schedule event at t={fire_at} before current time t={self.now}"
            )
        self._seq += 1
        event_id = self._seq
        heapq.heappush(self._heap, (float(fire_at), event_id, event_id))
        self._actions[event_id] = (action, label)
        return event_id

    def queue_size(self) -> int:
        return len(self._heap)

    def run_until(self, t_end: SimTime) -> int:
        """Dispatch every event with fire_at <= t_end, in (fire_at, seq) order.

        The clock ends at exactly t_end, even if the queue empties earlier.
        Handlers may schedule further events; those at or before t_end are
        dispatched in the same call.
        """
        if t_end < self.now:
            raise CausalityError(f"run_until({t_end}) is in the past (now={self.now})")
        count = 0
        while self._heap and self._heap[0][0] <= t_end:
            fire_at, _, event_id = heapq.heappop(self._heap)
            action, label = self._actions.pop(event_id)
            self.now = fire_at
            self.trace.append((fire_at, label))
            self.dispatched += 1
            count += 1
            action()
        self.now = t_end
        return count

    def drain(self) -> int:
        """Dispatch all remaining events; the clock stops at the last fire time."""
        count = 0
        while self._heap:
            count += self.run_until(self._heap[0][0])
        return count
