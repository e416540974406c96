"""Single-channel CA lattice: vehicle ordering, gaps, signals and the
synchronous update.

Positions live on an unbounded integer axis. Vehicle 0 is the leader and
positions are strictly decreasing with the vehicle index. A red signal is
modelled as a halt cell: a virtual stationary vehicle sitting in that cell.

This module is the plain-Python reference. The simulators run compiled
kernels (see ``_kernels``) that are tested against it.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .errors import CollisionDetected

# Stand-in for "no obstacle ahead"; large enough for any simulated horizon.
FAR = 1 << 40

VelocityFn = Callable[[int, int, int], int]


@dataclass(frozen=True)
class Channel:
    """One deterministic CA realization."""

    positions: tuple[int, ...]
    velocities: tuple[int, ...]
    prev_gaps: tuple[int, ...]

    def __post_init__(self):
        n = len(self.positions)
        if len(self.velocities) != n or len(self.prev_gaps) != n:
            raise ValueError("positions, velocities and prev_gaps must have equal length")
        for a, b in zip(self.positions, self.positions[1:]):
            if a <= b:
                raise CollisionDetected(f"positions not strictly decreasing: {a} then {b}")
        if any(v < 0 for v in self.velocities):
            raise ValueError("negative velocity")

    def __len__(self):
        return len(self.positions)

    @classmethod
    def at_rest(cls, positions: Iterable[int], halt: Iterable[int] = (), ring_cells: int = 0,
                velocities: Optional[Iterable[int]] = None) -> "Channel":
        """Initial channel whose gap history is the initial gap.

        Vehicles stand still unless ``velocities`` is given.
        """
        pos = tuple(int(x) for x in positions)
        zeros = (0,) * len(pos)
        vel = zeros if velocities is None else tuple(int(v) for v in velocities)
        probe = cls(pos, zeros, zeros)
        gaps = tuple(gap_ahead(probe, i, halt, ring_cells) for i in range(len(pos)))
        return cls(pos, vel, gaps)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (np.array(self.positions, dtype=np.int64),
                np.array(self.velocities, dtype=np.int64),
                np.array(self.prev_gaps, dtype=np.int64))

    @classmethod
    def from_arrays(cls, pos, vel, pgap) -> "Channel":
        return cls(tuple(int(x) for x in pos), tuple(int(v) for v in vel), tuple(int(g) for g in pgap))


@dataclass(frozen=True)
class SignalSchedule:
    """Fixed-time signal at ``halt_cell``; green is ``[green_start, green_start + green_duration)`` mod cycle."""

    halt_cell: int
    cycle: int
    green_start: int
    green_duration: int

    def __post_init__(self):
        if not 0 < self.green_duration < self.cycle:
            raise ValueError(f"need 0 < green_duration < cycle, got {self.green_duration}, {self.cycle}")
        if not 0 <= self.green_start < self.cycle:
            raise ValueError(f"need 0 <= green_start < cycle, got {self.green_start}")

    def is_red(self, t: int) -> bool:
        return (t - self.green_start) % self.cycle >= self.green_duration


def active_halt_cells(schedules: Sequence[SignalSchedule], t: int) -> set[int]:
    # yellow counts as green, so only red inserts the halt cell
    return {s.halt_cell for s in schedules if s.is_red(t)}


def gap_ahead(ch: Channel, i: int, halt: Iterable[int] = (), ring_cells: int = 0) -> int:
    """Free cells in front of vehicle ``i`` up to its leader or the nearest active halt cell.

    With ``ring_cells > 0`` the road is a ring and the leader of vehicle 0 is
    the last vehicle, one lap ahead.
    """
    x = ch.positions[i]
    if i > 0:
        leader = ch.positions[i - 1]
    elif ring_cells > 0:
        leader = ch.positions[-1] + ring_cells
    else:
        leader = FAR
    stops = sorted(halt)
    k = bisect_right(stops, x)
    obstacle = min(leader, stops[k]) if k < len(stops) else leader
    return obstacle - x - 1


def advance_channel(
    ch: Channel,
    velocity_fn: Union[VelocityFn, Sequence[VelocityFn]],
    halt: Iterable[int] = (),
    ring_cells: int = 0,
) -> Channel:
    """One synchronous update.

    ``velocity_fn(v_prev, gap, prev_gap)`` is applied to every vehicle; pass a
    sequence of callables to give each vehicle its own rule. All gaps are read
    from the pre-step configuration before any vehicle moves.
    """
    n = len(ch)
    halt = tuple(halt)
    fns = velocity_fn if isinstance(velocity_fn, Sequence) else [velocity_fn] * n
    gaps = [gap_ahead(ch, i, halt, ring_cells) for i in range(n)]
    vel = []
    for i in range(n):
        v = fns[i](ch.velocities[i], gaps[i], ch.prev_gaps[i])
        if v < 0 or v > gaps[i]:
            raise CollisionDetected(f"vehicle {i}: velocity {v} with gap {gaps[i]}")
        vel.append(v)
    pos = tuple(x + v for x, v in zip(ch.positions, vel))
    # Channel.__post_init__ re-checks strict ordering
    return Channel(pos, tuple(vel), tuple(gaps))


def queue_positions(front_cell: int, length: int) -> list[int]:
    """Bumper-to-bumper queue whose head stands on ``front_cell``."""
    return [front_cell - k for k in range(length)]
