from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FUZZY_CHANNELS = ("L", "H", "m1", "m2", "m3")
NASCH_CHANNELS = ("nasch",)


@dataclass
class TrajectoryLog:
    """Per-step record of one simulation run.

    ``positions`` and ``velocities`` have shape ``(T + 1, C, N)`` with the
    initial state at index 0; they are ``None`` for runs made with
    ``record=False``, which keep only the final state and the stop-line
    crossing counters.
    """

    channels: tuple[str, ...]
    T: int
    positions: Optional[np.ndarray]
    velocities: Optional[np.ndarray]
    final_positions: np.ndarray
    final_velocities: np.ndarray
    initial_positions: np.ndarray
    op_count: int
    metadata: dict = field(default_factory=dict)
    count_cell: Optional[int] = None
    crossings: Optional[np.ndarray] = None

    @property
    def n_vehicles(self) -> int:
        return int(self.final_positions.shape[1])

    @property
    def recorded(self) -> bool:
        return self.positions is not None

    def channel(self, name: str) -> int:
        return self.channels.index(name)

    @property
    def component_channels(self) -> list[int]:
        """Channels carrying the model output: m1..m3 for fuzzy runs, the single channel otherwise."""
        if self.channels == FUZZY_CHANNELS:
            return [2, 3, 4]
        return list(range(len(self.channels)))
