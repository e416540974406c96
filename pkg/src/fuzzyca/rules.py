"""Deterministic velocity rules.

Two families:

* table rules -- a 4x6 lookup ``u[v_prev][min(gap, 5)]`` with a delayed-start
  entry ``-1`` (R1 and R2 are built in and serve as the low/high rules of the
  fuzzy simulator);
* the two deterministic halves of the Nagel-Schreckenberg rule, NSH (no
  deceleration) and NSL (deceleration by one cell).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidRuleTable, UnknownRule, VelocityOutOfRange
from .lattice import Channel, advance_channel, queue_positions

ROWS = 4
COLS = 6
DELAYED_START = -1

_U_R1 = (
    (0, -1, 1, 1, 1, 1),
    (0, 1, 1, 1, 2, 2),
    (0, 1, 1, 1, 2, 2),
    (0, 1, 1, 1, 2, 2),
)
_U_R2 = (
    (0, -1, 1, 2, 1, 1),
    (0, 1, 1, 2, 2, 2),
    (0, 1, 1, 2, 3, 2),
    (0, 1, 1, 2, 3, 2),
)


@dataclass(frozen=True)
class RuleTable:
    name: str
    u: tuple[tuple[int, ...], ...]
    v_max: int
    g_stat: int
    _array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        validate_table(self.u)
        arr = np.array(self.u, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "_array", arr)

    @property
    def array(self) -> np.ndarray:
        """Read-only int64 copy of the table for the compiled kernels."""
        return self._array

    @property
    def saturation_flow(self) -> float:
        return rule_saturation_flow(self.v_max, self.g_stat)

    @classmethod
    def custom(cls, name: str, u: Sequence[Sequence[int]]) -> "RuleTable":
        """A user table; its stationary (v_max, g_stat) is measured, not declared."""
        table = tuple(tuple(int(x) for x in row) for row in u)
        validate_table(table)
        v_max, g_stat = measure_stationary(table)
        return cls(name, table, v_max, g_stat)


@dataclass(frozen=True)
class NaschParams:
    v_max: int = 2
    p: float = 0.2

    def __post_init__(self):
        if self.v_max < 1:
            raise ValueError(f"v_max must be >= 1, got {self.v_max}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")

    @property
    def free_flow_velocity(self) -> float:
        return self.v_max - self.p


def validate_table(u) -> None:
    if len(u) != ROWS or any(len(row) != COLS for row in u):
        raise InvalidRuleTable(f"rule table must be {ROWS}x{COLS}")
    for j, row in enumerate(u):
        if row[0] != 0:
            raise InvalidRuleTable(f"row {j}: gap 0 must map to velocity 0")
        for k, val in enumerate(row):
            if val == DELAYED_START:
                if (j, k) != (0, 1):
                    raise InvalidRuleTable(f"delayed-start entry only allowed at v_prev=0, gap=1; found at ({j}, {k})")
                continue
            if val < 0 or val > ROWS - 1:
                raise InvalidRuleTable(f"entry ({j}, {k}) = {val} outside [0, {ROWS - 1}]")
            if k < COLS - 1 and val > k:
                raise InvalidRuleTable(f"entry ({j}, {k}) = {val} exceeds the gap {k}")


def builtin_rule(name: str) -> RuleTable:
    if name == "R1":
        return RuleTable("R1", _U_R1, v_max=2, g_stat=4)
    if name == "R2":
        return RuleTable("R2", _U_R2, v_max=2, g_stat=3)
    raise UnknownRule(f"unknown rule {name!r}; built-in rules are R1, R2")


def table_velocity(rule: RuleTable, v_prev: int, gap: int, prev_gap: int) -> int:
    return _lookup(rule.u, v_prev, gap, prev_gap)


def _lookup(table, v_prev: int, gap: int, prev_gap: int) -> int:
    if not 0 <= v_prev < ROWS:
        raise VelocityOutOfRange(f"v_prev={v_prev} outside table rows 0..{ROWS - 1}")
    u = table[v_prev][min(gap, COLS - 1)]
    if u == DELAYED_START:
        # gap is 1 here; a halt cell activated in front of a standing
        # vehicle can leave prev_gap larger than the current gap
        return min(prev_gap, gap)
    return u


def rule_velocity_fn(rule: RuleTable):
    """Adapter to the ``velocity_fn(v_prev, gap, prev_gap)`` form used by the lattice."""
    return lambda v, g, pg: table_velocity(rule, v, g, pg)


def nasch_velocity(params: NaschParams, v_prev: int, gap: int, decelerate: bool) -> int:
    v = min(v_prev + 1, gap, params.v_max)
    return max(0, v - 1) if decelerate else v


def rule_saturation_flow(v_max: int, g: int) -> float:
    """Saturation flow in vehicles per time step of a stream moving at ``v_max`` with uniform gap ``g``."""
    return v_max / (g + 1)


def measure_stationary(u, queue_len: int = 12, steps: int = 400) -> tuple[int, int]:
    """Release a standing queue under table ``u`` and read the stationary velocity and gap.

    The reading is taken from the followers (the leader runs on an open
    road); the most common follower gap wins if the stream is not uniform.
    """
    def fn(v, g, pg):
        return _lookup(u, v, g, pg)

    ch = Channel.at_rest(queue_positions(0, queue_len), halt=[1])
    for _ in range(steps):
        ch = advance_channel(ch, fn)
    v = Counter(ch.velocities[1:]).most_common(1)[0][0]
    gaps = [a - b - 1 for a, b in zip(ch.positions, ch.positions[1:])]
    g = Counter(gaps).most_common(1)[0][0]
    if v < 1:
        raise InvalidRuleTable("rule table never discharges a standing queue")
    return int(v), int(g)
