"""Fuzzy cellular-automaton simulator.

Every vehicle carries five deterministic trajectories: the low rule (L),
the high rule (H) and three fuzzy components. Each step, component ``m`` of
vehicle ``i`` advances with the high rule when its normalized position
between the L and H trajectories is at most ``alpha[m]`` and with the low
rule otherwise. A triangular saturation flow ``S`` maps onto the three
``alpha`` values in closed form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .errors import BoundViolation, CollisionDetected, OutOfRange, VelocityOutOfRange
from .fuzzy import TriangularFuzzy, scale_tfn
from .lattice import Channel, SignalSchedule, active_halt_cells
from .rules import RuleTable
from .scenario import Scenario
from .trajectory import FUZZY_CHANNELS, TrajectoryLog

log = logging.getLogger(__name__)

SECONDS_PER_HOUR = 3600.0
_TOL = 1e-12


@dataclass(frozen=True)
class Calibration:
    rule_L: RuleTable
    rule_H: RuleTable
    alpha: tuple[float, float, float]

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        object.__setattr__(self, "alpha", alpha)
        if len(alpha) != 3:
            raise OutOfRange("need exactly three calibration parameters")
        if any(not 0.0 <= a <= 1.0 for a in alpha):
            raise OutOfRange(f"calibration parameters must lie in [0, 1]: {alpha}")
        if not alpha[0] <= alpha[1] <= alpha[2]:
            raise OutOfRange(f"calibration parameters must be ascending: {alpha}")
        if not self.rule_L.saturation_flow < self.rule_H.saturation_flow:
            raise OutOfRange(f"low rule {self.rule_L.name} must saturate below high rule {self.rule_H.name}")

    @property
    def rule_params(self) -> tuple[int, int, int, int]:
        return self.rule_L.v_max, self.rule_L.g_stat, self.rule_H.v_max, self.rule_H.g_stat

    def saturation_flow(self) -> TriangularFuzzy:
        """Target saturation flow in veh/h implied by ``alpha``."""
        return TriangularFuzzy(*(saturation_of_alpha(self.rule_params, a) * SECONDS_PER_HOUR for a in self.alpha))

    def to_dict(self) -> dict:
        return {"rule_L": self.rule_L.name, "rule_H": self.rule_H.name, "alpha": list(self.alpha)}


def saturation_of_alpha(rules: Sequence[int], alpha: float) -> float:
    """Saturation flow (veh/step) of a stream held at normalized position ``alpha``."""
    v_l, g_l, v_h, g_h = rules
    return (v_l + alpha * (v_h - v_l)) / (g_l + alpha * (g_h - g_l) + 1)


def alpha_of_saturation(rules: Sequence[int], s: float) -> float:
    """Inverse of :func:`saturation_of_alpha`; ``s`` in veh/step."""
    v_l, g_l, v_h, g_h = rules
    return (s * (g_l + 1) - v_l) / ((v_h - v_l) - s * (g_h - g_l))


def calibrate_alpha(S: TriangularFuzzy, rule_L: RuleTable, rule_H: RuleTable) -> Calibration:
    """Calibration parameters reproducing the fuzzy saturation flow ``S`` (veh/h)."""
    s_low, s_high = rule_L.saturation_flow, rule_H.saturation_flow
    rules = (rule_L.v_max, rule_L.g_stat, rule_H.v_max, rule_H.g_stat)
    alpha = []
    for s in scale_tfn(S, 1.0 / SECONDS_PER_HOUR):
        if not s_low - _TOL <= s <= s_high + _TOL:
            raise OutOfRange(f"saturation flow {s * SECONDS_PER_HOUR:g} veh/h outside "
                             f"[{s_low * SECONDS_PER_HOUR:g}, {s_high * SECONDS_PER_HOUR:g}]")
        alpha.append(min(1.0, max(0.0, alpha_of_saturation(rules, s))))
    return Calibration(rule_L, rule_H, tuple(alpha))


def normalized_position(x: int, x_L: int, x_H: int) -> float:
    if not x_L <= x <= x_H:
        raise BoundViolation(f"position {x} outside [{x_L}, {x_H}]")
    if x_H == x_L:
        return 0.0
    return (x - x_L) / (x_H - x_L)


@dataclass(frozen=True)
class FuzzyState:
    channels: tuple[Channel, Channel, Channel, Channel, Channel]
    t: int = 0

    def __post_init__(self):
        if len(self.channels) != 5:
            raise ValueError("a fuzzy state holds five channels")
        if len({len(c) for c in self.channels}) > 1:
            raise ValueError("all channels must hold the same vehicles")

    @property
    def ch_L(self) -> Channel:
        return self.channels[0]

    @property
    def ch_H(self) -> Channel:
        return self.channels[1]

    @property
    def ch_m(self) -> tuple[Channel, Channel, Channel]:
        return self.channels[2:]

    @classmethod
    def initial(cls, cells, halt=(), ring_cells: int = 0) -> "FuzzyState":
        ch = Channel.at_rest(cells, halt, ring_cells)
        return cls((ch,) * 5, 0)

    def arrays(self):
        cols = [c.arrays() for c in self.channels]
        return tuple(np.stack([c[k] for c in cols]).reshape(5, -1) for k in range(3))


def _raise_status(status: int, t: int):
    if status == K.COLLISION:
        raise CollisionDetected(f"ordering broken at step {t}")
    if status == K.BOUND:
        raise BoundViolation(f"fuzzy component left its [L, H] bounds at step {t}")
    if status == K.VELOCITY:
        raise VelocityOutOfRange(f"velocity beyond the rule table at step {t}")


def step_fuzzy(state: FuzzyState, cal: Calibration, schedules: Sequence[SignalSchedule] = (),
               ring_cells: int = 0, strict: bool = True) -> FuzzyState:
    pos, vel, pgap = state.arrays()
    halts = np.array(sorted(active_halt_cells(schedules, state.t)), dtype=np.int64)
    gaps = np.empty_like(pos)
    newv = np.empty_like(pos)
    excursions = np.zeros(1, dtype=np.int64)
    status = K.fuzzy_step(pos, vel, pgap, cal.rule_L.array, cal.rule_H.array,
                          np.array(cal.alpha), halts, len(halts), ring_cells, gaps, newv, strict, excursions)
    _raise_status(status, state.t)
    chans = tuple(Channel.from_arrays(pos[c], vel[c], pgap[c]) for c in range(5))
    return FuzzyState(chans, state.t + 1)


def initial_arrays(scenario: Scenario, channels: int):
    """Stacked (position, velocity, prev_gap) arrays at t = 0."""
    pos, vel, pgap = scenario.initial_channel().arrays()
    return (np.tile(pos, (channels, 1)), np.tile(vel, (channels, 1)), np.tile(pgap, (channels, 1)))


def run_fuzzy(scenario: Scenario, cal: Calibration, record: bool = True, count_cell=None,
              strict: bool = True) -> TrajectoryLog:
    """Simulate ``scenario.T`` steps. Deterministic in its inputs.

    ``count_cell`` switches on stop-line crossing counters, which is all a
    saturation-flow measurement needs when ``record`` is off.

    With ``strict`` (the default) a component leaving its [L, H] bounds
    raises :class:`BoundViolation`. ``strict=False`` keeps running, compares
    the unclamped normalized position with alpha and reports the number of
    out-of-bounds vehicle-component-steps as ``metadata["bound_excursions"]``.
    """
    pos, vel, pgap = initial_arrays(scenario, 5)
    start = pos[0].copy()
    T, n = scenario.T, pos.shape[1]
    shape = (T + 1, 5, n) if record else (1, 5, n)
    rec_pos = np.zeros(shape, dtype=np.int64)
    rec_vel = np.zeros(shape, dtype=np.int64)
    rec_pos[0] = pos
    rec_vel[0] = vel
    crossings = np.zeros(5, dtype=np.int64)
    excursions = np.zeros(1, dtype=np.int64)
    status, t, ops = K.fuzzy_run(pos, vel, pgap, cal.rule_L.array, cal.rule_H.array, np.array(cal.alpha),
                                 scenario.schedule_array(), scenario.ring_cells, 0, T,
                                 rec_pos, rec_vel, record, -1 if count_cell is None else int(count_cell),
                                 crossings, strict, excursions)
    _raise_status(status, t)
    out = TrajectoryLog(
        channels=FUZZY_CHANNELS,
        T=T,
        positions=rec_pos if record else None,
        velocities=rec_vel if record else None,
        final_positions=pos,
        final_velocities=vel,
        initial_positions=start,
        op_count=int(ops),
        metadata={"model": "fuzzy", "calibration": cal.to_dict(), "steps": T, "vehicles": n,
                  "strict_bounds": strict, "bound_excursions": int(excursions[0])},
        count_cell=count_cell,
        crossings=crossings if count_cell is not None else None,
    )
    bad = component_order_violations(out)
    out.metadata["component_order_violations"] = bad
    if bad:
        log.warning("fuzzy components out of order in %d vehicle-steps", bad)
    return out


def component_order_violations(log_: TrajectoryLog) -> int:
    """Vehicle-steps where the component positions are not ascending in m."""
    p = log_.positions if log_.recorded else log_.final_positions[None]
    m1, m2, m3 = p[:, 2], p[:, 3], p[:, 4]
    return int(np.count_nonzero((m1 > m2) | (m2 > m3)))
