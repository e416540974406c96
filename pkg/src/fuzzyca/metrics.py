"""Measurements on simulation runs.

Counting conventions: a vehicle *crosses* a stop line at cell ``s`` during
step ``t`` when it moves from a cell ``<= s`` to a cell ``> s``. One step is
one second.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, NeverArrived, Overfull, QueueExhausted
from .fuzzy import TriangularFuzzy, sorted_tfn
from .fuzzy_sim import Calibration, run_fuzzy
from .lattice import Channel, advance_channel, queue_positions
from .nasch import Ensemble, run_nasch
from .rules import NaschParams, RuleTable, rule_saturation_flow, rule_velocity_fn
from .scenario import Scenario, build_saturated
from .trajectory import TrajectoryLog

SECONDS_PER_HOUR = 3600.0


# saturation flow -----------------------------------------------------------

def crossings_per_channel(log: TrajectoryLog, stop_cell: int, horizon: Optional[int] = None) -> np.ndarray:
    horizon = log.T if horizon is None else horizon
    if log.crossings is not None and log.count_cell == stop_cell and horizon == log.T:
        return log.crossings.copy()
    if not log.recorded:
        raise ValueError("run was not recorded and has no crossing counter for this cell")
    before = log.positions[0] <= stop_cell
    after = log.positions[horizon] > stop_cell
    # positions never decrease, so a crossing happens at most once per vehicle
    return np.count_nonzero(before & after, axis=1)


def measure_saturation_flow(log: TrajectoryLog, stop_cell: int,
                            horizon: Optional[int] = None) -> Union[float, TriangularFuzzy]:
    """Stop-line crossings over the horizon in veh/h.

    Returns a float for single-channel runs and the fuzzy flow of the three
    component channels for fuzzy runs.
    """
    horizon = log.T if horizon is None else horizon
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    counts = crossings_per_channel(log, stop_cell, horizon)
    upstream0 = np.count_nonzero(log.initial_positions <= stop_cell)
    comps = log.component_channels
    for c in comps:
        if counts[c] >= upstream0:
            raise QueueExhausted(f"channel {log.channels[c]}: all {upstream0} queued vehicles crossed "
                                 f"before step {horizon}")
    flows = [counts[c] * SECONDS_PER_HOUR / horizon for c in comps]
    if len(flows) == 1:
        return flows[0]
    return sorted_tfn(flows)


def fuzzy_saturation_flow(cal: Calibration, T: int = 3600, queue_len: Optional[int] = None) -> TriangularFuzzy:
    """Measured fuzzy saturation flow of a persistent queue under continuous green."""
    scen = build_saturated(queue_len, T, "fuzzy")
    stop = scen.stop_cells[0]
    log = run_fuzzy(scen, cal, record=False, count_cell=stop)
    return measure_saturation_flow(log, stop)


def nasch_saturation_samples(params: NaschParams, K: int, T: int = 3600, seed: int = 0,
                             queue_len: Optional[int] = None) -> Ensemble:
    from .nasch import EnsembleConfig, run_ensemble

    scen = build_saturated(queue_len, T, "nasch")
    stop = scen.stop_cells[0]

    def metric(log):
        return {"saturation_flow": measure_saturation_flow(log, stop)}

    return run_ensemble(scen, EnsembleConfig(params, K, T, seed), metric, record=False, count_cell=stop)


# queue discharge -----------------------------------------------------------

@dataclass
class DischargeTrace:
    """Cell-state table of a released queue.

    ``states[t, k]`` is the velocity of the vehicle in cell ``first_cell + k``
    at step ``t``, or -1 for an empty cell.
    """

    rule: str
    states: np.ndarray
    first_cell: int
    v_max: int
    gap: int
    uniform: bool

    @property
    def saturation_flow(self) -> float:
        """veh/h of the stationary stream."""
        return rule_saturation_flow(self.v_max, self.gap) * SECONDS_PER_HOUR

    def rows(self):
        """``(t, cell, state)`` triples in table order."""
        steps, width = self.states.shape
        for t in range(steps):
            for k in range(width):
                yield t, self.first_cell + k, int(self.states[t, k])


def queue_discharge_trace(rule: RuleTable, queue_len: int, steps: int) -> DischargeTrace:
    """Release ``queue_len`` standing vehicles; red is shown only at the first step."""
    if queue_len < 2:
        raise ValueError("queue_len must be >= 2")
    front = queue_len - 1
    halt0 = {front + 1}
    fn = rule_velocity_fn(rule)
    ch = Channel.at_rest(queue_positions(front, queue_len), halt0)
    history = [ch]
    for t in range(steps):
        ch = advance_channel(ch, fn, halt0 if t == 0 else ())
        history.append(ch)
    width = history[-1].positions[0] + 1
    states = np.full((steps + 1, width), -1, dtype=np.int64)
    for t, c in enumerate(history):
        states[t, list(c.positions)] = c.velocities
    last = history[-1]
    gaps = [a - b - 1 for a, b in zip(last.positions, last.positions[1:])]
    followers = last.velocities[1:]
    v = Counter(followers).most_common(1)[0][0]
    g = Counter(gaps).most_common(1)[0][0]
    uniform = len(set(gaps)) == 1 and len(set(followers)) == 1
    return DischargeTrace(rule.name, states, 0, int(v), int(g), uniform)


# rule switching --------------------------------------------------------------

@dataclass
class SwitchTrace:
    """Stop-line flow of a saturated stream whose rule is swapped twice.

    ``flow[t]`` is the number of crossings during steps ``t - window + 1 .. t``
    scaled to veh/h.
    """

    crossings: np.ndarray
    flow: np.ndarray
    window: int
    switch_on: int
    switch_off: int
    s_low: float
    s_high: float

    def first_reaching(self, level: float, start: int) -> Optional[int]:
        hit = np.flatnonzero(np.isclose(self.flow[start:], level))
        return int(hit[0]) if hit.size else None

    @property
    def rise_delay(self) -> Optional[int]:
        """Steps after the switch to the high rule until the flow first equals s_high."""
        return self.first_reaching(self.s_high, self.switch_on)

    @property
    def fall_delay(self) -> Optional[int]:
        return self.first_reaching(self.s_low, self.switch_off)

    def settle_time(self, level: float, start: int, stop: int) -> int:
        """Steps after ``start`` until the flow stays at ``level`` up to ``stop``."""
        off = np.flatnonzero(~np.isclose(self.flow[start:stop], level))
        return int(off[-1]) + 1 if off.size else 0


def rule_switch_trace(rule_L: RuleTable, rule_H: RuleTable, switch_on: int, switch_off: int,
                      T: int, window: int = 10) -> SwitchTrace:
    """Run a persistent queue under ``rule_L``, all vehicles on ``rule_H`` during
    steps ``switch_on .. switch_off - 1``, and count crossings of the stop line
    at the head of the initial queue.
    """
    if not 0 < switch_on < switch_off < T:
        raise ValueError("need 0 < switch_on < switch_off < T")
    if window < 1:
        raise ValueError("window must be >= 1")
    stop = T + 1
    fn_l, fn_h = rule_velocity_fn(rule_L), rule_velocity_fn(rule_H)
    ch = Channel.at_rest(queue_positions(stop - 1, T + 1))
    crossed = np.zeros(T, dtype=np.int64)
    for t in range(T):
        new = advance_channel(ch, fn_h if switch_on <= t < switch_off else fn_l)
        crossed[t] = sum(1 for a, b in zip(ch.positions, new.positions) if a <= stop < b)
        ch = new
    csum = np.concatenate(([0], np.cumsum(crossed)))
    lo = np.maximum(np.arange(1, T + 1) - window, 0)
    flow = (csum[1:] - csum[lo]) * SECONDS_PER_HOUR / window
    return SwitchTrace(crossed, flow, window, switch_on, switch_off,
                       rule_L.saturation_flow * SECONDS_PER_HOUR, rule_H.saturation_flow * SECONDS_PER_HOUR)


# arterial measures -----------------------------------------------------------

def travel_time(log: TrajectoryLog, vehicle: int, stop_cell: int, channel: int = 0) -> int:
    """First step at which ``vehicle`` stands beyond ``stop_cell``."""
    track = log.positions[:, channel, vehicle]
    beyond = np.flatnonzero(track > stop_cell)
    if beyond.size == 0:
        raise NeverArrived(f"vehicle {vehicle} ({log.channels[channel]}) never passes cell {stop_cell} "
                           f"within {log.T} steps")
    return int(beyond[0])


def fuzzy_travel_time(log: TrajectoryLog, vehicle: int, stop_cell: int) -> TriangularFuzzy:
    # leading components arrive first, so raw values come out descending
    return sorted_tfn(travel_time(log, vehicle, stop_cell, c) for c in log.component_channels)


def vehicle_count(log: TrajectoryLog, t: int, boundary_cell: int, channel: int = 0) -> int:
    return int(np.count_nonzero(log.positions[t, channel] <= boundary_cell))


def fuzzy_vehicle_count(log: TrajectoryLog, t: int, boundary_cell: int) -> TriangularFuzzy:
    if not 0 <= t <= log.T:
        raise ValueError(f"t={t} outside the log (T={log.T})")
    return sorted_tfn(vehicle_count(log, t, boundary_cell, c) for c in log.component_channels)


def count_series(log: TrajectoryLog, times: Sequence[int], boundary_cell: int) -> np.ndarray:
    """Vehicles at or upstream of ``boundary_cell``; shape ``(len(times), channels)``."""
    idx = np.asarray(times, dtype=np.int64)
    return np.count_nonzero(log.positions[idx] <= boundary_cell, axis=2)


# fundamental diagram ---------------------------------------------------------

def ring_scenario(density: float, ring_cells: int, steps: int, rng: np.random.Generator) -> Scenario:
    if not 0 < density <= 1:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    n = int(round(density * ring_cells))
    if n > ring_cells:
        raise Overfull(f"{n} vehicles do not fit on {ring_cells} cells")
    n = max(n, 1)
    cells = np.sort(rng.choice(ring_cells, size=n, replace=False))[::-1]
    return Scenario(road_length_m=float(ring_cells), cell_length_m=1.0, stop_lines_m=(), T=steps,
                    initial_positions=tuple(int(c) for c in cells), ring_cells=ring_cells)


def flow_density_sweep(model: str, densities: Sequence[float], ring_cells: int = 1000, warmup: int = 1000,
                       measure: int = 1000, seed: int = 0, cal: Optional[Calibration] = None,
                       params: Optional[NaschParams] = None, strict: bool = False):
    """Flow-density points on a periodic ring, flow in veh/h per lane.

    Flow is the summed vehicle displacement over the measuring window divided
    by ``ring_cells * measure``. Fuzzy points carry a triangular flow built from
    the three component channels. Random placement puts components outside
    their [L, H] bounds from the first steps, so fuzzy runs default to
    monitoring excursions rather than stopping on them.
    """
    from .nasch import child_rng

    if model == "fuzzy" and cal is None:
        raise ValueError("fuzzy sweep needs a calibration")
    out = []
    for k, rho in enumerate(densities):
        if rho * ring_cells > ring_cells + 1e-9:
            raise Overfull(f"density {rho} exceeds one vehicle per cell")
        place = child_rng(seed, k)
        scen = ring_scenario(rho, ring_cells, warmup + measure, place)
        if model == "fuzzy":
            log = run_fuzzy(scen, cal, strict=strict)
        elif model == "nasch":
            log = run_nasch(scen, params or NaschParams(), child_rng(seed + 1, k))
        else:
            raise ValueError(f"unknown model {model!r}")
        moved = (log.positions[-1] - log.positions[warmup]).sum(axis=1)
        q = moved / (ring_cells * measure) * SECONDS_PER_HOUR
        density = log.n_vehicles / ring_cells
        if model == "fuzzy":
            out.append((density, sorted_tfn(q[c] for c in log.component_channels)))
        else:
            out.append((density, float(q[0])))
    return out


# operation counts ------------------------------------------------------------

def op_cost_report(fuzzy_log: TrajectoryLog, ensemble: Ensemble) -> dict:
    """Basic-operation (one rule evaluation) counts of both models on the same scenario."""
    if fuzzy_log.T != ensemble.T or fuzzy_log.n_vehicles != ensemble.N:
        raise DimensionMismatch(f"fuzzy run is T={fuzzy_log.T}, N={fuzzy_log.n_vehicles}; "
                                f"ensemble is T={ensemble.T}, N={ensemble.N}")
    return {
        "T": fuzzy_log.T,
        "N": fuzzy_log.n_vehicles,
        "K": ensemble.K,
        "fuzzy_ops": fuzzy_log.op_count,
        "nasch_ops": ensemble.op_count,
        "ratio": ensemble.K / 5,
    }
