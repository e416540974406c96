"""Scenario geometry, builders and the JSON config format."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, GeometryError
from .fuzzy import TriangularFuzzy
from .lattice import Channel, SignalSchedule, active_halt_cells
from .rules import NaschParams, RuleTable, builtin_rule

NASCH_CELL_M = 7.5
FUZZY_CELL_M = 6.75
ARTERIAL_LENGTH_M = 3000.0
ARTERIAL_STOP_LINES_M = (750.0, 1500.0, 2250.0)


def cell_of(position_m: float, cell_length_m: float) -> int:
    # round first so 750 / 7.5 lands on 100, not 99.999...
    return math.floor(round(position_m / cell_length_m, 9))


@dataclass(frozen=True)
class Scenario:
    road_length_m: float
    cell_length_m: float
    stop_lines_m: tuple[float, ...]
    schedules: tuple[SignalSchedule, ...] = ()
    initial_queue_per_intersection: int = 0
    last_vehicle_at_first_cell: bool = False
    T: int = 3600
    # explicit start cells override the queue layout
    initial_positions: Optional[tuple[int, ...]] = None
    ring_cells: int = 0
    # lead vehicle first; everyone starts at rest when unset
    initial_velocities: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "stop_lines_m", tuple(float(x) for x in self.stop_lines_m))
        object.__setattr__(self, "schedules", tuple(self.schedules))
        if self.initial_positions is not None:
            object.__setattr__(self, "initial_positions", tuple(int(x) for x in self.initial_positions))
        if self.initial_velocities is not None:
            object.__setattr__(self, "initial_velocities", tuple(int(v) for v in self.initial_velocities))
        if self.cell_length_m <= 0:
            raise GeometryError("cell length must be positive")
        if self.T < 0:
            raise GeometryError("horizon T must be non-negative")
        lines = self.stop_lines_m
        if any(b <= a for a, b in zip(lines, lines[1:])):
            raise GeometryError(f"stop lines must be strictly increasing: {lines}")
        if lines and (lines[0] < 0 or lines[-1] > self.road_length_m):
            raise GeometryError("stop lines must lie on the road")
        if self.initial_queue_per_intersection < 0:
            raise GeometryError("queue length must be non-negative")
        n = len(self.initial_cells())  # geometry check
        if self.initial_velocities is not None:
            if len(self.initial_velocities) != n:
                raise GeometryError(f"{len(self.initial_velocities)} initial velocities for {n} vehicles")
            if any(v < 0 for v in self.initial_velocities):
                raise GeometryError("initial velocities must be non-negative")

    @property
    def stop_cells(self) -> list[int]:
        return [cell_of(x, self.cell_length_m) for x in self.stop_lines_m]

    @property
    def n_vehicles(self) -> int:
        return len(self.initial_cells())

    def initial_cells(self) -> list[int]:
        """Start cells, lead vehicle first."""
        if self.initial_positions is not None:
            cells = sorted(self.initial_positions, reverse=True)
            if len(set(cells)) != len(cells):
                raise GeometryError("two vehicles share a start cell")
            if self.ring_cells and cells and cells[0] - cells[-1] >= self.ring_cells:
                raise GeometryError("initial positions do not fit on the ring")
            return cells
        q = self.initial_queue_per_intersection
        cells = []
        lower = 0 if self.last_vehicle_at_first_cell else -1
        for s in self.stop_cells:
            tail = s - q
            if q and tail <= lower:
                raise GeometryError(f"queue of {q} behind stop cell {s} reaches cell {tail}, "
                                    f"upstream limit is cell {lower}")
            cells.extend(range(s - 1, tail - 1, -1))
            lower = s
        if self.last_vehicle_at_first_cell:
            cells.append(0)
        return sorted(cells, reverse=True)

    def initial_channel(self) -> Channel:
        return Channel.at_rest(self.initial_cells(), active_halt_cells(self.schedules, 0), self.ring_cells,
                               self.initial_velocities)

    def schedule_array(self) -> np.ndarray:
        arr = np.array([(s.halt_cell, s.cycle, s.green_start, s.green_duration) for s in self.schedules],
                       dtype=np.int64)
        return arr.reshape(len(self.schedules), 4)

    # config serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "geometry": {
                "road_length_m": self.road_length_m,
                "cell_length_m": self.cell_length_m,
                "stop_lines_m": list(self.stop_lines_m),
                "ring_cells": self.ring_cells,
            },
            "signals": {"schedules": [asdict(s) for s in self.schedules]},
            "initial": {
                "queue_per_intersection": self.initial_queue_per_intersection,
                "last_vehicle_at_first_cell": self.last_vehicle_at_first_cell,
                "positions": None if self.initial_positions is None else list(self.initial_positions),
                "velocities": None if self.initial_velocities is None else list(self.initial_velocities),
            },
            "steps": self.T,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        try:
            geo = d["geometry"]
            cell = float(geo["cell_length_m"])
            lines = [float(x) for x in geo.get("stop_lines_m", [])]
            stop_cells = [cell_of(x, cell) for x in lines]
            init = d.get("initial", {})
            return cls(
                road_length_m=float(geo["road_length_m"]),
                cell_length_m=cell,
                stop_lines_m=tuple(lines),
                schedules=tuple(_parse_signals(d.get("signals"), stop_cells)),
                initial_queue_per_intersection=int(init.get("queue_per_intersection", 0)),
                last_vehicle_at_first_cell=bool(init.get("last_vehicle_at_first_cell", False)),
                T=int(d.get("steps", 3600)),
                initial_positions=None if init.get("positions") is None else tuple(init["positions"]),
                ring_cells=int(geo.get("ring_cells", 0)),
                initial_velocities=None if init.get("velocities") is None else tuple(init["velocities"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad scenario config: {exc!r}") from exc


def _parse_signals(sig, stop_cells: Sequence[int]) -> list[SignalSchedule]:
    if not sig:
        return []
    if "schedules" in sig:
        out = []
        for s in sig["schedules"]:
            if "halt_cell" in s:
                halt = int(s["halt_cell"])
            else:
                halt = stop_cells[int(s["stop_line"])]
            out.append(SignalSchedule(halt, int(s["cycle"]), int(s["green_start"]), int(s["green_duration"])))
        return out
    cycle, green = int(sig["cycle"]), int(sig["green"])
    offset = int(sig.get("offset", 0))
    return coordinated_schedules(stop_cells, cycle, green, offset)


def coordinated_schedules(stop_cells: Sequence[int], cycle: int, green: int, offset: int) -> list[SignalSchedule]:
    """Identical timings at every stop line, green shifted by ``offset`` per successive intersection."""
    return [SignalSchedule(c, cycle, (k * offset) % cycle, green) for k, c in enumerate(stop_cells)]


def build_arterial(queue_len: int, cycle: int = 60, green: int = 30, offset: int = 10,
                   model: str = "fuzzy", T: int = 3600) -> Scenario:
    """Three-intersection one-way arterial: 3 km, stop lines every 750 m.

    Each stop line has a standing queue of ``queue_len`` vehicles and one
    extra vehicle stands in the first cell of the road.
    """
    if queue_len < 1:
        raise GeometryError("queue_len must be >= 1")
    cell = _cell_length(model)
    stop_cells = [cell_of(x, cell) for x in ARTERIAL_STOP_LINES_M]
    return Scenario(
        road_length_m=ARTERIAL_LENGTH_M,
        cell_length_m=cell,
        stop_lines_m=ARTERIAL_STOP_LINES_M,
        schedules=tuple(coordinated_schedules(stop_cells, cycle, green, offset)),
        initial_queue_per_intersection=queue_len,
        last_vehicle_at_first_cell=True,
        T=T,
    )


def build_saturated(queue_len: Optional[int] = None, T: int = 3600, model: str = "fuzzy") -> Scenario:
    """A standing queue behind a single stop line that stays green.

    The default queue holds ``T + 1`` vehicles, enough for any model since at
    most one vehicle crosses a stop line per step.
    """
    if queue_len is None:
        queue_len = T + 1
    cell = _cell_length(model)
    stop_m = queue_len * cell
    return Scenario(
        road_length_m=stop_m + (4 * T + 2) * cell,
        cell_length_m=cell,
        stop_lines_m=(stop_m,),
        initial_queue_per_intersection=queue_len,
        T=T,
    )


def build_single_vehicle(T: int, model: str = "fuzzy", stop_line_m: Optional[float] = None,
                         velocity: int = 0) -> Scenario:
    """One vehicle in cell 0 on an open road."""
    cell = _cell_length(model)
    lines = () if stop_line_m is None else (stop_line_m,)
    length = max((4 * T + 2) * cell, stop_line_m or 0.0)
    return Scenario(length, cell, lines, T=T, initial_positions=(0,), initial_velocities=(velocity,))


def _cell_length(model: str) -> float:
    if model == "fuzzy":
        return FUZZY_CELL_M
    if model == "nasch":
        return NASCH_CELL_M
    raise ConfigError(f"model must be 'fuzzy' or 'nasch', got {model!r}")


# run configuration ------------------------------------------------------

@dataclass(frozen=True)
class ModelSettings:
    kind: str = "fuzzy"
    rule_L: str = "R1"
    rule_H: str = "R2"
    custom_rules: dict = field(default_factory=dict)
    saturation_flow: Optional[tuple[float, float, float]] = (1503.0, 1575.0, 1638.0)
    alpha: Optional[tuple[float, float, float]] = None
    v_max: int = 2
    p: float = 0.2
    runs: int = 500
    seed: int = 0

    def rule(self, name: str) -> RuleTable:
        if name in self.custom_rules:
            return RuleTable.custom(name, self.custom_rules[name])
        return builtin_rule(name)

    @property
    def nasch(self) -> NaschParams:
        return NaschParams(self.v_max, self.p)


@dataclass(frozen=True)
class OutputSettings:
    dir: str = "out"
    sample_every: int = 60
    # index into stop_lines_m; -1 is the last stop line
    measure_stop_line: int = -1
    trajectories: bool = True


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    model: ModelSettings = ModelSettings()
    output: OutputSettings = OutputSettings()

    def measure_cell(self) -> Optional[int]:
        cells = self.scenario.stop_cells
        if not cells:
            return None
        return cells[self.output.measure_stop_line]

    def to_dict(self) -> dict:
        d = self.scenario.to_dict()
        m = asdict(self.model)
        for key in ("saturation_flow", "alpha"):
            if m[key] is not None:
                m[key] = list(m[key])
        m["steps"] = d.pop("steps")
        return {"model": m, **d, "output": asdict(self.output)}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        model = dict(d.get("model", {}))
        steps = model.pop("steps", 3600)
        try:
            for key in ("saturation_flow", "alpha"):
                if model.get(key) is not None:
                    model[key] = tuple(float(x) for x in model[key])
            if "alpha" in model and model["alpha"] is not None and "saturation_flow" not in model:
                model["saturation_flow"] = None
            settings = ModelSettings(**model)
            output = OutputSettings(**d.get("output", {}))
        except TypeError as exc:
            raise ConfigError(f"bad model/output section: {exc}") from exc
        scen = Scenario.from_dict({**d, "steps": steps})
        return cls(scen, settings, output)


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return RunConfig.from_dict(data)


def dump_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def saturation_tfn(settings: ModelSettings) -> Optional[TriangularFuzzy]:
    if settings.saturation_flow is None:
        return None
    return TriangularFuzzy.from_list(settings.saturation_flow)


def with_horizon(scenario: Scenario, T: int) -> Scenario:
    return replace(scenario, T=T)
