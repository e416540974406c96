"""Stochastic Nagel-Schreckenberg baseline run as a seeded Monte Carlo ensemble.

Each step a vehicle draws one uniform ``xi`` (vehicles in index order) and
uses the decelerating rule NSL when ``xi < p``, NSH otherwise.

Run ``k`` of an ensemble draws from ``numpy.random.PCG64`` seeded with
``SeedSequence(master_seed, spawn_key=(k,))``, so runs are independent of
each other and of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import _kernels as K
from .errors import CollisionDetected, EmptySample
from .lattice import Channel
from .rules import NaschParams
from .scenario import Scenario
from .trajectory import NASCH_CHANNELS, TrajectoryLog

GENERATOR = "numpy.random.PCG64 seeded by SeedSequence(master_seed, spawn_key=(run,))"
DRAW_CHUNK = 512

MetricFn = Callable[[TrajectoryLog], Mapping[str, object]]


def child_rng(master_seed: int, run: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(run,))))


def step_nasch(ch: Channel, params: NaschParams, halt, rng: np.random.Generator, ring_cells: int = 0) -> Channel:
    pos, vel, pgap = ch.arrays()
    xi = rng.random(len(ch))
    halts = np.array(sorted(halt), dtype=np.int64)
    gaps = np.empty_like(pos)
    newv = np.empty_like(pos)
    status = K.nasch_step(pos, vel, pgap, xi, params.v_max, params.p, halts, len(halts), ring_cells, gaps, newv)
    if status != K.OK:
        raise CollisionDetected("NaSch update broke vehicle ordering")
    return Channel.from_arrays(pos, vel, pgap)


def run_nasch(scenario: Scenario, params: NaschParams, rng: np.random.Generator,
              record: bool = True, count_cell: Optional[int] = None) -> TrajectoryLog:
    pos, vel, pgap = scenario.initial_channel().arrays()
    start = pos.copy()
    T, n = scenario.T, len(pos)
    shape = (T + 1, 1, n) if record else (1, 1, n)
    rec_pos = np.zeros(shape, dtype=np.int64)
    rec_vel = np.zeros(shape, dtype=np.int64)
    rec_pos[0, 0] = pos
    rec_vel[0, 0] = vel
    crossings = np.zeros(1, dtype=np.int64)
    sched = scenario.schedule_array()
    cell = -1 if count_cell is None else int(count_cell)
    ops = draws = 0
    for t0 in range(0, T, DRAW_CHUNK):
        t1 = min(T, t0 + DRAW_CHUNK)
        xi = rng.random((t1 - t0, n))
        draws += xi.size
        status, t, k = K.nasch_run(pos, vel, pgap, xi, params.v_max, params.p, sched, scenario.ring_cells,
                                   t0, t1, rec_pos, rec_vel, record, cell, crossings)
        ops += k
        if status != K.OK:
            raise CollisionDetected(f"NaSch update broke vehicle ordering at step {t}")
    return TrajectoryLog(
        channels=NASCH_CHANNELS,
        T=T,
        positions=rec_pos if record else None,
        velocities=rec_vel if record else None,
        final_positions=pos[None],
        final_velocities=vel[None],
        initial_positions=start,
        op_count=int(ops),
        metadata={"model": "nasch", "v_max": params.v_max, "p": params.p, "steps": T, "vehicles": n,
                  "draws": int(draws)},
        count_cell=count_cell,
        crossings=crossings if count_cell is not None else None,
    )


@dataclass(frozen=True)
class EnsembleConfig:
    params: NaschParams
    K: int
    T: int
    master_seed: int = 0

    def __post_init__(self):
        if self.K < 1 or self.T < 1:
            raise ValueError(f"need K >= 1 and T >= 1, got K={self.K}, T={self.T}")


@dataclass
class Ensemble:
    """Per-run metric samples, stacked by run index along axis 0."""

    samples: dict[str, np.ndarray]
    K: int
    T: int
    N: int
    op_count: int
    draws: int
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.samples[name]


def run_ensemble(scenario: Scenario, cfg: EnsembleConfig, metric_fn: MetricFn,
                 record: bool = True, count_cell: Optional[int] = None) -> Ensemble:
    """K independent seeded runs reduced by ``metric_fn``.

    ``metric_fn`` maps one run's log to named values (scalars or arrays of a
    fixed shape). Set ``record=False`` with ``count_cell`` when the metric only
    needs stop-line crossing counts; it saves storing every snapshot.
    """
    scen = replace(scenario, T=cfg.T)
    per_run: list[Mapping[str, object]] = []
    ops = draws = 0
    for k in range(cfg.K):
        run_log = run_nasch(scen, cfg.params, child_rng(cfg.master_seed, k), record, count_cell)
        ops += run_log.op_count
        draws += run_log.metadata["draws"]
        per_run.append(metric_fn(run_log))
    names = per_run[0].keys() if per_run else []
    samples = {name: np.array([r[name] for r in per_run]) for name in names}
    return Ensemble(
        samples=samples, K=cfg.K, T=cfg.T, N=scen.n_vehicles, op_count=ops, draws=draws,
        metadata={"model": "nasch", "v_max": cfg.params.v_max, "p": cfg.params.p, "runs": cfg.K,
                  "steps": cfg.T, "master_seed": cfg.master_seed, "generator": GENERATOR},
    )


def percentiles(samples: Sequence[float], q_list: Sequence[float]) -> list[float]:
    """Nearest-rank percentiles: the ``ceil(q/100 * n)``-th smallest sample (at least the first)."""
    data = np.sort(np.asarray(samples, dtype=float).ravel())
    n = data.size
    if n == 0:
        raise EmptySample("percentile of an empty sample")
    out = []
    for q in q_list:
        if not 0 <= q <= 100:
            raise ValueError(f"percentile {q} outside [0, 100]")
        rank = max(1, math.ceil(q / 100.0 * n - 1e-9))
        out.append(float(data[rank - 1]))
    return out


def spread(samples: Sequence[float]) -> float:
    p05, p95 = percentiles(samples, [5, 95])
    return p95 - p05


def summary(samples: Sequence[float]) -> dict:
    p05, p50, p95 = percentiles(samples, [5, 50, 95])
    data = np.asarray(samples, dtype=float)
    return {"p05": p05, "median": p50, "p95": p95, "spread": p95 - p05,
            "min": float(data.min()), "max": float(data.max()), "mean": float(data.mean()), "n": int(data.size)}


def histogram(samples: Sequence[float], bin_width: float = 10.0) -> list[tuple[float, int]]:
    """``(bin_start, count)`` pairs on a grid of multiples of ``bin_width``."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    data = np.asarray(samples, dtype=float).ravel()
    if data.size == 0:
        raise EmptySample("histogram of an empty sample")
    idx = np.floor(data / bin_width).astype(np.int64)
    lo = int(idx.min())
    counts = np.bincount(idx - lo)
    return [((lo + k) * bin_width, int(c)) for k, c in enumerate(counts)]
