"""Command-line entry point: ``fuzzyca <subcommand> ...``.

Every subcommand writes its tables under ``--out`` and prints a JSON summary
to stdout. Failures print a JSON error record to stderr and exit with 2.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, FuzzyCAError, NeverArrived
from .fuzzy import TriangularFuzzy
from .fuzzy_sim import Calibration, calibrate_alpha, run_fuzzy
from .metrics import (SECONDS_PER_HOUR, count_series, crossings_per_channel, flow_density_sweep,
                      fuzzy_travel_time, nasch_saturation_samples, op_cost_report, queue_discharge_trace,
                      rule_switch_trace, travel_time)
from .nasch import GENERATOR, EnsembleConfig, histogram, run_ensemble, summary
from .rules import NaschParams, RuleTable, builtin_rule
from .scenario import RunConfig, load_config, saturation_tfn
from .trajectory import TrajectoryLog

SEED_ENV = "FUZZYCA_SEED"


class UsageError(FuzzyCAError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# helpers ---------------------------------------------------------------------

def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def pick_seed(flag: Optional[int], configured: int) -> int:
    """Command-line flag, then the environment, then the config file."""
    if flag is not None:
        return flag
    if os.environ.get(SEED_ENV) is not None:
        return default_seed()
    return configured


def provenance(command: str, **params) -> dict:
    return {"package": "fuzzyca", "version": __version__, "command": command, **params}


def write_csv(path: Path, header: Sequence[str], rows) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)
            n += 1
    return n


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, TriangularFuzzy):
        return x.to_list()
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _rule(name: str, table: Optional[str]) -> RuleTable:
    if table:
        try:
            u = json.loads(Path(table).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read rule table {table}: {exc}") from exc
        return RuleTable.custom(name, u)
    return builtin_rule(name)


def calibration_from(cfg: RunConfig) -> Calibration:
    m = cfg.model
    rule_l, rule_h = m.rule(m.rule_L), m.rule(m.rule_H)
    if m.alpha is not None:
        return Calibration(rule_l, rule_h, m.alpha)
    target = saturation_tfn(m)
    if target is None:
        raise ConfigError("model needs either 'alpha' or 'saturation_flow'")
    return calibrate_alpha(target, rule_l, rule_h)


def _sample_times(T: int, every: int) -> list[int]:
    if every <= 0:
        raise ConfigError("output.sample_every must be positive")
    return list(range(0, T + 1, every))


# subcommands -----------------------------------------------------------------

def cmd_discharge(args) -> dict:
    rule = _rule(args.rule, args.table)
    trace = queue_discharge_trace(rule, args.queue, args.steps)
    out = Path(args.out) / f"discharge_{rule.name}.csv"
    write_csv(out, ("t", "cell", "state"), trace.rows())
    return {
        "rule": rule.name, "v_max": trace.v_max, "gap": trace.gap, "uniform": trace.uniform,
        "saturation_flow_veh_h": trace.saturation_flow, "trace_csv": str(out),
        "provenance": provenance("discharge", queue=args.queue, steps=args.steps),
    }


def cmd_calibrate(args) -> dict:
    rule_l, rule_h = _rule(args.ruleL, None), _rule(args.ruleH, None)
    cal = calibrate_alpha(TriangularFuzzy(args.s1, args.s2, args.s3), rule_l, rule_h)
    return {"alpha": list(cal.alpha), "rule_L": rule_l.name, "rule_H": rule_h.name,
            "saturation_flow_veh_h": cal.saturation_flow().to_list(),
            "provenance": provenance("calibrate")}


def _fuzzy_metrics(cfg: RunConfig, log_: TrajectoryLog) -> dict:
    scen = cfg.scenario
    cell = cfg.measure_cell()
    times = _sample_times(scen.T, cfg.output.sample_every)
    res: dict = {"vehicles": log_.n_vehicles, "steps": scen.T, "op_count": log_.op_count,
                 "measure_cell": cell, "travel_time": None, "counts": []}
    if cell is None:
        return res
    if log_.n_vehicles:
        try:
            res["travel_time"] = fuzzy_travel_time(log_, log_.n_vehicles - 1, cell)
        except NeverArrived as exc:
            res["travel_time_error"] = str(exc)
    counts = count_series(log_, times, cell)[:, log_.component_channels]
    res["counts"] = [{"t": t, "count": sorted(int(c) for c in row)} for t, row in zip(times, counts)]
    res["crossings"] = crossings_per_channel(log_, cell)[log_.component_channels].tolist()
    return res


def cmd_simulate_fuzzy(args) -> dict:
    cfg = load_config(args.config)
    cal = calibration_from(cfg)
    out = Path(args.out or cfg.output.dir)
    t0 = time.perf_counter()
    log_ = run_fuzzy(cfg.scenario, cal, strict=not args.monitor_bounds)
    elapsed = time.perf_counter() - t0
    files = {}
    if cfg.output.trajectories:
        path = out / "trajectories.csv"
        write_csv(path, ("t", "vehicle", "channel", "position", "velocity"), _trajectory_rows(log_))
        files["trajectories"] = str(path)
    metrics = _fuzzy_metrics(cfg, log_)
    metrics.update(
        calibration=cal.to_dict(),
        bound_excursions=log_.metadata["bound_excursions"],
        component_order_violations=log_.metadata["component_order_violations"],
        wall_time_s=elapsed,
        provenance=provenance("simulate-fuzzy", config=cfg.to_dict(), strict_bounds=not args.monitor_bounds),
    )
    path = out / "metrics.json"
    write_json(path, metrics)
    files["metrics"] = str(path)
    return {"files": files, **{k: metrics[k] for k in ("vehicles", "op_count", "travel_time")}}


def _trajectory_rows(log_: TrajectoryLog):
    T1, C, N = log_.positions.shape
    for t in range(T1):
        for i in range(N):
            for c in range(C):
                yield t, i, log_.channels[c], int(log_.positions[t, c, i]), int(log_.velocities[t, c, i])


def cmd_simulate_nasch(args) -> dict:
    cfg = load_config(args.config)
    scen = cfg.scenario
    runs = args.runs if args.runs is not None else cfg.model.runs
    seed = pick_seed(args.seed, cfg.model.seed)
    cell = cfg.measure_cell()
    times = _sample_times(scen.T, cfg.output.sample_every)
    n = scen.n_vehicles

    def metric(log_):
        row = {}
        if cell is not None:
            row["throughput_veh_h"] = int(crossings_per_channel(log_, cell)[0]) * SECONDS_PER_HOUR / max(scen.T, 1)
            try:
                row["travel_time"] = float(travel_time(log_, n - 1, cell)) if n else math.nan
            except NeverArrived:
                row["travel_time"] = math.nan
            for t, c in zip(times, count_series(log_, times, cell)[:, 0]):
                row[f"count@{t}"] = int(c)
        return row

    cfg_e = EnsembleConfig(cfg.model.nasch, runs, max(scen.T, 1), seed)
    t0 = time.perf_counter()
    ens = run_ensemble(replace(scen, T=max(scen.T, 1)), cfg_e, metric)
    elapsed = time.perf_counter() - t0
    out = Path(args.out or cfg.output.dir)
    names = list(ens.samples)
    rows = ((k, name, ens[name][k]) for k in range(ens.K) for name in names)
    write_csv(out / "samples.csv", ("run", "metric", "value"), rows)
    stats = {}
    for name in names:
        data = ens[name]
        ok = data[np.isfinite(data)]
        stats[name] = summary(ok) if ok.size else None
        if ok.size < data.size:
            stats[name] = {**(stats[name] or {}), "never_arrived": int(data.size - ok.size)}
    files = {"samples": str(out / "samples.csv")}
    if "throughput_veh_h" in ens.samples:
        write_csv(out / "histogram.csv", ("bin_start", "count"),
                  histogram(ens["throughput_veh_h"], args.bin_width))
        files["histogram"] = str(out / "histogram.csv")
    report = {
        "summary": stats, "runs": ens.K, "op_count": ens.op_count, "draws": ens.draws, "wall_time_s": elapsed,
        "provenance": provenance("simulate-nasch", config=cfg.to_dict(), runs=runs, seed=seed,
                                 generator=GENERATOR, bin_width=args.bin_width),
    }
    write_json(out / "summary.json", report)
    files["summary"] = str(out / "summary.json")
    return {"files": files, "runs": ens.K, "op_count": ens.op_count,
            "summary": {k: v for k, v in stats.items() if not k.startswith("count@")}}


def _grid(start: float, stop: float, step: float) -> list[float]:
    if step <= 0 or stop < start:
        raise ConfigError("need step > 0 and to >= from")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(n)]


def cmd_sweep_p(args) -> dict:
    seed = default_seed() if args.seed is None else args.seed
    rows = []
    for p in _grid(args.p_from, args.p_to, args.step):
        ens = nasch_saturation_samples(NaschParams(args.vmax, p), args.runs, args.steps, seed)
        s = summary(ens["saturation_flow"])
        rows.append((p, s["median"], s["p05"], s["p95"], s["spread"]))
    path = Path(args.out) / "sweep_p.csv"
    write_csv(path, ("p", "median", "p05", "p95", "spread"), rows)
    return {"file": str(path), "points": len(rows),
            "provenance": provenance("sweep-p", runs=args.runs, steps=args.steps, seed=seed, v_max=args.vmax,
                                     generator=GENERATOR)}


def cmd_fundamental_diagram(args) -> dict:
    seed = default_seed() if args.seed is None else args.seed
    densities = _grid(args.d_from, args.d_to, args.step)
    cal = params = None
    if args.model == "fuzzy":
        cal = calibrate_alpha(TriangularFuzzy(*args.saturation_flow), builtin_rule(args.ruleL),
                              builtin_rule(args.ruleH))
    else:
        params = NaschParams(args.vmax, args.p)
    pts = flow_density_sweep(args.model, densities, args.ring, args.warmup, args.measure, seed, cal, params,
                             strict=args.strict_bounds)
    path = Path(args.out) / f"fundamental_{args.model}.csv"
    if args.model == "fuzzy":
        write_csv(path, ("density", "flow_m1", "flow_m2", "flow_m3"), ((d, *q) for d, q in pts))
    else:
        write_csv(path, ("density", "flow"), pts)
    return {"file": str(path), "points": len(pts),
            "provenance": provenance("fundamental-diagram", model=args.model, ring_cells=args.ring,
                                     warmup=args.warmup, measure=args.measure, seed=seed)}


def cmd_switch(args) -> dict:
    tr = rule_switch_trace(builtin_rule(args.ruleL), builtin_rule(args.ruleH), args.on, args.off, args.steps,
                           args.window)
    path = Path(args.out) / "switch.csv"
    write_csv(path, ("t", "crossings", "flow"), ((t, int(c), f) for t, (c, f) in enumerate(zip(tr.crossings, tr.flow))))
    return {"file": str(path), "rise_delay": tr.rise_delay, "fall_delay": tr.fall_delay,
            "provenance": provenance("switch", on=args.on, off=args.off, steps=args.steps, window=args.window)}


def cmd_benchmark(args) -> dict:
    cfg = load_config(args.config)
    scen = cfg.scenario
    cal = calibration_from(cfg)
    seed = pick_seed(args.seed, cfg.model.seed)
    # compile the kernels before timing
    small = replace(scen, T=min(scen.T, 2))
    run_fuzzy(small, cal, record=False, strict=False)
    run_ensemble(small, EnsembleConfig(cfg.model.nasch, 1, max(small.T, 1), seed), lambda _: {}, record=False)

    t0 = time.perf_counter()
    flog = run_fuzzy(scen, cal, record=False, strict=False)
    t_fuzzy = time.perf_counter() - t0
    t0 = time.perf_counter()
    ens = run_ensemble(scen, EnsembleConfig(cfg.model.nasch, args.runs, scen.T, seed), lambda _: {},
                       record=False)
    t_nasch = time.perf_counter() - t0
    report = op_cost_report(flog, ens)
    report.update(fuzzy_seconds=t_fuzzy, nasch_seconds=t_nasch,
                  speedup=t_nasch / t_fuzzy if t_fuzzy > 0 else math.inf,
                  provenance=provenance("benchmark", config=cfg.to_dict(), runs=args.runs, seed=seed,
                                        generator=GENERATOR))
    if args.out:
        write_json(Path(args.out) / "benchmark.json", report)
    return report


# parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fuzzyca", description="Fuzzy and NaSch cellular-automaton traffic simulation.")
    p.add_argument("--version", action="version", version=f"fuzzyca {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("discharge", help="queue-discharge trace of one rule")
    d.add_argument("--rule", default="R1")
    d.add_argument("--table", help="JSON file with a 4x6 rule table (custom rules)")
    d.add_argument("--queue", type=int, default=10)
    d.add_argument("--steps", type=int, default=60)
    d.add_argument("--out", default="out")
    d.set_defaults(func=cmd_discharge)

    c = sub.add_parser("calibrate", help="calibration parameters for a fuzzy saturation flow")
    c.add_argument("--s1", type=float, required=True)
    c.add_argument("--s2", type=float, required=True)
    c.add_argument("--s3", type=float, required=True)
    c.add_argument("--ruleL", default="R1")
    c.add_argument("--ruleH", default="R2")
    c.set_defaults(func=cmd_calibrate)

    f = sub.add_parser("simulate-fuzzy", help="one fuzzy run of a configured scenario")
    f.add_argument("--config", required=True)
    f.add_argument("--out")
    f.add_argument("--monitor-bounds", action="store_true",
                   help="count bound excursions instead of failing on the first one")
    f.set_defaults(func=cmd_simulate_fuzzy)

    n = sub.add_parser("simulate-nasch", help="seeded NaSch ensemble of a configured scenario")
    n.add_argument("--config", required=True)
    n.add_argument("--runs", type=int)
    n.add_argument("--seed", type=int)
    n.add_argument("--bin-width", type=float, default=10.0)
    n.add_argument("--out")
    n.set_defaults(func=cmd_simulate_nasch)

    s = sub.add_parser("sweep-p", help="saturation-flow percentiles against p")
    s.add_argument("--from", dest="p_from", type=float, default=0.0)
    s.add_argument("--to", dest="p_to", type=float, default=0.8)
    s.add_argument("--step", type=float, default=0.01)
    s.add_argument("--runs", type=int, default=100)
    s.add_argument("--steps", type=int, default=3600)
    s.add_argument("--vmax", type=int, default=2)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", default="out")
    s.set_defaults(func=cmd_sweep_p)

    g = sub.add_parser("fundamental-diagram", help="flow-density points on a ring")
    g.add_argument("--model", choices=("fuzzy", "nasch"), required=True)
    g.add_argument("--from", dest="d_from", type=float, default=0.05)
    g.add_argument("--to", dest="d_to", type=float, default=1.0)
    g.add_argument("--step", type=float, default=0.05)
    g.add_argument("--ring", type=int, default=1000)
    g.add_argument("--warmup", type=int, default=1000)
    g.add_argument("--measure", type=int, default=1000)
    g.add_argument("--seed", type=int)
    g.add_argument("--saturation-flow", type=float, nargs=3, default=(1503.0, 1575.0, 1638.0))
    g.add_argument("--ruleL", default="R1")
    g.add_argument("--ruleH", default="R2")
    g.add_argument("--vmax", type=int, default=2)
    g.add_argument("--p", type=float, default=0.2)
    g.add_argument("--strict-bounds", action="store_true",
                   help="fail when a fuzzy component leaves its [L, H] bounds")
    g.add_argument("--out", default="out")
    g.set_defaults(func=cmd_fundamental_diagram)

    w = sub.add_parser("switch", help="stop-line flow when all vehicles swap rules")
    w.add_argument("--ruleL", default="R1")
    w.add_argument("--ruleH", default="R2")
    w.add_argument("--on", type=int, default=100)
    w.add_argument("--off", type=int, default=160)
    w.add_argument("--steps", type=int, default=260)
    w.add_argument("--window", type=int, default=10)
    w.add_argument("--out", default="out")
    w.set_defaults(func=cmd_switch)

    b = sub.add_parser("benchmark", help="op counts and wall-clock time of both models")
    b.add_argument("--config", required=True)
    b.add_argument("--runs", type=int, default=500)
    b.add_argument("--seed", type=int)
    b.add_argument("--out")
    b.set_defaults(func=cmd_benchmark)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        result = args.func(args)
    except (FuzzyCAError, ValueError, OSError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 2
    print(json.dumps(result, indent=2, default=_jsonable))
    return 0


if __name__ == "__main__":
    sys.exit(main())
