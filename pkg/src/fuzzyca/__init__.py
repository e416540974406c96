"""Fuzzy cellular-automaton traffic simulation with a stochastic NaSch baseline."""

__version__ = "0.1.0"

from .errors import FuzzyCAError
from .fuzzy import TriangularFuzzy, make_tfn, membership, scale_tfn, sorted_tfn
from .fuzzy_sim import Calibration, calibrate_alpha, run_fuzzy, saturation_of_alpha, step_fuzzy
from .lattice import Channel, SignalSchedule, advance_channel
from .metrics import (flow_density_sweep, fuzzy_travel_time, fuzzy_vehicle_count, measure_saturation_flow,
                      op_cost_report, queue_discharge_trace, rule_switch_trace)
from .nasch import EnsembleConfig, percentiles, run_ensemble, run_nasch, step_nasch
from .rules import NaschParams, RuleTable, builtin_rule, nasch_velocity, table_velocity
from .scenario import RunConfig, Scenario, build_arterial, build_saturated, load_config

__all__ = [
    "FuzzyCAError", "TriangularFuzzy", "make_tfn", "membership", "scale_tfn", "sorted_tfn",
    "Calibration", "calibrate_alpha", "run_fuzzy", "saturation_of_alpha", "step_fuzzy",
    "Channel", "SignalSchedule", "advance_channel",
    "flow_density_sweep", "fuzzy_travel_time", "fuzzy_vehicle_count", "measure_saturation_flow",
    "op_cost_report", "queue_discharge_trace", "rule_switch_trace",
    "EnsembleConfig", "percentiles", "run_ensemble", "run_nasch", "step_nasch",
    "NaschParams", "RuleTable", "builtin_rule", "nasch_velocity", "table_velocity",
    "RunConfig", "Scenario", "build_arterial", "build_saturated", "load_config",
]
