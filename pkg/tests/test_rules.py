import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fuzzyca.errors import InvalidRuleTable, UnknownRule, VelocityOutOfRange
from fuzzyca.rules import (NaschParams, RuleTable, builtin_rule, measure_stationary, nasch_velocity,
                           rule_saturation_flow, table_velocity, validate_table)

U1 = [[0, -1, 1, 1, 1, 1], [0, 1, 1, 1, 2, 2], [0, 1, 1, 1, 2, 2], [0, 1, 1, 1, 2, 2]]
U2 = [[0, -1, 1, 2, 1, 1], [0, 1, 1, 2, 2, 2], [0, 1, 1, 2, 3, 2], [0, 1, 1, 2, 3, 2]]


def test_builtin_tables(R1, R2):
    assert [list(r) for r in R1.u] == U1
    assert [list(r) for r in R2.u] == U2
    assert (R1.v_max, R1.g_stat) == (2, 4)
    assert (R2.v_max, R2.g_stat) == (2, 3)


def test_unknown_rule():
    with pytest.raises(UnknownRule):
        builtin_rule("R3")


def test_saturation_flow(R1, R2):
    assert R1.saturation_flow * 3600 == 1440
    assert R2.saturation_flow * 3600 == 1800
    assert rule_saturation_flow(2, 4) == 0.4


def test_array_read_only(R1):
    assert R1.array.dtype == np.int64
    with pytest.raises(ValueError):
        R1.array[0, 0] = 5


def test_lookup_example(R1, R2):
    # previous velocity 1, gap 3
    assert table_velocity(R1, 1, 3, 3) == 1
    assert table_velocity(R2, 1, 3, 3) == 2


def test_large_gaps_use_last_column(R1, R2):
    for g in (5, 6, 50, 10 ** 9):
        assert table_velocity(R1, 2, g, g) == 2
        assert table_velocity(R2, 3, g, g) == 2


def test_delayed_start(R1, R2):
    # stopped with one free cell: move only if that cell was free a step earlier
    for rule in (R1, R2):
        assert table_velocity(rule, 0, 1, 0) == 0
        assert table_velocity(rule, 0, 1, 1) == 1
        # a red light can shrink the gap below the remembered one
        assert table_velocity(rule, 0, 1, 7) == 1


@pytest.mark.parametrize("v", [-1, 4, 9])
def test_velocity_out_of_range(R1, v):
    with pytest.raises(VelocityOutOfRange):
        table_velocity(R1, v, 2, 2)


def test_never_exceeds_gap(R1, R2):
    for rule, v, g, pg in itertools.product((R1, R2), range(4), range(12), range(12)):
        assert 0 <= table_velocity(rule, v, g, pg) <= g


@pytest.mark.parametrize("mutate", [
    lambda u: u[:3],
    lambda u: [r[:5] for r in u],
    lambda u: [[1] + r[1:] if j == 2 else r for j, r in enumerate(u)],
    lambda u: [[0, 1, -1, 1, 1, 1]] + u[1:],
    lambda u: u[:3] + [[0, 1, 1, 1, 4, 2]],
    lambda u: u[:3] + [[0, 2, 1, 1, 2, 2]],
])
def test_invalid_tables(mutate):
    with pytest.raises(InvalidRuleTable):
        validate_table(mutate([list(r) for r in U1]))


def test_custom_measures_stationary_state():
    assert RuleTable.custom("mine", U1).g_stat == 4
    r = RuleTable.custom("mine2", U2)
    assert (r.v_max, r.g_stat) == (2, 3)


def test_custom_rule_that_never_moves():
    with pytest.raises(InvalidRuleTable):
        RuleTable.custom("stuck", [[0] * 6] * 4)


def test_measure_stationary_faster_rule():
    # accelerate to 3 whenever the gap allows it
    u = [[0, 1, 1, 1, 1, 1], [0, 1, 2, 2, 2, 2], [0, 1, 2, 3, 3, 3], [0, 1, 2, 3, 3, 3]]
    v, g = measure_stationary(u)
    assert v == 3


def test_nasch_params():
    assert NaschParams(2, 0.2).free_flow_velocity == pytest.approx(1.8)
    with pytest.raises(ValueError):
        NaschParams(2, 1.5)
    with pytest.raises(ValueError):
        NaschParams(0, 0.1)


def test_nasch_velocity_grid():
    # oracle: both sub-rules written out by cases
    for vmax, v, g in itertools.product((1, 2, 5), range(6), range(8)):
        p = NaschParams(vmax, 0.3)
        high = v + 1
        if g < high:
            high = g
        if vmax < high:
            high = vmax
        assert nasch_velocity(p, v, g, False) == high
        assert nasch_velocity(p, v, g, True) == (high - 1 if high > 0 else 0)


@given(st.integers(1, 5), st.integers(0, 10), st.integers(0, 50), st.booleans())
def test_nasch_velocity_safe(vmax, v, g, dec):
    out = nasch_velocity(NaschParams(vmax, 0.5), v, g, dec)
    assert 0 <= out <= min(g, vmax)
