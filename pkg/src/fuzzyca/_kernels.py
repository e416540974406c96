"""Compiled inner loops.

Same semantics as ``lattice.advance_channel`` with the table / NaSch rules,
over int64 arrays. Channels are rows of 2-D arrays; index 0 of a row is the
lead vehicle. Kernels never raise: they return a status code and the caller
maps it onto an exception.

Signal schedules are passed as an ``(S, 4)`` int64 array of
``(halt_cell, cycle, green_start, green_duration)``.
"""

import numpy as np
from numba import njit

OK = 0
COLLISION = 1
BOUND = 2
VELOCITY = 3

FAR = 1 << 40
ROWS = 4
LAST_COL = 5

# channel rows of a fuzzy state
CH_L = 0
CH_H = 1
N_CHANNELS = 5


@njit(cache=True)
def active_halts(sched, t, out):
    """Write the red halt cells at step ``t`` into ``out`` (ascending); return their count."""
    n = 0
    for s in range(sched.shape[0]):
        cyc = sched[s, 1]
        phase = (t - sched[s, 2]) % cyc
        if phase < 0:
            phase += cyc
        if phase >= sched[s, 3]:
            cell = sched[s, 0]
            j = n
            while j > 0 and out[j - 1] > cell:
                out[j] = out[j - 1]
                j -= 1
            out[j] = cell
            n += 1
    return n


@njit(cache=True)
def fill_gaps(pos, halts, nh, ring, gaps):
    n = pos.shape[0]
    for i in range(n):
        x = pos[i]
        if i > 0:
            lead = pos[i - 1]
        elif ring > 0:
            lead = pos[n - 1] + ring
        else:
            lead = FAR
        for h in range(nh):
            if halts[h] > x:
                if halts[h] < lead:
                    lead = halts[h]
                break
        gaps[i] = lead - x - 1


@njit(cache=True)
def table_velocity(tab, v_prev, gap, prev_gap):
    k = gap if gap < LAST_COL else LAST_COL
    u = tab[v_prev, k]
    if u == -1:
        return prev_gap if prev_gap < gap else gap
    return u


@njit(cache=True)
def apply_velocities(pos, vel, pgap, gaps, newv, ring):
    n = pos.shape[0]
    for i in range(n):
        if newv[i] < 0 or newv[i] > gaps[i]:
            return COLLISION
    for i in range(n):
        pos[i] += newv[i]
        vel[i] = newv[i]
        pgap[i] = gaps[i]
    for i in range(1, n):
        if pos[i - 1] <= pos[i]:
            return COLLISION
    if ring > 0 and n > 1 and pos[n - 1] + ring <= pos[0]:
        return COLLISION
    return OK


@njit(cache=True)
def count_crossings(old, new, cell):
    c = 0
    for i in range(old.shape[0]):
        if old[i] <= cell < new[i]:
            c += 1
    return c


@njit(cache=True)
def fuzzy_step(pos, vel, pgap, tab_l, tab_h, alpha, halts, nh, ring, gaps, newv, strict, excursions):
    """One step of all five channels; returns a status code.

    With ``strict`` a component outside its [L, H] bounds is an error;
    otherwise the excursion is counted in ``excursions[0]`` and the
    comparison with alpha runs on the unclamped normalized position.
    """
    n = pos.shape[1]
    for c in range(N_CHANNELS):
        fill_gaps(pos[c], halts, nh, ring, gaps[c])
    for i in range(n):
        for c in range(N_CHANNELS):
            if vel[c, i] >= ROWS:
                return VELOCITY
        newv[CH_L, i] = table_velocity(tab_l, vel[CH_L, i], gaps[CH_L, i], pgap[CH_L, i])
        newv[CH_H, i] = table_velocity(tab_h, vel[CH_H, i], gaps[CH_H, i], pgap[CH_H, i])
        xl = pos[CH_L, i]
        xh = pos[CH_H, i]
        for m in range(3):
            c = m + 2
            x = pos[c, i]
            if x < xl or x > xh:
                if strict:
                    return BOUND
                excursions[0] += 1
            if xh != xl:
                xbar = (x - xl) / (xh - xl)
            elif x == xl:
                xbar = 0.0
            elif x > xl:
                xbar = np.inf
            else:
                xbar = -np.inf
            if xbar <= alpha[m]:
                newv[c, i] = table_velocity(tab_h, vel[c, i], gaps[c, i], pgap[c, i])
            else:
                newv[c, i] = table_velocity(tab_l, vel[c, i], gaps[c, i], pgap[c, i])
    for c in range(N_CHANNELS):
        st = apply_velocities(pos[c], vel[c], pgap[c], gaps[c], newv[c], ring)
        if st != OK:
            return st
    return OK


@njit(cache=True)
def fuzzy_run(pos, vel, pgap, tab_l, tab_h, alpha, sched, ring, t0, t1,
              rec_pos, rec_vel, record, count_cell, crossings, strict, excursions):
    """Advance steps ``t0 .. t1-1`` in place.

    Returns ``(status, step, ops)`` where ``ops`` counts rule evaluations and
    ``step`` is the failing step (or ``t1``).
    """
    n = pos.shape[1]
    gaps = np.empty_like(pos)
    newv = np.empty_like(pos)
    halts = np.empty(sched.shape[0], dtype=np.int64)
    prev = np.empty_like(pos)
    ops = 0
    for t in range(t0, t1):
        nh = active_halts(sched, t, halts)
        if count_cell >= 0:
            prev[:, :] = pos
        st = fuzzy_step(pos, vel, pgap, tab_l, tab_h, alpha, halts, nh, ring, gaps, newv, strict, excursions)
        if st != OK:
            return st, t, ops
        ops += N_CHANNELS * n
        if count_cell >= 0:
            for c in range(N_CHANNELS):
                crossings[c] += count_crossings(prev[c], pos[c], count_cell)
        if record:
            rec_pos[t + 1] = pos
            rec_vel[t + 1] = vel
    return OK, t1, ops


@njit(cache=True)
def nasch_step(pos, vel, pgap, xi, v_max, p, halts, nh, ring, gaps, newv):
    n = pos.shape[0]
    fill_gaps(pos, halts, nh, ring, gaps)
    for i in range(n):
        v = vel[i] + 1
        if gaps[i] < v:
            v = gaps[i]
        if v_max < v:
            v = v_max
        if xi[i] < p and v > 0:
            v -= 1
        newv[i] = v
    return apply_velocities(pos, vel, pgap, gaps, newv, ring)


@njit(cache=True)
def nasch_run(pos, vel, pgap, xi, v_max, p, sched, ring, t0, t1,
              rec_pos, rec_vel, record, count_cell, crossings):
    """Advance steps ``t0 .. t1-1``; ``xi[t - t0]`` holds that step's draws."""
    n = pos.shape[0]
    gaps = np.empty_like(pos)
    newv = np.empty_like(pos)
    halts = np.empty(sched.shape[0], dtype=np.int64)
    old = np.empty(n, dtype=np.int64)
    ops = 0
    for t in range(t0, t1):
        nh = active_halts(sched, t, halts)
        old[:] = pos
        st = nasch_step(pos, vel, pgap, xi[t - t0], v_max, p, halts, nh, ring, gaps, newv)
        if st != OK:
            return st, t, ops
        ops += n
        if count_cell >= 0:
            crossings[0] += count_crossings(old, pos, count_cell)
        if record:
            rec_pos[t + 1, 0] = pos
            rec_vel[t + 1, 0] = vel
    return OK, t1, ops
