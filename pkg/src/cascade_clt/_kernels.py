"""Compiled inner loops. All randomness is drawn by the caller and passed in."""

from __future__ import annotations

import numpy as np
from numba import njit

DEATH = 0
RECOLOR = 1


@njit(cache=True)
def explore(offsets, owner, mate, seed_mask, cutoff, gaps, picks):
    """White/red ball exploration on a fixed pairing.

    The pending red ball's mate is the next white ball to die: over a uniform
    pairing it is uniform among white balls, and the gap before its death is
    Exp(current white count) (``gaps`` holds standard exponentials).
    ``picks`` are U[0,1) draws that select which white A-ball turns red.

    Returns (n_events, tau, final_is_a, ev_time, ev_kind, ev_ball, ev_bin,
    s_ha, s_hb, s_an, ha0, hb0, an0); ha0/hb0/an0 describe the state before
    the initial removal.
    """
    n = offsets.shape[0] - 1
    n_half = owner.shape[0]
    is_a = seed_mask.copy()
    white = np.empty(n, np.int64)
    for i in range(n):
        white[i] = offsets[i + 1] - offsets[i]
    status = np.zeros(n_half, np.int8)  # 0 white, 1 dead, 2 red
    pool = np.empty(n_half, np.int64)
    pos = np.full(n_half, -1, np.int64)
    size = 0
    a_n = 0
    for i in range(n):
        if is_a[i]:
            a_n += 1
            for h in range(offsets[i], offsets[i + 1]):
                pool[size] = h
                pos[h] = size
                size += 1
    h_a = size
    h_b = n_half - size
    ha0, hb0, an0 = h_a, h_b, a_n

    cap = n_half + 1
    ev_time = np.empty(cap, np.float64)
    ev_kind = np.empty(cap, np.int8)
    ev_ball = np.empty(cap, np.int64)
    ev_bin = np.empty(cap, np.int64)
    s_ha = np.empty(cap, np.int64)
    s_hb = np.empty(cap, np.int64)
    s_an = np.empty(cap, np.int64)
    if size == 0:
        return 0, 0.0, is_a, ev_time, ev_kind, ev_ball, ev_bin, s_ha, s_hb, s_an, ha0, hb0, an0

    t = 0.0
    k = 0
    # initial removal of one A-ball at time 0
    j = int(picks[0] * size)
    if j >= size:
        j = size - 1
    red = pool[j]
    last = pool[size - 1]
    pool[j] = last
    pos[last] = j
    pos[red] = -1
    size -= 1
    status[red] = 2
    h_a -= 1
    ev_time[k] = t
    ev_kind[k] = RECOLOR
    ev_ball[k] = red
    ev_bin[k] = owner[red]
    s_ha[k] = h_a
    s_hb[k] = h_b
    s_an[k] = a_n
    k += 1
    n_pick = 1
    n_gap = 0
    while True:
        w = h_a + h_b
        t += gaps[n_gap] / w
        n_gap += 1
        v = mate[red]
        if status[v] != 0:
            raise RuntimeError("pairing invariant broken: mate of red ball is not white")
        b = owner[v]
        status[v] = 1
        if is_a[b]:
            j = pos[v]
            last = pool[size - 1]
            pool[j] = last
            pos[last] = j
            pos[v] = -1
            size -= 1
            h_a -= 1
        else:
            h_b -= 1
            white[b] -= 1
            if white[b] < cutoff[b]:
                is_a[b] = True
                a_n += 1
                for h in range(offsets[b], offsets[b + 1]):
                    if status[h] == 0:
                        pool[size] = h
                        pos[h] = size
                        size += 1
                h_a += white[b]
                h_b -= white[b]
        ev_time[k] = t
        ev_kind[k] = DEATH
        ev_ball[k] = v
        ev_bin[k] = b
        s_ha[k] = h_a
        s_hb[k] = h_b
        s_an[k] = a_n
        k += 1
        if size == 0:
            break
        j = int(picks[n_pick] * size)
        n_pick += 1
        if j >= size:
            j = size - 1
        red = pool[j]
        last = pool[size - 1]
        pool[j] = last
        pos[last] = j
        pos[red] = -1
        size -= 1
        status[red] = 2
        h_a -= 1
        ev_time[k] = t
        ev_kind[k] = RECOLOR
        ev_ball[k] = red
        ev_bin[k] = owner[red]
        s_ha[k] = h_a
        s_hb[k] = h_b
        s_an[k] = a_n
        k += 1
    return k, t, is_a, ev_time, ev_kind, ev_ball, ev_bin, s_ha, s_hb, s_an, ha0, hb0, an0


@njit(cache=True)
def replay_occupancy(degrees, seed_mask, cutoff, node_class, n_class, death_time, death_bin, grid):
    """Histogram of live-ball counts over inactive bins, per (class, count), at each grid time.

    ``node_class`` maps each node to its (d, theta) class index. Seeds and
    bins that have turned active are not counted.
    """
    n = degrees.shape[0]
    max_d = 0
    for i in range(n):
        if degrees[i] > max_d:
            max_d = degrees[i]
    white = degrees.copy()
    active = seed_mask.copy()
    hist = np.zeros((n_class, max_d + 1), np.int64)
    for i in range(n):
        if not active[i]:
            hist[node_class[i], white[i]] += 1
    out = np.empty((grid.shape[0], n_class, max_d + 1), np.int64)
    j = 0
    m = death_time.shape[0]
    for g in range(grid.shape[0]):
        while j < m and death_time[j] <= grid[g]:
            b = death_bin[j]
            if not active[b]:
                hist[node_class[b], white[b]] -= 1
                white[b] -= 1
                if white[b] < cutoff[b]:
                    active[b] = True
                else:
                    hist[node_class[b], white[b]] += 1
            j += 1
        out[g] = hist
    return out
