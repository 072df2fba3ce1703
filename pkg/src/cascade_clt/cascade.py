"""Threshold diffusion on a multigraph: round-based and continuous-time engines.

Both engines count neighbours with multiplicity; a self-loop on an inactive
node never contributes, since the node's own half-edges are not active.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .cgm import Multigraph
from .io import atomic_open, fmt, parse_float
from .rng import as_generator
from .rules import DEFAULT_RULE, check_rule, cutoff_array, need

EVENT_KINDS = ("death", "recolor")
DEFAULT_SNAPSHOTS = 64


@dataclass(frozen=True)
class CascadeResult:
    final_active: np.ndarray
    rounds: tuple[int, ...] | None = None

    @property
    def final_size(self) -> int:
        return int(self.final_active.sum())


class State(NamedTuple):
    H_A: int
    H_B: int
    A_n: int
    B_n: int


@dataclass(frozen=True)
class Trajectory:
    """Record of one exploration run.

    ``times``/``H_A``/``H_B``/``A_n`` are step functions: row 0 is the state
    before the initial removal, then one row per event, then a terminal row
    at ``tau`` whose H_A is the -1 sentinel. Event rows at equal times are
    applied in order, so evaluation is right-continuous.
    """

    n: int
    tau: float
    event_time: np.ndarray
    event_kind: np.ndarray
    event_ball: np.ndarray
    event_bin: np.ndarray
    times: np.ndarray
    H_A: np.ndarray
    H_B: np.ndarray
    A_n: np.ndarray
    snapshot_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    occupancy: dict = field(default_factory=dict)

    @property
    def B_n(self) -> np.ndarray:
        return self.n - self.A_n

    @property
    def final_size(self) -> int:
        return int(self.A_n[-1])

    @property
    def n_events(self) -> int:
        return len(self.event_time)


def _as_thresholds(mg: Multigraph, thresholds) -> np.ndarray:
    thr = np.asarray(thresholds, dtype=np.int64)
    if thr.shape != (mg.n,):
        raise ValueError(f"expected {mg.n} thresholds, got shape {thr.shape}")
    if (thr < 0).any():
        raise ValueError("thresholds must be nonnegative")
    return thr


def run_discrete(mg: Multigraph, thresholds, rule: str = DEFAULT_RULE) -> CascadeResult:
    """Synchronous rounds from the seed set to the fixed point.

    ``rounds[t]`` is the number of active nodes after round t; the list ends
    with a repeated entry, the round that changed nothing.
    """
    check_rule(rule)
    thr = _as_thresholds(mg, thresholds)
    required = np.where(thr == 0, 0, need(thr, rule))
    active = thr == 0
    hits = np.zeros(mg.n, dtype=np.int64)
    rounds = [int(active.sum())]
    frontier = np.flatnonzero(active)
    deg, offsets, owner, mate = mg.degrees, mg.offsets, mg.half_edge_owner, mg.mate
    while True:
        lens = deg[frontier]
        total = int(lens.sum())
        if total:
            starts = np.repeat(offsets[frontier] - np.cumsum(lens) + lens, lens)
            hs = starts + np.arange(total)
            np.add.at(hits, owner[mate[hs]], 1)
        new = ~active & (hits >= required)
        if not new.any():
            rounds.append(rounds[-1])
            break
        active |= new
        frontier = np.flatnonzero(new)
        rounds.append(int(active.sum()))
    return CascadeResult(active, tuple(rounds))


def _node_classes(degrees, thresholds):
    keys = np.stack([degrees, thresholds], axis=1)
    classes, inverse = np.unique(keys, axis=0, return_inverse=True)
    return [tuple(map(int, c)) for c in classes], inverse.reshape(-1).astype(np.int64)


def _occupancy(mg, thr, seed_mask, cut, event_time, event_kind, event_bin, grid):
    classes, node_class = _node_classes(mg.degrees, thr)
    deaths = event_kind == _kernels.DEATH
    hist = _kernels.replay_occupancy(
        mg.degrees, seed_mask, cut, node_class, len(classes),
        event_time[deaths], event_bin[deaths], grid,
    )
    occ = {}
    for c, (d, theta) in enumerate(classes):
        if theta == 0:
            continue
        for ell in range(min(d, hist.shape[2] - 1) + 1):
            col = hist[:, c, ell]
            if col.any():
                occ[(d, theta, ell)] = col.copy()
    return occ


def run_continuous(
    mg: Multigraph,
    thresholds,
    seed=None,
    snapshot_grid=DEFAULT_SNAPSHOTS,
    rule: str = DEFAULT_RULE,
) -> tuple[Trajectory, CascadeResult]:
    """Continuous-time white/red ball exploration on ``mg``.

    Every white ball dies at rate 1; each death forces a uniformly chosen
    white A-ball to turn red, and the run stops at the first death for which
    no white A-ball is left. A bin of threshold theta >= 1 turns type A as
    soon as its live-ball count drops below ``rules.cutoff(d, theta, rule)``.

    ``snapshot_grid`` is either a point count (uniform on [0, tau]), an
    explicit array of times, or 0/None to skip occupancy snapshots.
    """
    check_rule(rule)
    thr = _as_thresholds(mg, thresholds)
    rng = as_generator(seed)
    n_draws = mg.m + 2
    gaps = rng.standard_exponential(n_draws)
    picks = rng.random(n_draws)
    seed_mask = thr == 0
    cut = cutoff_array(mg.degrees, thr, rule)
    (k, tau, final_a, ev_t, ev_kind, ev_ball, ev_bin,
     s_ha, s_hb, s_an, ha0, hb0, an0) = _kernels.explore(
        mg.offsets, mg.half_edge_owner, mg.mate, seed_mask, cut, gaps, picks
    )
    ev_t, ev_kind, ev_ball, ev_bin = ev_t[:k], ev_kind[:k], ev_ball[:k], ev_bin[:k]
    hb_end = int(s_hb[k - 1]) if k else hb0
    an_end = int(s_an[k - 1]) if k else an0
    times = np.concatenate([[0.0], ev_t, [tau]])
    H_A = np.concatenate([[ha0], s_ha[:k], [-1]]).astype(np.int64)
    H_B = np.concatenate([[hb0], s_hb[:k], [hb_end]]).astype(np.int64)
    A_n = np.concatenate([[an0], s_an[:k], [an_end]]).astype(np.int64)

    if snapshot_grid is None or (np.ndim(snapshot_grid) == 0 and int(snapshot_grid) == 0):
        grid = np.empty(0)
    elif np.ndim(snapshot_grid) == 0:
        grid = np.linspace(0.0, tau, int(snapshot_grid))
    else:
        grid = np.sort(np.asarray(snapshot_grid, dtype=np.float64))
    occupancy = _occupancy(mg, thr, seed_mask, cut, ev_t, ev_kind, ev_bin, grid) if len(grid) else {}

    for arr in (ev_t, ev_kind, ev_ball, ev_bin, times, H_A, H_B, A_n, grid):
        arr.flags.writeable = False
    traj = Trajectory(
        n=mg.n, tau=float(tau),
        event_time=ev_t, event_kind=ev_kind, event_ball=ev_ball, event_bin=ev_bin,
        times=times, H_A=H_A, H_B=H_B, A_n=A_n,
        snapshot_times=grid, occupancy=occupancy,
    )
    return traj, CascadeResult(final_a)


def evaluate_at(traj: Trajectory, t: float) -> State:
    """Right-continuous value of (H_A, H_B, A_n, B_n); frozen at the terminal state for t >= tau."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    i = len(traj.times) - 1 if t >= traj.tau else int(np.searchsorted(traj.times, t, side="right")) - 1
    a = int(traj.A_n[i])
    return State(int(traj.H_A[i]), int(traj.H_B[i]), a, traj.n - a)


def evaluate_many(traj: Trajectory, ts) -> np.ndarray:
    """Vectorised :func:`evaluate_at`; returns an (len(ts), 4) integer array."""
    ts = np.asarray(ts, dtype=np.float64)
    idx = np.searchsorted(traj.times, ts, side="right") - 1
    idx = np.where(ts >= traj.tau, len(traj.times) - 1, idx)
    a = traj.A_n[idx]
    return np.column_stack([traj.H_A[idx], traj.H_B[idx], a, traj.n - a])


def tail_occupancy(traj: Trajectory, d: int, theta: int, ell: int) -> np.ndarray:
    """Inactive (d, theta) bins holding at least ``ell`` live balls, on the snapshot grid."""
    out = np.zeros(len(traj.snapshot_times), dtype=np.int64)
    for r in range(max(ell, 0), d + 1):
        col = traj.occupancy.get((d, theta, r))
        if col is not None:
            out += col
    return out


def death_process_reference(n_balls: int, seed=None) -> float:
    """sup_t |N(t)/n - exp(-t)| for a pure death process of ``n_balls`` unit-rate lifetimes."""
    if n_balls < 1:
        raise ValueError("n_balls must be >= 1")
    rng = as_generator(seed)
    life = np.sort(rng.standard_exponential(n_balls))
    k = np.arange(1, n_balls + 1)
    e = np.exp(-life)
    before = (n_balls - k + 1) / n_balls
    after = (n_balls - k) / n_balls
    return float(max(np.abs(before - e).max(), np.abs(after - e).max()))


TRAJECTORY_COLUMNS = ("time", "event_kind", "H_A", "H_B", "A_n", "B_n")


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """One row per ball event, then a ``stop`` row carrying tau and the final size (as A_n)."""
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for i in range(traj.n_events):
            row = i + 1
            a = int(traj.A_n[row])
            w.writerow([fmt(float(traj.times[row])), EVENT_KINDS[traj.event_kind[i]],
                        int(traj.H_A[row]), int(traj.H_B[row]), a, traj.n - a])
        a = traj.final_size
        w.writerow([fmt(traj.tau), "stop", int(traj.H_A[-1]), int(traj.H_B[-1]), a, traj.n - a])


def read_trajectory_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [
        {
            "time": parse_float(r["time"]),
            "event_kind": r["event_kind"],
            "H_A": int(r["H_A"]),
            "H_B": int(r["H_B"]),
            "A_n": int(r["A_n"]),
            "B_n": int(r["B_n"]),
        }
        for r in rows
    ]
