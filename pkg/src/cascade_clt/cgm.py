"""Configuration-model multigraphs built by uniform half-edge pairing.

Half-edges are numbered so that node ``i`` owns the contiguous block
``offsets[i]:offsets[i + 1]``. Node ids are 0-based.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .io import atomic_open
from .rng import as_generator


class OddHalfEdgeCount(ValueError):
    pass


class SimpleGraphNotFound(RuntimeError):
    def __init__(self, attempts: int):
        self.attempts = attempts
        super().__init__(f"no simple graph after {attempts} pairing attempts")


@dataclass(frozen=True)
class Multigraph:
    degrees: np.ndarray
    offsets: np.ndarray
    half_edge_owner: np.ndarray
    mate: np.ndarray

    @property
    def n(self) -> int:
        return len(self.degrees)

    @property
    def m(self) -> int:
        return len(self.mate) // 2

    def half_edges(self, i: int) -> range:
        return range(int(self.offsets[i]), int(self.offsets[i + 1]))


def _freeze(*arrays):
    for a in arrays:
        a.flags.writeable = False


def _layout(degrees) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    degrees = np.array(degrees, dtype=np.int64)
    if degrees.ndim != 1 or (degrees < 0).any():
        raise ValueError("degrees must be a 1-d array of nonnegative integers")
    if int(degrees.sum()) % 2:
        raise OddHalfEdgeCount(f"odd half-edge count {int(degrees.sum())}")
    offsets = np.zeros(len(degrees) + 1, dtype=np.int64)
    np.cumsum(degrees, out=offsets[1:])
    owner = np.repeat(np.arange(len(degrees), dtype=np.int64), degrees)
    return degrees, offsets, owner


def _random_matching(n_half: int, rng: np.random.Generator) -> np.ndarray:
    # consecutive entries of a uniform permutation form a uniform perfect matching
    perm = rng.permutation(n_half)
    mate = np.empty(n_half, dtype=np.int64)
    mate[perm[0::2]] = perm[1::2]
    mate[perm[1::2]] = perm[0::2]
    return mate


def build_multigraph(seq, seed) -> Multigraph:
    """Pair half-edges uniformly at random.

    ``seq`` is a :class:`~cascade_clt.dist.NodeSequence` or a plain degree array.
    """
    degrees = getattr(seq, "degrees", seq)
    degrees, offsets, owner = _layout(degrees)
    mate = _random_matching(len(owner), as_generator(seed))
    _freeze(degrees, offsets, owner, mate)
    return Multigraph(degrees, offsets, owner, mate)


def from_edges(n: int, edges) -> Multigraph:
    """Multigraph with the given edge list (self-loops and repeats allowed)."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise ValueError("edge endpoint out of range")
    degrees = np.bincount(edges.ravel(), minlength=n).astype(np.int64)
    degrees, offsets, owner = _layout(degrees)
    cursor = offsets[:-1].copy()
    mate = np.empty(len(owner), dtype=np.int64)
    for u, v in edges.tolist():
        hu = cursor[u]
        cursor[u] += 1
        hv = cursor[v]
        cursor[v] += 1
        mate[hu] = hv
        mate[hv] = hu
    _freeze(degrees, offsets, owner, mate)
    return Multigraph(degrees, offsets, owner, mate)


def edges(mg: Multigraph) -> np.ndarray:
    """(m, 2) array of edges, each listed once as (owner[h], owner[mate[h]]) with h < mate[h]."""
    h = np.flatnonzero(np.arange(len(mg.mate)) < mg.mate)
    return np.column_stack([mg.half_edge_owner[h], mg.half_edge_owner[mg.mate[h]]])


def is_simple(mg: Multigraph) -> bool:
    e = edges(mg)
    if (e[:, 0] == e[:, 1]).any():
        return False
    key = np.sort(e, axis=1)
    return len(np.unique(key, axis=0)) == len(key)


def to_simple(mg: Multigraph, mode: str = "reject", max_retries: int = 1000, seed=None):
    """Return ``(simple_graph, attempts)``.

    ``reject`` re-pairs the same degree sequence until the result is simple,
    which is uniform over simple graphs with those degrees. ``erase`` drops
    self-loops and collapses parallel edges, so degrees can shrink.
    """
    if mode == "erase":
        e = edges(mg)
        e = e[e[:, 0] != e[:, 1]]
        e = np.unique(np.sort(e, axis=1), axis=0)
        return from_edges(mg.n, e), 1
    if mode != "reject":
        raise ValueError(f"unknown mode {mode!r}")
    if is_simple(mg):
        return mg, 1
    rng = as_generator(seed)
    attempts = 1
    while attempts < max_retries:
        attempts += 1
        candidate = build_multigraph(mg.degrees, rng)
        if is_simple(candidate):
            return candidate, attempts
    raise SimpleGraphNotFound(attempts)


def neighbors(mg: Multigraph, i: int) -> list[int]:
    """Owners of the mates of node i's half-edges, with multiplicity (a loop gives i twice)."""
    if not 0 <= i < mg.n:
        raise IndexError(f"node {i} out of range for n={mg.n}")
    hs = np.arange(mg.offsets[i], mg.offsets[i + 1])
    return sorted(mg.half_edge_owner[mg.mate[hs]].tolist())


def write_edge_list(mg: Multigraph, path) -> None:
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v"])
        w.writerows(edges(mg).tolist())


def read_edge_list(path, n: int | None = None) -> Multigraph:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    e = np.array([(int(r["u"]), int(r["v"])) for r in rows], dtype=np.int64).reshape(-1, 2)
    if n is None:
        n = int(e.max()) + 1 if e.size else 0
    return from_edges(n, e)


__all__ = [
    "Multigraph",
    "OddHalfEdgeCount",
    "SimpleGraphNotFound",
    "build_multigraph",
    "edges",
    "from_edges",
    "is_simple",
    "neighbors",
    "read_edge_list",
    "to_simple",
    "write_edge_list",
]
