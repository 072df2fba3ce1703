"""Joint degree/threshold laws and their finite realizations."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .rng import as_generator

MASS_TOL = 1e-12


class InvalidDistribution(ValueError):
    """Raised when an operation needs a valid distribution and gets an invalid one."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class DegenerateDistribution(ValueError):
    pass


class Atom(NamedTuple):
    d: int
    theta: int
    p: float


@dataclass(frozen=True)
class Violation:
    message: str
    atoms: tuple = ()

    def __str__(self) -> str:
        if not self.atoms:
            return self.message
        listed = ", ".join(f"(d={a.d}, theta={a.theta}, p={a.p:g})" for a in self.atoms)
        return f"{self.message}: {listed}"


@dataclass(frozen=True)
class DegreeThresholdDistribution:
    """Finite-support law p(d, theta).

    Construction never fails on semantic grounds; call :func:`validate` to
    get the list of violated invariants.
    """

    atoms: tuple[Atom, ...]

    def __init__(self, atoms: Iterable):
        converted = []
        for a in atoms:
            if isinstance(a, Mapping):
                a = (a["d"], a["theta"], a["p"])
            d, theta, p = a
            converted.append(Atom(int(d), int(theta), float(p)))
        object.__setattr__(self, "atoms", tuple(converted))

    def __iter__(self):
        return iter(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def mass(self, d: int, theta: int) -> float:
        return sum(a.p for a in self.atoms if a.d == d and a.theta == theta)

    @property
    def max_degree(self) -> int:
        return max(a.d for a in self.atoms)

    @property
    def seed_fraction(self) -> float:
        return sum(a.p for a in self.atoms if a.theta == 0)

    def degree_marginal(self) -> dict[int, float]:
        q: dict[int, float] = {}
        for a in self.atoms:
            q[a.d] = q.get(a.d, 0.0) + a.p
        return dict(sorted(q.items()))

    def to_json(self) -> list[dict]:
        return [{"d": a.d, "theta": a.theta, "p": a.p} for a in self.atoms]


@dataclass(frozen=True)
class NodeSequence:
    degrees: np.ndarray
    thresholds: np.ndarray
    parity_fixed_node: int | None = None

    def __post_init__(self):
        deg = np.array(self.degrees, dtype=np.int64)
        thr = np.array(self.thresholds, dtype=np.int64)
        if deg.shape != thr.shape or deg.ndim != 1:
            raise ValueError("degrees and thresholds must be 1-d and of equal length")
        if (deg < 0).any() or (thr < 0).any():
            raise ValueError("degrees and thresholds must be nonnegative")
        deg.flags.writeable = False
        thr.flags.writeable = False
        object.__setattr__(self, "degrees", deg)
        object.__setattr__(self, "thresholds", thr)

    @property
    def n(self) -> int:
        return len(self.degrees)

    @property
    def degree_sum(self) -> int:
        return int(self.degrees.sum())


@dataclass(frozen=True)
class EmpiricalCounts:
    """u_n(d, theta): number of nodes with each (degree, threshold) pair."""

    table: Mapping[tuple[int, int], int]
    n: int

    def fractions(self) -> list[Atom]:
        return [Atom(d, th, c / self.n) for (d, th), c in sorted(self.table.items())]


def validate(dist: DegreeThresholdDistribution) -> list[Violation]:
    """Return every violated invariant; an empty list means the law is valid."""
    out: list[Violation] = []
    atoms = dist.atoms
    if not atoms:
        return [Violation("empty distribution")]
    neg = tuple(a for a in atoms if a.d < 0 or a.theta < 0)
    if neg:
        out.append(Violation("negative degree or threshold", neg))
    bad_mass = tuple(a for a in atoms if not (0.0 < a.p <= 1.0) or not np.isfinite(a.p))
    if bad_mass:
        out.append(Violation("mass outside (0, 1]", bad_mass))
    total = sum(a.p for a in atoms)
    if abs(total - 1.0) > MASS_TOL:
        out.append(Violation(f"masses sum to {total!r}, not 1"))
    seen = Counter((a.d, a.theta) for a in atoms)
    dup = tuple(a for a in atoms if seen[(a.d, a.theta)] > 1)
    if dup:
        out.append(Violation("duplicate atom", dup))
    isolated = tuple(a for a in atoms if a.d == 0)
    if sum(a.p for a in isolated) >= 1.0 - MASS_TOL:
        out.append(Violation("sum over theta of p(0, theta) >= 1", isolated))
    return out


def require_valid(dist: DegreeThresholdDistribution) -> None:
    problems = validate(dist)
    if problems:
        raise InvalidDistribution(problems)


def mean_degree(dist) -> float:
    """lambda = sum of d * p(d, theta); accepts a law or empirical counts."""
    atoms = dist.fractions() if isinstance(dist, EmpiricalCounts) else dist.atoms
    lam = float(sum(a.d * a.p for a in atoms))
    if lam <= 0.0:
        raise DegenerateDistribution("degenerate degree law: mean degree is 0")
    return lam


def empirical_counts(seq: NodeSequence) -> EmpiricalCounts:
    pairs = Counter(zip(seq.degrees.tolist(), seq.thresholds.tolist()))
    return EmpiricalCounts(dict(sorted(pairs.items())), seq.n)


def _fix_parity(degrees: np.ndarray) -> int | None:
    if int(degrees.sum()) % 2 == 0:
        return None
    top = np.flatnonzero(degrees == degrees.max())[-1]
    degrees[top] += 1
    return int(top)


def apportion(dist: DegreeThresholdDistribution, n: int) -> list[int]:
    """Largest-remainder counts for ``n * p``; ties go to the lexicographically smaller atom."""
    quotas = [n * a.p for a in dist.atoms]
    counts = [int(np.floor(q)) for q in quotas]
    left = n - sum(counts)
    order = sorted(
        range(len(quotas)),
        key=lambda i: (-(quotas[i] - counts[i]), dist.atoms[i].d, dist.atoms[i].theta),
    )
    for i in order[:left]:
        counts[i] += 1
    return counts


def realize_rounded(dist: DegreeThresholdDistribution, n: int) -> NodeSequence:
    """Deterministic realization grouped by (d, theta) in lexicographic order.

    If the degree sum is odd, the last node of maximal degree gets one extra
    half-edge; its index is kept in ``parity_fixed_node``.
    """
    require_valid(dist)
    if n < 1:
        raise ValueError("n must be >= 1")
    counts = apportion(dist, n)
    ordered = sorted(zip(dist.atoms, counts), key=lambda ac: (ac[0].d, ac[0].theta))
    degrees = np.concatenate([np.full(c, a.d, dtype=np.int64) for a, c in ordered])
    thresholds = np.concatenate([np.full(c, a.theta, dtype=np.int64) for a, c in ordered])
    fixed = _fix_parity(degrees)
    return NodeSequence(degrees, thresholds, fixed)


def realize_sampled(dist: DegreeThresholdDistribution, n: int, seed) -> NodeSequence:
    """i.i.d. draws of (d, theta) from ``dist``; parity repaired as in :func:`realize_rounded`."""
    require_valid(dist)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(seed)
    p = np.array([a.p for a in dist.atoms])
    idx = rng.choice(len(p), size=n, p=p / p.sum())
    degrees = np.array([a.d for a in dist.atoms], dtype=np.int64)[idx]
    thresholds = np.array([a.theta for a in dist.atoms], dtype=np.int64)[idx]
    fixed = _fix_parity(degrees)
    return NodeSequence(degrees, thresholds, fixed)


def preset_bootstrap(
    degree_dist: Mapping[int, float], theta: int, alpha: float
) -> DegreeThresholdDistribution:
    """Seed each degree class with probability ``alpha``; everyone else gets threshold ``theta``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"seed fraction alpha must lie in (0, 1), got {alpha}")
    if theta < 1:
        raise ValueError("bootstrap threshold must be >= 1")
    atoms = []
    for d, q in sorted(degree_dist.items()):
        atoms.append((d, 0, alpha * q))
        atoms.append((d, theta, (1.0 - alpha) * q))
    return DegreeThresholdDistribution(atoms)


def preset_kcore(degree_dist: Mapping[int, float], k: int) -> DegreeThresholdDistribution:
    """Thresholds (d - k)_+, so the surviving inactive nodes form the k-core."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return DegreeThresholdDistribution(
        (d, max(d - k, 0), q) for d, q in sorted(degree_dist.items())
    )


_ATOM_KEYS = {"d", "theta", "p"}


def parse_atoms(payload) -> DegreeThresholdDistribution:
    """Build a law from the JSON form ``[{"d": .., "theta": .., "p": ..}, ...]``."""
    if not isinstance(payload, list):
        raise ValueError("distribution must be a JSON array of atoms")
    atoms = []
    for i, entry in enumerate(payload):
        if not isinstance(entry, dict):
            raise ValueError(f"atom {i}: expected an object")
        unknown = set(entry) - _ATOM_KEYS
        if unknown:
            raise ValueError(f"atom {i}: unknown keys {sorted(unknown)}")
        missing = _ATOM_KEYS - set(entry)
        if missing:
            raise ValueError(f"atom {i}: missing keys {sorted(missing)}")
        d, theta, p = entry["d"], entry["theta"], entry["p"]
        if isinstance(d, bool) or not isinstance(d, int):
            raise ValueError(f"atom {i}: d must be an integer")
        if isinstance(theta, bool) or not isinstance(theta, int):
            raise ValueError(f"atom {i}: theta must be an integer")
        if isinstance(p, bool) or not isinstance(p, (int, float)):
            raise ValueError(f"atom {i}: p must be a number")
        atoms.append((d, theta, p))
    return DegreeThresholdDistribution(atoms)


def load_distribution(path) -> DegreeThresholdDistribution:
    return parse_atoms(json.loads(Path(path).read_text(encoding="utf-8")))


EXAMPLE = DegreeThresholdDistribution([(3, 0, 0.1), (3, 2, 0.9)])
