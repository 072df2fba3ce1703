"""Activation conventions.

A node with threshold 0 is a seed under both rules. For theta >= 1:

``strict``
    the node activates once strictly more than theta of its neighbours are
    active. In the exploration this is the removal rule d_B < d - theta, and
    it is the convention every analytic formula in :mod:`cascade_clt.theory`
    is written for by default.
``inclusive``
    the node activates once at least theta neighbours are active.

In both cases an inactive bin with degree d keeps its type B while it still
holds at least ``cutoff(d, theta)`` live half-edges.
"""

from __future__ import annotations

import numpy as np

RULES = ("strict", "inclusive")
DEFAULT_RULE = "strict"


def check_rule(rule: str) -> str:
    if rule not in RULES:
        raise ValueError(f"unknown activation rule {rule!r}; expected one of {RULES}")
    return rule


def need(theta, rule: str = DEFAULT_RULE):
    """Active-neighbour count at which a non-seed activates."""
    check_rule(rule)
    return theta + 1 if rule == "strict" else theta


def cutoff(d, theta, rule: str = DEFAULT_RULE):
    """Smallest live-ball count that keeps a theta >= 1 bin inactive."""
    check_rule(rule)
    return d - theta + (0 if rule == "strict" else 1)


def cutoff_array(degrees: np.ndarray, thresholds: np.ndarray, rule: str) -> np.ndarray:
    c = cutoff(np.asarray(degrees, dtype=np.int64), np.asarray(thresholds, dtype=np.int64), rule)
    return np.where(np.asarray(thresholds) == 0, 0, c).astype(np.int64)
