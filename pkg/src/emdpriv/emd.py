"""Exact Earth Mover's distance between bags of vectors.

A bag is stored as an N x dim stack of rows, so every row carries mass 1/N
and the transport constraints make the flow matrix doubly stochastic after
scaling. By Birkhoff-von Neumann a doubly stochastic matrix is a convex
combination of permutation matrices, so for equal-size bags the optimum is
attained at a permutation: the problem reduces to minimum-cost assignment
on the pairwise distance matrix, which we solve exactly. Unequal sizes are
handled by replicating both bags up to lcm(|X|, |Y|) elements, which
rescales the constraint polytope without moving the optimum.

A factorial brute-force solver is kept as an independent oracle for tests;
it shares no code with the assignment path.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .vectors import MetricKind, pairwise_distances

DEFAULT_EXPANSION_CAP = 10_000

_ATOL = 1e-9


@dataclass(frozen=True, eq=False)
class VecBag:
    """Multiset of same-dimension vectors; multiplicity by row repetition."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"expected a nonempty N x dim array, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("bag vectors must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Flow matrix and objective value witnessing a transport optimum."""

    flows: np.ndarray
    cost: float

    def validate(self, distances: np.ndarray) -> None:
        """Check marginals and the cost identity against a distance matrix."""
        k, l = self.flows.shape
        if np.any(self.flows < -_ATOL):
            raise AssertionError("negative flow")
        if np.abs(self.flows.sum(axis=1) - 1.0 / k).max() > _ATOL:
            raise AssertionError("row sums do not match source masses")
        if np.abs(self.flows.sum(axis=0) - 1.0 / l).max() > _ATOL:
            raise AssertionError("column sums do not match target masses")
        if abs(float((self.flows * distances).sum()) - self.cost) > _ATOL:
            raise AssertionError("cost does not match flows")


def _check_pair(b1: VecBag, b2: VecBag) -> None:
    if b1.dim != b2.dim:
        raise ValueError(f"bag dimension mismatch: {b1.dim} vs {b2.dim}")


def emd_equal(
    b1: VecBag, b2: VecBag, metric: MetricKind = MetricKind.EUCLIDEAN
) -> tuple[float, TransportPlan]:
    """Exact distance between equal-size bags, with a permutation-form plan.

    Every flow in the returned plan is 0 or 1/N.
    """
    _check_pair(b1, b2)
    if b1.size != b2.size:
        raise ValueError(
            f"bag sizes differ ({b1.size} vs {b2.size}); use emd_general for unequal sizes"
        )
    n = b1.size
    dist = pairwise_distances(b1.vectors, b2.vectors, metric)
    rows, cols = linear_sum_assignment(dist)
    flows = np.zeros((n, n))
    flows[rows, cols] = 1.0 / n
    cost = float(dist[rows, cols].sum()) / n
    plan = TransportPlan(flows=flows, cost=cost)
    plan.validate(dist)
    return cost, plan


def emd_general(
    b1: VecBag,
    b2: VecBag,
    metric: MetricKind = MetricKind.EUCLIDEAN,
    expansion_cap: int = DEFAULT_EXPANSION_CAP,
) -> tuple[float, TransportPlan]:
    """Exact distance between bags of any sizes via lcm replication."""
    _check_pair(b1, b2)
    k, l = b1.size, b2.size
    expanded = math.lcm(k, l)
    if expanded > expansion_cap:
        raise ValueError(
            f"lcm expansion to {expanded} elements exceeds the cap of {expansion_cap}"
        )
    rep1, rep2 = expanded // k, expanded // l
    big1 = np.repeat(b1.vectors, rep1, axis=0)
    big2 = np.repeat(b2.vectors, rep2, axis=0)
    dist_big = pairwise_distances(big1, big2, metric)
    rows, cols = linear_sum_assignment(dist_big)
    cost = float(dist_big[rows, cols].sum()) / expanded
    # Aggregate the assignment back onto the original rows.
    flows = np.zeros((k, l))
    np.add.at(flows, (rows // rep1, cols // rep2), 1.0 / expanded)
    plan = TransportPlan(flows=flows, cost=cost)
    plan.validate(pairwise_distances(b1.vectors, b2.vectors, metric))
    return cost, plan


def emd_bruteforce(
    b1: VecBag, b2: VecBag, metric: MetricKind = MetricKind.EUCLIDEAN, max_size: int = 8
) -> float:
    """Minimum over all N! matchings; independent oracle, N <= max_size only."""
    _check_pair(b1, b2)
    if b1.size != b2.size:
        raise ValueError("brute-force oracle requires equal-size bags")
    n = b1.size
    if n > max_size:
        raise ValueError(f"bag size {n} exceeds the factorial oracle limit of {max_size}")
    dist = pairwise_distances(b1.vectors, b2.vectors, metric)
    best = math.inf
    for perm in itertools.permutations(range(n)):
        total = sum(dist[i, perm[i]] for i in range(n))
        if total < best:
            best = total
    return float(best) / n
