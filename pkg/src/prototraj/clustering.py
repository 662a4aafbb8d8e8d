"""Alternating (Voronoi) k-medoids over sentence embeddings.

Used to initialize prototypes at actual sentence embeddings. The main loop
alternates nearest-medoid assignment with an exact per-cluster medoid
update, an O(M*K)-per-iteration local search that scales to corpus-sized
point sets. On small inputs a PAM-style swap descent then polishes the
solution, which Voronoi alternation alone can leave in a poor local
optimum. All tie-breaks go to the lowest index so runs are
seed-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .metrics import pairwise_distances

# Above this many points the per-cluster update computes distances on the
# fly instead of holding a full M x M matrix.
_FULL_MATRIX_LIMIT = 2048

# Swap descent evaluates every (medoid, candidate) exchange at k * m^2 work
# per sweep; skip it when that exceeds this budget.
_SWAP_WORK_LIMIT = 1 << 25


@dataclass
class MedoidResult:
    medoid_indices: list[int]
    assignments: np.ndarray
    total_cost: float


def total_cost(points: np.ndarray, medoid_indices, metric: str = "euclidean") -> float:
    """Sum over points of the distance to the nearest medoid."""
    points = np.asarray(points, dtype=np.float64)
    dists = pairwise_distances(points, points[list(medoid_indices)], metric)
    return float(dists.min(axis=1).sum())


def _farthest_point_init(points, k, metric, rng) -> list[int]:
    """Greedy farthest-point seeding from a random start.

    If every remaining point coincides with a chosen medoid (duplicate
    vectors), falls back to the lowest unused index so indices stay
    distinct.
    """
    m = points.shape[0]
    medoids = [int(rng.integers(m))]
    nearest = pairwise_distances(points, points[medoids[-1]][None, :], metric)[:, 0]
    taken = set(medoids)
    while len(medoids) < k:
        candidate = int(np.argmax(nearest))
        if nearest[candidate] == 0.0 or candidate in taken:
            candidate = next(i for i in range(m) if i not in taken)
        medoids.append(candidate)
        taken.add(candidate)
        dist_new = pairwise_distances(points, points[candidate][None, :], metric)[:, 0]
        np.minimum(nearest, dist_new, out=nearest)
    return medoids


def _swap_refine(full: np.ndarray, medoids: list[int]) -> list[int]:
    """PAM swap descent: apply the best strictly improving exchange until none.

    ``full`` is the complete distance matrix. For every medoid slot the cost
    of each point after removing that medoid is the row minimum over the
    other medoid columns; broadcasting against the candidate columns then
    prices all m exchanges of the slot at once. Each slot's cheapest
    exchange is re-priced with the same reduction used for the incumbent
    cost, because the broadcast sum can disagree with it by an ulp and a
    phantom improvement would cycle. Points already serving as medoids are
    excluded as candidates; swapping one in duplicates a column and can
    never strictly improve. Strict improvement, lowest-(slot, candidate)
    tie-breaks, and a sweep cap keep the descent deterministic and finite.
    """
    medoids = list(medoids)
    k = len(medoids)
    for _ in range(16 + 4 * k):
        base = full[:, medoids]
        current = float(base.min(axis=1).sum())
        if k == 1:
            others = np.full(full.shape[0], np.inf)
            slots = [(0, others)]
        else:
            part = np.partition(base, 1, axis=1)
            nearest_slot = np.argmin(base, axis=1)
            slots = [
                (i, np.where(nearest_slot == i, part[:, 1], part[:, 0])) for i in range(k)
            ]
        best_cost, best_slot, best_candidate = current, -1, -1
        for i, others in slots:
            costs = np.minimum(others[:, None], full).sum(axis=0)
            costs[medoids] = np.inf
            candidate = int(np.argmin(costs))
            trial = list(medoids)
            trial[i] = candidate
            trial_cost = float(full[:, trial].min(axis=1).sum())
            if trial_cost < best_cost:
                best_cost, best_slot, best_candidate = trial_cost, i, candidate
        if best_slot < 0:
            break
        medoids[best_slot] = best_candidate
    return medoids


def kmedoids(
    points: np.ndarray,
    k: int,
    metric: str = "euclidean",
    seed: int = 0,
    max_iter: int = 50,
) -> MedoidResult:
    """Cluster points around k medoids drawn from the point set.

    Alternates until assignments are stable or ``max_iter`` is reached:
    assign each point to its nearest medoid (ties toward the lowest medoid
    position), then set each cluster's medoid to the member minimizing the
    intra-cluster distance sum (ties toward the lowest point index).
    """
    points = np.asarray(points, dtype=np.float64)
    m = points.shape[0]
    if k == 0:
        raise NumericError("k must be positive")
    if k > m:
        raise NumericError(f"k={k} exceeds number of points {m}")
    if max_iter < 1:
        raise NumericError("max_iter must be >= 1")

    rng = np.random.default_rng(seed)
    medoids = _farthest_point_init(points, k, metric, rng)

    full = pairwise_distances(points, points, metric) if m <= _FULL_MATRIX_LIMIT else None

    for _ in range(max_iter):
        if full is not None:
            dists = full[:, medoids]
        else:
            dists = pairwise_distances(points, points[medoids], metric)
        assignments = np.argmin(dists, axis=1)
        # Pin each medoid point to its own cluster. Only exact distance ties
        # (duplicate vectors) are affected, where argmin would otherwise dump
        # everything into the lowest slot, empty the others, and let two
        # slots collide on one index.
        assignments[medoids] = np.arange(k)

        new_medoids = list(medoids)
        for cluster in range(k):
            members = np.flatnonzero(assignments == cluster)
            if members.size == 0:
                continue
            if full is not None:
                intra = full[np.ix_(members, members)]
            else:
                intra = pairwise_distances(points[members], points[members], metric)
            best = int(np.argmin(intra.sum(axis=1)))
            new_medoids[cluster] = int(members[best])

        if new_medoids == medoids:
            break
        medoids = new_medoids

    if full is not None and k * m * m <= _SWAP_WORK_LIMIT:
        medoids = _swap_refine(full, medoids)

    # Recompute against the final medoids so the returned assignments are
    # nearest-medoid consistent even on a max_iter exit, and the cost equals
    # total_cost() bit for bit.
    dists = pairwise_distances(points, points[medoids], metric)
    assignments = np.argmin(dists, axis=1)
    return MedoidResult(
        medoid_indices=medoids,
        assignments=assignments,
        total_cost=float(dists.min(axis=1).sum()),
    )


def subsample_indices(n: int, cap: int, seed: int) -> np.ndarray:
    """Seeded uniform subsample (without replacement) of range(n), sorted."""
    if n <= cap:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=cap, replace=False))
