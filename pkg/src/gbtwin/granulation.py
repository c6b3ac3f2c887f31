"""Granular-ball generation by recursive k-means splitting.

A node of the hierarchy is split with k-means (k = number of labels present
in the node) until its purity reaches the threshold.  Leaves that are pure
enough and hold at least ``min_points`` members become granular balls; all
other leaves are dropped.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGranulation, DimensionMismatch, EmptyInput
from .numerics import as_matrix

KMEANS_MAX_ITER = 100


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = as_matrix(self.features, "features")
        y = np.asarray(self.labels).ravel()
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(
                f"{X.shape[0]} feature rows but {y.shape[0]} labels"
            )
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def classes(self) -> list:
        return sorted(np.unique(self.labels).tolist())

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.features[idx], self.labels[idx])


@dataclass(frozen=True)
class GranularBall:
    centroid: np.ndarray
    radius: float
    label: object
    member_count: int
    # indices into the dataset the ball was built from; kept for auditing
    members: tuple = field(default=(), repr=False, compare=False)

    def __eq__(self, other):
        if not isinstance(other, GranularBall):
            return NotImplemented
        return (
            np.array_equal(self.centroid, other.centroid)
            and self.radius == other.radius
            and self.label == other.label
            and self.member_count == other.member_count
        )

    __hash__ = None


@dataclass(frozen=True)
class BallSet:
    balls: tuple
    theta: float
    min_points: int

    def __len__(self):
        return len(self.balls)

    @property
    def centroids(self) -> np.ndarray:
        return np.array([b.centroid for b in self.balls])

    @property
    def radii(self) -> np.ndarray:
        return np.array([b.radius for b in self.balls], dtype=np.float64)

    @property
    def labels(self) -> np.ndarray:
        return np.array([b.label for b in self.balls])

    def counts_by_label(self) -> dict:
        return dict(Counter(b.label for b in self.balls))

    def to_rows(self):
        """Rows of (label, radius, member_count, *centroid) for CSV export."""
        return [
            [b.label, b.radius, b.member_count, *b.centroid.tolist()]
            for b in self.balls
        ]


def purity(labels) -> float:
    return _modal(labels)[1]


def modal_label(labels):
    return _modal(labels)[0]


def _modal(labels):
    labels = list(np.asarray(labels).ravel().tolist())
    if not labels:
        raise EmptyInput("purity of an empty cluster is undefined")
    counts = Counter(labels)
    top = max(counts.values())
    # ties go to the smallest identifier
    label = min(lab for lab, c in counts.items() if c == top)
    return label, top / len(labels)


def _farthest_first(X, k, rng):
    n = X.shape[0]
    first = int(rng.integers(n))
    chosen = [first]
    dist = np.sum((X - X[first]) ** 2, axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(dist))
        if dist[nxt] == 0.0:
            break
        chosen.append(nxt)
        dist = np.minimum(dist, np.sum((X - X[nxt]) ** 2, axis=1))
    return X[chosen].copy()


def _sq_dists(X, centers):
    return (
        np.sum(X * X, axis=1)[:, None]
        + np.sum(centers * centers, axis=1)[None, :]
        - 2.0 * X @ centers.T
    )


def kmeans(points, k: int, seed: int = 0):
    """Lloyd's algorithm with farthest-first seeding.

    Returns ``(assignment, centroids)``.  Clusters that end up empty (possible
    only when the data has fewer than ``k`` distinct points) are dropped and
    the assignment is renumbered densely.
    """
    X = as_matrix(points, "points")
    n = X.shape[0]
    if n == 0:
        raise EmptyInput("kmeans needs at least one point")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centers = _farthest_first(X, k, rng)
    assign = None
    for _ in range(KMEANS_MAX_ITER):
        new_assign = np.argmin(_sq_dists(X, centers), axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        used = np.unique(assign)
        centers = np.array([X[assign == j].mean(axis=0) for j in used])
        assign = np.searchsorted(used, assign)
    # final assignment is nearest-centroid w.r.t. the returned centroids
    assign = np.argmin(_sq_dists(X, centers), axis=1)
    used = np.unique(assign)
    if used.size != centers.shape[0]:
        centers = centers[used]
        assign = np.searchsorted(used, assign)
    return assign, centers


def _make_ball(X, y, idx):
    pts = X[idx]
    centroid = pts.mean(axis=0)
    radius = float(np.sqrt(np.max(np.sum((pts - centroid) ** 2, axis=1))))
    label = modal_label(y[idx])
    return GranularBall(centroid, radius, label, len(idx), tuple(int(i) for i in idx))


def _split_leaves(X, y, theta, seed):
    """Iteratively expand the k-means hierarchy; returns leaf index arrays."""
    leaves = []
    stack = [np.arange(X.shape[0])]
    while stack:
        idx = stack.pop()
        labels = y[idx]
        if purity(labels) >= theta or idx.size == 1:
            leaves.append(idx)
            continue
        k = min(max(2, len(np.unique(labels))), idx.size)
        assign, _ = kmeans(X[idx], k, seed)
        if assign.max() == 0:
            # all points coincide: cannot split, keep as a leaf
            leaves.append(idx)
            continue
        for j in range(assign.max(), -1, -1):
            stack.append(idx[assign == j])
    return leaves


def generate_balls(
    data: LabeledDataset,
    theta: float,
    min_points: int,
    seed: int = 0,
    min_labels: int = 2,
) -> BallSet:
    """Build the ball set; raises DegenerateGranulation when the surviving
    balls cover fewer than ``min_labels`` distinct labels."""
    if not 0.5 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0.5, 1], got {theta}")
    if min_points < 1:
        raise ValueError("min_points must be at least 1")
    if data.n == 0:
        raise EmptyInput("cannot granulate an empty dataset")
    X, y = data.features, data.labels
    balls = []
    for idx in _split_leaves(X, y, theta, seed):
        if idx.size < min_points or purity(y[idx]) < theta:
            continue
        balls.append(_make_ball(X, y, idx))
    balls.sort(key=lambda b: (b.label, tuple(b.centroid.tolist())))
    labels = {b.label for b in balls}
    if len(labels) < min_labels:
        raise DegenerateGranulation(
            f"granulation (theta={theta}, min_points={min_points}) kept "
            f"{len(balls)} balls covering {len(labels)} label(s); "
            f"need at least {min_labels}"
        )
    return BallSet(tuple(balls), float(theta), int(min_points))
