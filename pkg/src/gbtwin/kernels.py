"""Kernel functions and Gram matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .numerics import as_matrix

LINEAR = "linear"
GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class KernelSpec:
    """``kind`` is "linear" or "gaussian"; ``p`` is the Gaussian width.

    The Gaussian kernel is k(x, y) = exp(-||x - y||^2 / p^2).
    """

    kind: str = LINEAR
    p: float = 1.0

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in (LINEAR, GAUSSIAN):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == GAUSSIAN and not self.p > 0:
            raise ValueError("Gaussian kernel width p must be positive")

    def to_dict(self):
        return {"kind": self.kind, "p": self.p}

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], p=float(d.get("p", 1.0)))


def gram(X, Y, spec: KernelSpec) -> np.ndarray:
    """Matrix of k(x_i, y_j) over rows of X and Y."""
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch(
            f"X has {X.shape[1]} columns but Y has {Y.shape[1]}"
        )
    if spec.kind == LINEAR:
        return X @ Y.T
    # ||x||^2 + ||y||^2 - 2 x.y, clipped since cancellation can go slightly negative
    sq = (
        np.sum(X * X, axis=1)[:, None]
        + np.sum(Y * Y, axis=1)[None, :]
        - 2.0 * (X @ Y.T)
    )
    np.maximum(sq, 0.0, out=sq)
    K = np.exp(-sq / (spec.p * spec.p))
    if X is Y or (X.shape == Y.shape and np.array_equal(X, Y)):
        np.fill_diagonal(K, 1.0)
        K = 0.5 * (K + K.T)
    return K
