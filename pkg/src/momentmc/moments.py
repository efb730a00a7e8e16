"""Running first and second moments of a sample chain.

The chain keeps componentwise mean and mean-of-squares of every point it
has kept so far, updated recursively so that after n points the stored
values equal the batch moments of the full history.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["MomentVector", "update_moments"]


@dataclass(frozen=True)
class MomentVector:
    """Componentwise running moments (mean, mean of squares) with sample count."""

    first: np.ndarray
    second: np.ndarray
    count: int = 0

    def __post_init__(self):
        first = np.asarray(self.first, dtype=float)
        second = np.asarray(self.second, dtype=float)
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "second", second)
        if first.shape != second.shape:
            raise ValueError("moment vectors must have matching shapes")
        if self.count < 0:
            raise ValueError("moment count must be nonnegative")
        if self.count == 0 and (np.any(first != 0.0) or np.any(second != 0.0)):
            raise ValueError("empty moment vector must be zero")

    @classmethod
    def empty(cls, dim: int) -> "MomentVector":
        return cls(np.zeros(dim), np.zeros(dim), 0)

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "MomentVector":
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        return cls(samples.mean(axis=0), (samples**2).mean(axis=0), samples.shape[0])

    @property
    def variance(self) -> np.ndarray:
        """Empirical variance ``second - first**2``, clipped at zero roundoff."""
        var = self.second - self.first**2
        return np.where(var < 0.0, 0.0, var)


def update_moments(x: np.ndarray, kappa: MomentVector) -> MomentVector:
    """Fold one more point into the running moments.

    Returns ``((x, x^2) + n*kappa) / (n + 1)`` with the count advanced, which
    keeps the stored values equal to the batch moments of all kept points.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("invalid parameter")
    n = kappa.count
    first = (x + n * kappa.first) / (n + 1)
    second = (x**2 + n * kappa.second) / (n + 1)
    return MomentVector(first, second, n + 1)
