"""Per-dimension histograms of sample sets, with boundary clamping."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["HistogramSet", "empirical_density"]


@dataclass
class HistogramSet:
    edges: list[np.ndarray]    # bin edges per dimension
    counts: list[np.ndarray]   # integer counts per dimension
    clamped: int               # samples that fell outside the bin range

    @property
    def n_dims(self) -> int:
        return len(self.edges)


def empirical_density(samples: np.ndarray, bins: list[np.ndarray]) -> HistogramSet:
    """Histogram each dimension of a sample set onto the given bin edges.

    Samples outside the edge range are clamped into the boundary bin and
    counted, so every dimension's counts always total the sample count.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] < 1:
        raise ValueError("at least one sample required")
    if samples.shape[1] != len(bins):
        raise ValueError("bin spec must cover every dimension")
    edges_list, counts_list = [], []
    clamped = 0
    for d, edges in enumerate(bins):
        edges = np.asarray(edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        x = samples[:, d]
        idx = np.searchsorted(edges, x, side="right") - 1
        # values exactly on the last edge belong to the last bin, not a clamp
        idx[x == edges[-1]] = edges.size - 2
        out = (idx < 0) | (idx > edges.size - 2)
        clamped += int(out.sum())
        idx = np.clip(idx, 0, edges.size - 2)
        counts_list.append(np.bincount(idx, minlength=edges.size - 1))
        edges_list.append(edges)
    return HistogramSet(edges_list, counts_list, clamped)
