"""One-pass incremental centroid clustering of resampled streamlines.

Streamlines are processed in input order; each joins the nearest existing
centroid when its MDF is below the threshold (flipping its orientation if the
flipped MDF is smaller), otherwise it seeds a new cluster.  Centroids are the
running pointwise mean of the flip-aligned members.  Order dependence is part
of the contract: identical input order and threshold give identical output.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Cluster:
    centroid: np.ndarray
    member_indices: list[int] = field(default_factory=list)
    flipped: list[bool] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.member_indices)


def quickbundles(streamlines: np.ndarray, threshold_mm: float) -> list[Cluster]:
    """Cluster an (n, K, 3) stack under an MDF threshold (mm)."""
    if threshold_mm <= 0.0:
        raise ValueError("threshold must be positive")
    streamlines = np.asarray(streamlines, dtype=np.float64)
    n = streamlines.shape[0]
    if n == 0:
        return []
    k = streamlines.shape[1]

    cap = 16
    centroids = np.empty((cap, k, 3))
    sums = np.empty((cap, k, 3))
    counts: list[int] = []
    members: list[list[int]] = []
    flips: list[list[bool]] = []

    for idx in range(n):
        s = streamlines[idx]
        m = len(counts)
        if m > 0:
            cur = centroids[:m]
            direct = np.linalg.norm(cur - s, axis=2).mean(axis=1)
            flipped = np.linalg.norm(cur - s[::-1], axis=2).mean(axis=1)
            best_each = np.minimum(direct, flipped)
            j = int(np.argmin(best_each))
            if best_each[j] < threshold_mm:
                use_flip = bool(flipped[j] < direct[j])
                aligned = s[::-1] if use_flip else s
                sums[j] += aligned
                counts[j] += 1
                centroids[j] = sums[j] / counts[j]
                members[j].append(idx)
                flips[j].append(use_flip)
                continue
        if m == cap:
            cap *= 2
            grown = np.empty((cap, k, 3))
            grown[:m] = centroids[:m]
            centroids = grown
            grown = np.empty((cap, k, 3))
            grown[:m] = sums[:m]
            sums = grown
        centroids[m] = s
        sums[m] = s
        counts.append(1)
        members.append([idx])
        flips.append([False])

    return [
        Cluster(centroid=centroids[j].copy(), member_indices=members[j], flipped=flips[j])
        for j in range(len(counts))
    ]


def cluster_centroids(clusters: list[Cluster]) -> np.ndarray:
    """Stack cluster centroids into an (m, K, 3) array."""
    if not clusters:
        return np.empty((0, 0, 3))
    return np.stack([c.centroid for c in clusters])
