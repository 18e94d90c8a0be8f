"""Streamline distance kernels: MDF, medial-aligned MDF, and the symmetric
bundle cost minimized by registration."""
from __future__ import annotations

import numpy as np

from .geometry import midpoints

# Pairwise blocks are evaluated in chunks to bound the (K, n, m) temporaries.
_CHUNK = 2048


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 3:
        raise ValueError("streamlines must share the same (K, 3) shape")
    return a, b


def mdf(a, b) -> float:
    """Minimum average direct-flip distance between two equal-K streamlines."""
    a, b = _check_pair(a, b)
    direct = float(np.mean(np.linalg.norm(a - b, axis=1)))
    flipped = float(np.mean(np.linalg.norm(a - b[::-1], axis=1)))
    return min(direct, flipped)


def center_at_midpoints(batch: np.ndarray) -> np.ndarray:
    """Translate each streamline so its medial point sits at the origin."""
    return batch - midpoints(batch)[:, None, :]


def mmea(a, b) -> float:
    """MDF after translating both streamlines to put their medial points at
    the origin; translation-invariant shape distance."""
    a, b = _check_pair(a, b)
    if a.shape[0] % 2 == 0:
        raise ValueError("medial alignment requires an odd point count")
    k = (a.shape[0] - 1) // 2
    return mdf(a - a[k], b - b[k])


def pairwise_mdf(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """All-pairs MDF between two (n, K, 3) stacks, returned as (n, m).

    Point distances come from the |a|^2 + |b|^2 - 2 a.b expansion so the heavy
    lifting is K batched matmuls instead of an (n, m, K, 3) broadcast; the
    expansion can go slightly negative under rounding, hence the clamp.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[1:] != B.shape[1:]:
        raise ValueError("stacks must share the same (K, 3) streamline shape")
    n, m = A.shape[0], B.shape[0]
    k = A.shape[1]
    Bt = np.ascontiguousarray(B.transpose(1, 2, 0))  # (K, 3, m)
    Btrev = np.ascontiguousarray(Bt[::-1])
    b2 = np.einsum("kcm,kcm->km", Bt, Bt)
    b2rev = b2[::-1]
    out = np.empty((n, m))
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        At = np.ascontiguousarray(A[lo:hi].transpose(1, 0, 2))  # (K, chunk, 3)
        a2 = np.einsum("knc,knc->kn", At, At)
        d2 = At @ Bt
        d2 *= -2.0
        d2 += a2[:, :, None]
        d2 += b2[:, None, :]
        np.maximum(d2, 0.0, out=d2)
        direct = np.sqrt(d2, out=d2).mean(axis=0)
        d2 = At @ Btrev
        d2 *= -2.0
        d2 += a2[:, :, None]
        d2 += b2rev[:, None, :]
        np.maximum(d2, 0.0, out=d2)
        flipped = np.sqrt(d2, out=d2).mean(axis=0)
        out[lo:hi] = np.minimum(direct, flipped)
    return out


def pairwise_mmea(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """All-pairs medial-aligned MDF between two (n, K, 3) stacks."""
    return pairwise_mdf(center_at_midpoints(np.asarray(A, dtype=np.float64)),
                        center_at_midpoints(np.asarray(B, dtype=np.float64)))


def bundle_min_distance(A, B) -> float:
    """Symmetric mean-of-minimum MDF between two streamline sets.

    0.5 * (mean over A of min MDF to B + mean over B of min MDF to A); the
    registration cost.  Exact brute force, intended for centroid-sized sets.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if len(A) == 0 or len(B) == 0:
        raise ValueError("bundle_min_distance needs non-empty sets")
    d = pairwise_mdf(A, B)
    return float(0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean()))
