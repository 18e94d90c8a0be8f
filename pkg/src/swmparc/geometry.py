"""Streamline geometry: resampling and the six per-streamline descriptors.

A streamline is an (N, 3) float64 array of points in millimeters.  All
pipeline algorithms operate on the fixed-K resampled form (K odd, default 21)
so that every streamline has an exact medial point.  Batch variants accept an
(n, K, 3) stack and are the hot path; the scalar functions define the contract.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RESAMPLE_POINTS = 21
DEGENERATE_NORM = 1e-9


def as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("streamline must be an (N, 3) array")
    if pts.shape[0] < 2:
        raise ValueError("streamline needs at least 2 points")
    if not np.all(np.isfinite(pts)):
        raise ValueError("streamline contains non-finite coordinates")
    return pts


def dedupe_consecutive(points: np.ndarray) -> np.ndarray:
    """Drop points identical to their predecessor (zero-length segments)."""
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    keep = np.ones(len(points), dtype=bool)
    keep[1:] = seg > 0.0
    return points[keep]


def resample(points, k: int = RESAMPLE_POINTS) -> np.ndarray:
    """Resample a polyline to k points at equal arc-length spacing.

    Endpoints are preserved.  Consecutive duplicate points are removed first;
    a zero-total-length input is rejected.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    pts = dedupe_consecutive(as_points(points))
    if len(pts) < 2:
        raise ValueError("zero-length streamline")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    total = cum[-1]
    if total <= 0.0:
        raise ValueError("zero-length streamline")
    target = np.linspace(0.0, total, k)
    out = np.empty((k, 3))
    for dim in range(3):
        out[:, dim] = np.interp(target, cum, pts[:, dim])
    # guard against interp rounding at the ends
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out


def resample_all(streamlines, k: int = RESAMPLE_POINTS) -> np.ndarray:
    """Resample a sequence of polylines into one (n, k, 3) stack."""
    if len(streamlines) == 0:
        return np.empty((0, k, 3))
    return np.stack([resample(s, k) for s in streamlines])


def arc_length(points) -> float:
    pts = as_points(points)
    return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))


def arc_lengths(batch: np.ndarray) -> np.ndarray:
    """Arc lengths of an (n, K, 3) stack."""
    return np.sum(np.linalg.norm(np.diff(batch, axis=1), axis=2), axis=1)


def midpoint(points) -> np.ndarray:
    pts = as_points(points)
    if len(pts) % 2 == 0:
        raise ValueError("midpoint requires an odd point count")
    return pts[(len(pts) - 1) // 2]


def midpoints(batch: np.ndarray) -> np.ndarray:
    if batch.shape[1] % 2 == 0:
        raise ValueError("midpoint requires an odd point count")
    return batch[:, (batch.shape[1] - 1) // 2, :]


@dataclass(frozen=True)
class Bundle:
    """A named group of resampled streamlines, stacked (n, K, 3)."""

    id: str
    streamlines: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.streamlines, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError("bundle streamlines must be an (n, K, 3) array")
        if arr.shape[0] == 0:
            raise ValueError("bundle must be non-empty")
        object.__setattr__(self, "streamlines", arr)

    def __len__(self) -> int:
        return self.streamlines.shape[0]


def bundle_barycenter(streamlines: np.ndarray) -> np.ndarray:
    """Mean of all resampled points of all streamlines."""
    if len(streamlines) == 0:
        raise ValueError("bundle must be non-empty")
    return streamlines.reshape(-1, 3).mean(axis=0)


def bundle_radius(streamlines: np.ndarray, barycenter: np.ndarray | None = None) -> float:
    """Radius of the smallest barycenter-centered sphere containing all points."""
    if barycenter is None:
        barycenter = bundle_barycenter(streamlines)
    d = np.linalg.norm(streamlines.reshape(-1, 3) - barycenter, axis=1)
    return float(d.max())


def _normalize_sign(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its first component with |v| > threshold is positive."""
    v = np.atleast_2d(vectors).copy()
    significant = np.abs(v) > DEGENERATE_NORM
    # index of the first significant component per row; rows with none stay put
    any_sig = significant.any(axis=1)
    first = np.argmax(significant, axis=1)
    lead = v[np.arange(len(v)), first]
    flip = any_sig & (lead < 0)
    v[flip] *= -1.0
    return v if vectors.ndim > 1 else v[0]


def plane_normals(batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares plane normals for an (n, K, 3) stack.

    Returns (normals, degenerate) where degenerate marks collinear point sets
    whose normal direction is ambiguous.  Normals are sign-normalized so the
    first component above threshold is positive.
    """
    centered = batch - batch.mean(axis=1, keepdims=True)
    # smallest right-singular vector = direction of least scatter
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    normals = _normalize_sign(vt[:, 2, :])
    scale = np.maximum(s[:, 0], 1e-12)
    degenerate = s[:, 1] <= 1e-9 * scale
    return normals, degenerate


def fit_plane_normal(points) -> tuple[np.ndarray, bool]:
    """Unit normal of the least-squares plane through a streamline's points."""
    pts = as_points(points)
    if len(pts) < 3:
        raise ValueError("plane fit needs at least 3 points")
    normals, degenerate = plane_normals(pts[None, :, :])
    return normals[0], bool(degenerate[0])


def direction_vectors(batch: np.ndarray) -> np.ndarray:
    """Mean of (first - midpoint) and (last - midpoint) per streamline."""
    mid = midpoints(batch)
    v1 = batch[:, 0, :] - mid
    v2 = batch[:, -1, :] - mid
    return 0.5 * (v1 + v2)


def direction_vector(points) -> np.ndarray:
    pts = as_points(points)
    return direction_vectors(pts[None, :, :])[0]


def _clamped_angle_deg(cosine: np.ndarray) -> np.ndarray:
    c = np.clip(cosine, -1.0, 1.0)
    out = np.degrees(np.arccos(c))
    # pin exact extremes so collinear inputs give 0 / 180 exactly
    out = np.where(c >= 1.0, 0.0, out)
    out = np.where(c <= -1.0, 180.0, out)
    return out


def shape_angles(batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Angle between the two midpoint-to-endpoint vectors, per streamline.

    Returns (angles_deg, degenerate); degenerate rows (either vector below
    threshold) carry NaN angles instead of raising.
    """
    mid = midpoints(batch)
    v1 = batch[:, 0, :] - mid
    v2 = batch[:, -1, :] - mid
    n1 = np.linalg.norm(v1, axis=1)
    n2 = np.linalg.norm(v2, axis=1)
    degenerate = (n1 <= DEGENERATE_NORM) | (n2 <= DEGENERATE_NORM)
    denom = np.where(degenerate, 1.0, n1 * n2)
    cosine = np.einsum("ij,ij->i", v1, v2) / denom
    angles = _clamped_angle_deg(cosine)
    angles = np.where(degenerate, np.nan, angles)
    return angles, degenerate


def shape_angle(points) -> float:
    """Angle describing how close to a U-form the streamline is (180 = straight)."""
    pts = as_points(points)
    angles, degenerate = shape_angles(pts[None, :, :])
    if degenerate[0]:
        raise ValueError("degenerate shape angle")
    return float(angles[0])


def angle_between_planes(n1, n2) -> float:
    """Angle between two planes via their normals, folded to [0, 90] degrees."""
    n1 = np.asarray(n1, dtype=np.float64)
    n2 = np.asarray(n2, dtype=np.float64)
    m1 = float(np.linalg.norm(n1))
    m2 = float(np.linalg.norm(n2))
    if m1 <= DEGENERATE_NORM or m2 <= DEGENERATE_NORM:
        raise ValueError("degenerate plane normal")
    cosine = abs(float(np.dot(n1, n2))) / (m1 * m2)
    return float(_clamped_angle_deg(np.asarray(cosine)))


def angles_to_plane(normals: np.ndarray, reference: np.ndarray) -> np.ndarray:
    cosine = np.abs(normals @ reference)
    return _clamped_angle_deg(cosine)


def angle_between_directions(d1, d2) -> float:
    """Oriented angle between two direction vectors in [0, 180] degrees."""
    d1 = np.asarray(d1, dtype=np.float64)
    d2 = np.asarray(d2, dtype=np.float64)
    m1 = float(np.linalg.norm(d1))
    m2 = float(np.linalg.norm(d2))
    if m1 <= DEGENERATE_NORM or m2 <= DEGENERATE_NORM:
        raise ValueError("degenerate direction")
    cosine = float(np.dot(d1, d2)) / (m1 * m2)
    return float(_clamped_angle_deg(np.asarray(cosine)))


def angles_to_direction(directions: np.ndarray, reference: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Angles of each row to a reference direction; degenerate rows flagged."""
    norms = np.linalg.norm(directions, axis=1)
    ref_norm = float(np.linalg.norm(reference))
    degenerate = norms <= DEGENERATE_NORM
    if ref_norm <= DEGENERATE_NORM:
        return np.full(len(directions), np.nan), np.ones(len(directions), dtype=bool)
    denom = np.where(degenerate, 1.0, norms * ref_norm)
    cosine = (directions @ reference) / denom
    angles = _clamped_angle_deg(cosine)
    return np.where(degenerate, np.nan, angles), degenerate
