"""Atlas analysis: per-bundle feature statistics, distribution fits, and
decile threshold intervals.

Every bundle gets a reference streamline (the flip-aligned mean of all its
members), and each member is described by six features computed against that
reference and the bundle barycenter.  Feature conventions here are exactly
the ones used for subject candidates during labeling, so atlas thresholds
and subject features are directly comparable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clustering import quickbundles
from .config import FEATURE_NAMES
from .distances import pairwise_mmea
from .fitting import FittedDistribution, select_best
from .geometry import (
    Bundle,
    angles_to_direction,
    angles_to_plane,
    arc_lengths,
    bundle_barycenter,
    bundle_radius,
    direction_vectors,
    midpoints,
    plane_normals,
    shape_angles,
)

# physically valid range per feature, used to clamp fitted thresholds
FEATURE_DOMAINS = {
    "length_mm": (0.0, math.inf),
    "dist_to_barycenter_mm": (0.0, math.inf),
    "mmea_mm": (0.0, math.inf),
    "plane_angle_deg": (0.0, 90.0),
    "direction_angle_deg": (0.0, 180.0),
    "shape_angle_deg": (0.0, 180.0),
}

_EMPIRICAL_WIDEN = 1e-3

# mmea scores closeness to the model bundle, and a candidate lying closer to
# the bundle than the atlas members lie to each other is evidence for
# membership, not against: an atlas member projected onto itself has mmea 0
# (its twin is in the bundle) yet must be retained.  Only the far decile
# rejects, so the interval floor is pinned to 0.
_LOWER_OPEN = ("mmea_mm",)


@dataclass(frozen=True)
class FeatureInterval:
    low: float
    high: float
    source: str           # "fitted" | "empirical"
    informative: bool = True

    def __post_init__(self):
        if self.informative and not self.low < self.high:
            raise ValueError("threshold interval must satisfy low < high")

    def contains(self, values: np.ndarray) -> np.ndarray:
        return (values >= self.low) & (values <= self.high)


@dataclass(frozen=True)
class BundleModel:
    """An atlas bundle plus everything labeling needs: geometry summary,
    reference streamline, fitted feature intervals."""

    bundle: Bundle
    barycenter: np.ndarray
    radius_mm: float
    reference: np.ndarray
    reference_normal: np.ndarray
    reference_normal_degenerate: bool
    reference_direction: np.ndarray
    thresholds: dict[str, FeatureInterval]
    fits: dict[str, FittedDistribution | None]

    @property
    def id(self) -> str:
        return self.bundle.id


@dataclass(frozen=True)
class AtlasModel:
    bundles: tuple[BundleModel, ...]
    resample_k: int
    format_version: str = "1"

    def __post_init__(self):
        ids = [m.id for m in self.bundles]
        if len(set(ids)) != len(ids):
            raise ValueError("bundle ids must be unique")

    def bundle_map(self) -> dict[str, BundleModel]:
        return {m.id: m for m in self.bundles}

    def all_streamlines(self) -> np.ndarray:
        """Concatenated (N, K, 3) stack of every bundle's streamlines."""
        return np.concatenate([m.bundle.streamlines for m in self.bundles])


def reference_streamline(streamlines: np.ndarray) -> np.ndarray:
    """Single-cluster centroid of the bundle: flip-aligned running mean."""
    clusters = quickbundles(streamlines, threshold_mm=math.inf)
    return clusters[0].centroid


def compute_feature_samples(bundle: Bundle,
                            reference: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Per-streamline feature arrays for an atlas bundle.

    Pairwise features use a leave-one-out nearest neighbor (mmea) or the
    bundle reference streamline (plane/direction angles).  Degenerate values
    are dropped from the affected feature's sample set, so arrays may be
    shorter than the bundle.
    """
    arr = bundle.streamlines
    if len(arr) < 2:
        raise ValueError("atlas bundle too small")
    if reference is None:
        reference = reference_streamline(arr)
    center = bundle_barycenter(arr)

    lengths = arc_lengths(arr)
    dists = np.linalg.norm(midpoints(arr) - center, axis=1)

    d = pairwise_mmea(arr, arr)
    np.fill_diagonal(d, np.inf)
    mmea_nn = d.min(axis=1)

    normals, normal_degen = plane_normals(arr)
    ref_normal, ref_normal_degen = plane_normals(reference[None])
    ref_normal = ref_normal[0]
    if bool(ref_normal_degen[0]):
        plane = np.empty(0)
    else:
        plane_all = angles_to_plane(normals, ref_normal)
        plane = plane_all[~normal_degen]

    directions = direction_vectors(arr)
    ref_direction = direction_vectors(reference[None])[0]
    dir_all, dir_degen = angles_to_direction(directions, ref_direction)
    direction = dir_all[~dir_degen]

    shape_all, shape_degen = shape_angles(arr)
    shape = shape_all[~shape_degen]

    return {
        "length_mm": lengths,
        "dist_to_barycenter_mm": dists,
        "mmea_mm": mmea_nn,
        "plane_angle_deg": plane,
        "direction_angle_deg": direction,
        "shape_angle_deg": shape,
    }


def _empirical_interval(samples: np.ndarray, low_q: float, high_q: float) -> FeatureInterval:
    low = float(np.quantile(samples, low_q))
    high = float(np.quantile(samples, high_q))
    if high - low < 1e-9:
        low -= _EMPIRICAL_WIDEN
        high += _EMPIRICAL_WIDEN
    return FeatureInterval(low, high, "empirical")


def _uninformative_interval(feature: str) -> FeatureInterval:
    lo, hi = FEATURE_DOMAINS[feature]
    return FeatureInterval(lo, hi if math.isfinite(hi) else math.inf,
                           "empirical", informative=False)


def feature_interval(
    feature: str,
    samples: np.ndarray,
    low_q: float = 0.1,
    high_q: float = 0.9,
    source: str = "fitted",
    min_fit_samples: int = 8,
) -> tuple[FeatureInterval, FittedDistribution | None]:
    """Threshold interval for one feature from its sample array.

    Fitted-quantile thresholds when enough samples and some family fits;
    empirical deciles otherwise.  Features with fewer than 2 valid samples
    carry no information and get a full-domain auto-pass interval.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if len(samples) < 2:
        return _uninformative_interval(feature), None

    def finalize(interval: FeatureInterval) -> FeatureInterval:
        if feature in _LOWER_OPEN and interval.high > 0.0:
            return FeatureInterval(0.0, interval.high, interval.source)
        return interval

    if source == "fitted" and len(samples) >= min_fit_samples:
        fit = select_best(samples, min_fit_samples)
        if fit is not None:
            low = fit.quantile(low_q)
            high = fit.quantile(high_q)
            dom_lo, dom_hi = FEATURE_DOMAINS[feature]
            low = max(low, dom_lo)
            high = min(high, dom_hi)
            if math.isfinite(low) and math.isfinite(high) and low < high:
                return finalize(FeatureInterval(low, high, "fitted")), fit
        return finalize(_empirical_interval(samples, low_q, high_q)), fit
    return finalize(_empirical_interval(samples, low_q, high_q)), None


def build_bundle_model(
    bundle: Bundle,
    low_q: float = 0.1,
    high_q: float = 0.9,
    threshold_source: str = "fitted",
    min_fit_samples: int = 8,
) -> BundleModel:
    """Analyze one atlas bundle into a BundleModel."""
    arr = bundle.streamlines
    if len(arr) < 2:
        raise ValueError("atlas bundle too small")
    reference = reference_streamline(arr)
    samples = compute_feature_samples(bundle, reference)

    thresholds: dict[str, FeatureInterval] = {}
    fits: dict[str, FittedDistribution | None] = {}
    for feature in FEATURE_NAMES:
        interval, fit = feature_interval(
            feature, samples[feature], low_q, high_q,
            source=threshold_source, min_fit_samples=min_fit_samples,
        )
        thresholds[feature] = interval
        fits[feature] = fit

    ref_normal, ref_normal_degen = plane_normals(reference[None])
    ref_direction = direction_vectors(reference[None])[0]
    return BundleModel(
        bundle=bundle,
        barycenter=bundle_barycenter(arr),
        radius_mm=bundle_radius(arr),
        reference=reference,
        reference_normal=ref_normal[0],
        reference_normal_degenerate=bool(ref_normal_degen[0]),
        reference_direction=ref_direction,
        thresholds=thresholds,
        fits=fits,
    )


def build_atlas(
    bundles,
    resample_k: int = 21,
    low_q: float = 0.1,
    high_q: float = 0.9,
    threshold_source: str = "fitted",
    min_fit_samples: int = 8,
) -> AtlasModel:
    """Build models for a full bundle set."""
    bundles = list(bundles)
    if not bundles:
        raise ValueError("atlas needs at least one bundle")
    ids = [b.id for b in bundles]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate bundle id")
    models = tuple(
        build_bundle_model(b, low_q, high_q, threshold_source, min_fit_samples)
        for b in bundles
    )
    return AtlasModel(bundles=models, resample_k=resample_k)
