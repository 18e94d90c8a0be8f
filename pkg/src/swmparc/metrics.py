"""Evaluation metrics: confusion scores, bundle adjacency, coverage, overlap,
streamlines-per-bundle and percentage-of-bundles-extracted summaries.

Empty-denominator cases are flagged as undefined (NaN fields, defined=False)
rather than coerced to zero, and callers exclude them from aggregates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distances import pairwise_mdf

DEFAULT_ADJACENCY_MM = 5.0


@dataclass(frozen=True)
class BundleScore:
    tp: int
    fp: int
    fn: int
    sensitivity: float
    precision: float
    jaccard: float
    f1: float
    defined: bool = True
    specificity: float | None = None
    accuracy: float | None = None


def confusion_scores(labeled, truth, total: int | None = None) -> BundleScore:
    """Set-overlap scores between labeled and ground-truth index sets.

    `total` is the tractogram size; when given, the negative class is the
    rest of the tractogram and specificity/accuracy are filled in.
    Empty truth makes the score undefined.
    """
    labeled = set(int(i) for i in labeled)
    truth = set(int(i) for i in truth)
    tp = len(labeled & truth)
    fp = len(labeled - truth)
    fn = len(truth - labeled)
    if not truth:
        return BundleScore(tp, fp, fn, math.nan, math.nan, math.nan, math.nan,
                           defined=False)
    sensitivity = tp / len(truth)
    precision = tp / len(labeled) if labeled else 0.0
    union = tp + fp + fn
    jaccard = tp / union if union else 0.0
    f1 = (2.0 * precision * sensitivity / (precision + sensitivity)
          if precision + sensitivity > 0 else 0.0)
    specificity = accuracy = None
    if total is not None:
        if total < len(labeled | truth):
            raise ValueError("total smaller than the index sets")
        tn = total - union
        negatives = tn + fp
        specificity = tn / negatives if negatives else math.nan
        accuracy = (tp + tn) / total if total else math.nan
    return BundleScore(tp, fp, fn, sensitivity, precision, jaccard, f1,
                       defined=True, specificity=specificity, accuracy=accuracy)


def bundle_adjacency(A: np.ndarray, B: np.ndarray,
                     threshold_mm: float = DEFAULT_ADJACENCY_MM) -> float:
    """Symmetric fraction of streamlines with a near neighbor in the other
    bundle: 0.5 (A-side fraction + B-side fraction), strict < threshold."""
    if len(A) == 0 or len(B) == 0:
        return math.nan
    d = pairwise_mdf(A, B)
    frac_a = float(np.mean(d.min(axis=1) < threshold_mm))
    frac_b = float(np.mean(d.min(axis=0) < threshold_mm))
    return 0.5 * (frac_a + frac_b)


def coverage(extracted: np.ndarray, model: np.ndarray,
             threshold_mm: float = DEFAULT_ADJACENCY_MM) -> float:
    """Fraction of extracted streamlines with at least one model neighbor."""
    if len(extracted) == 0:
        return math.nan
    if len(model) == 0:
        return 0.0
    d = pairwise_mdf(extracted, model)
    return float(np.mean(d.min(axis=1) < threshold_mm))


def overlap(extracted: np.ndarray, model: np.ndarray,
            threshold_mm: float = DEFAULT_ADJACENCY_MM) -> float:
    """Mean count of model neighbors per extracted streamline."""
    if len(extracted) == 0:
        return math.nan
    if len(model) == 0:
        return 0.0
    d = pairwise_mdf(extracted, model)
    return float(np.mean((d < threshold_mm).sum(axis=1)))


def accepted_counts(result) -> list[int]:
    """Accepted-streamline count per bundle of a parcellation result."""
    return [len(b.accepted_indices) for b in result.bundles]


def pbe(result, min_streamlines: int) -> float:
    """Percentage of atlas bundles extracted with >= min_streamlines accepted."""
    if min_streamlines < 1:
        raise ValueError("min_streamlines must be >= 1")
    counts = accepted_counts(result)
    if not counts:
        raise ValueError("result covers no bundles")
    hits = sum(1 for c in counts if c >= min_streamlines)
    return 100.0 * hits / len(counts)


@dataclass(frozen=True)
class SpbSummary:
    mean: float
    median: float
    sd: float
    n_bundles: int
    defined: bool = True


def spb(result) -> SpbSummary:
    """Streamline-count statistics over bundles with at least one accepted
    streamline; empty bundles carry no size information and are excluded."""
    counts = np.asarray([c for c in accepted_counts(result) if c >= 1], dtype=np.float64)
    if len(counts) == 0:
        return SpbSummary(math.nan, math.nan, math.nan, 0, defined=False)
    return SpbSummary(
        mean=float(counts.mean()),
        median=float(np.median(counts)),
        sd=float(counts.std()),
        n_bundles=int(len(counts)),
    )
