"""Subject labeling pipeline: global alignment onto the atlas, per-bundle
local registration, six-feature computation, and threshold-interval decisions.

Per-bundle work is independent by construction (immutable atlas and subject
arrays, merge ordered by bundle index), so any worker count produces the
same result.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .atlas import AtlasModel, BundleModel
from .clustering import cluster_centroids, quickbundles
from .config import FEATURE_NAMES, RunConfig
from .distances import pairwise_mmea
from .geometry import (
    angles_to_direction,
    angles_to_plane,
    arc_lengths,
    direction_vectors,
    midpoints,
    plane_normals,
    shape_angles,
)
from .registration import (
    LocalRegistration,
    RegistrationResult,
    apply_rigid,
    lsnr,
    sbr_rigid,
)
from .spatial import StreamlineGrid


@dataclass(frozen=True)
class LabelDecision:
    """Outcome of testing one candidate streamline against one bundle model."""

    streamline_index: int
    bundle_id: str
    features: dict[str, float]
    passed: dict[str, bool]
    accepted: bool
    auto_passed: tuple[str, ...] = ()

    def __post_init__(self):
        if self.accepted != all(self.passed.values()):
            raise ValueError("accepted flag must equal the conjunction of per-feature tests")


@dataclass(frozen=True)
class BundleParcellation:
    bundle_id: str
    status: str                       # "recognized" | "absent"
    accepted_indices: np.ndarray      # ascending original subject indices
    decisions: tuple[LabelDecision, ...]
    local: LocalRegistration


@dataclass(frozen=True)
class ParcellationResult:
    bundles: tuple[BundleParcellation, ...]
    global_registration: RegistrationResult
    config: RunConfig
    subject_count: int

    def bundle_map(self) -> dict[str, BundleParcellation]:
        return {b.bundle_id: b for b in self.bundles}

    def label_map(self) -> dict[int, tuple[str, ...]]:
        """Subject index -> accepted bundle ids, in atlas order (multi-label)."""
        labels: dict[int, list[str]] = {}
        for b in self.bundles:
            for i in b.accepted_indices:
                labels.setdefault(int(i), []).append(b.bundle_id)
        return {i: tuple(v) for i, v in labels.items()}


def _feature_table(candidates: np.ndarray, model: BundleModel):
    """Six feature arrays plus candidate-side degenerate flags for a batch."""
    n = len(candidates)
    no_flag = np.zeros(n, dtype=bool)
    values: dict[str, np.ndarray] = {}
    degenerate: dict[str, np.ndarray] = {}

    values["length_mm"] = arc_lengths(candidates)
    degenerate["length_mm"] = no_flag
    values["dist_to_barycenter_mm"] = np.linalg.norm(
        midpoints(candidates) - model.barycenter, axis=1)
    degenerate["dist_to_barycenter_mm"] = no_flag
    values["mmea_mm"] = pairwise_mmea(candidates, model.bundle.streamlines).min(axis=1)
    degenerate["mmea_mm"] = no_flag

    if model.reference_normal_degenerate:
        values["plane_angle_deg"] = np.full(n, np.nan)
        degenerate["plane_angle_deg"] = np.ones(n, dtype=bool)
    else:
        normals, ndeg = plane_normals(candidates)
        angles = angles_to_plane(normals, model.reference_normal)
        values["plane_angle_deg"] = np.where(ndeg, np.nan, angles)
        degenerate["plane_angle_deg"] = ndeg

    dirs = direction_vectors(candidates)
    dir_angles, ddeg = angles_to_direction(dirs, model.reference_direction)
    values["direction_angle_deg"] = dir_angles
    degenerate["direction_angle_deg"] = ddeg

    shape, sdeg = shape_angles(candidates)
    values["shape_angle_deg"] = shape
    degenerate["shape_angle_deg"] = sdeg
    return values, degenerate


def compute_features(candidate: np.ndarray, model: BundleModel) -> tuple[dict[str, float], tuple[str, ...]]:
    """Feature vector of one candidate against a bundle model.

    Uses the same conventions as the atlas feature samples, so the values are
    directly comparable with the model's threshold intervals.  Returns the
    six values plus the names of any degenerate (NaN-valued) features.
    """
    batch = np.asarray(candidate, dtype=np.float64)[None, :, :]
    values, degenerate = _feature_table(batch, model)
    fv = {f: float(values[f][0]) for f in FEATURE_NAMES}
    flagged = tuple(f for f in FEATURE_NAMES if bool(degenerate[f][0]))
    return fv, flagged


def label_streamline(
    fv: dict[str, float],
    model: BundleModel,
    streamline_index: int = -1,
    degenerate: tuple[str, ...] = (),
    features: tuple[str, ...] = FEATURE_NAMES,
) -> LabelDecision:
    """Test a feature vector against the model's closed threshold intervals.

    A feature passes when low <= value <= high.  Auto-pass cases: features
    excluded from `features` (ablation), model intervals carrying no
    information, and candidate-side degenerate values.
    """
    passed: dict[str, bool] = {}
    auto: list[str] = []
    for f in FEATURE_NAMES:
        interval = model.thresholds[f]
        if f not in features or not interval.informative or f in degenerate:
            passed[f] = True
            auto.append(f)
            continue
        v = fv[f]
        passed[f] = bool(interval.low <= v <= interval.high)
    return LabelDecision(
        streamline_index=streamline_index,
        bundle_id=model.id,
        features={f: fv[f] for f in FEATURE_NAMES},
        passed=passed,
        accepted=all(passed.values()),
        auto_passed=tuple(auto),
    )


def parcellate_bundle(
    model: BundleModel,
    subject_streamlines: np.ndarray,
    atlas_streamlines: np.ndarray,
    config: RunConfig | None = None,
    subject_grid: StreamlineGrid | None = None,
    atlas_grid: StreamlineGrid | None = None,
) -> BundleParcellation:
    """Label one bundle: local registration, then per-candidate decisions.

    `subject_streamlines` must already be globally aligned to the atlas.
    Candidates are the streamlines of the bundle's sphere neighborhood,
    moved by the local transform before feature computation.
    """
    cfg = config or RunConfig()
    local = lsnr(
        model.barycenter, model.radius_mm,
        atlas_streamlines, subject_streamlines,
        config=cfg, atlas_grid=atlas_grid, subject_grid=subject_grid,
        bundle_id=model.id,
    )
    if local.absent:
        return BundleParcellation(
            bundle_id=model.id,
            status="absent",
            accepted_indices=np.empty(0, dtype=np.int64),
            decisions=(),
            local=local,
        )
    indices = local.neighborhood.streamline_indices
    candidates = apply_rigid(local.registration.transform, subject_streamlines[indices])
    values, degen = _feature_table(candidates, model)

    decisions = []
    accepted = []
    for row, idx in enumerate(indices):
        fv = {f: float(values[f][row]) for f in FEATURE_NAMES}
        flagged = tuple(f for f in FEATURE_NAMES if bool(degen[f][row]))
        decision = label_streamline(fv, model, int(idx), flagged, cfg.features)
        decisions.append(decision)
        if decision.accepted:
            accepted.append(int(idx))
    return BundleParcellation(
        bundle_id=model.id,
        status="recognized",
        accepted_indices=np.asarray(accepted, dtype=np.int64),
        decisions=tuple(decisions),
        local=local,
    )


def global_align(
    atlas: AtlasModel,
    subject_streamlines: np.ndarray,
    config: RunConfig | None = None,
) -> tuple[np.ndarray, RegistrationResult]:
    """Rigidly register the subject onto the atlas via centroid reductions."""
    cfg = config or RunConfig()
    atlas_centroids = cluster_centroids(
        quickbundles(atlas.all_streamlines(), cfg.qb_threshold_global_mm))
    subject_centroids = cluster_centroids(
        quickbundles(subject_streamlines, cfg.qb_threshold_global_mm))
    registration = sbr_rigid(subject_centroids, atlas_centroids, cfg)
    aligned = apply_rigid(registration.transform, subject_streamlines)
    return aligned, registration


def _winner_take_all(bundles: list[BundleParcellation]) -> list[BundleParcellation]:
    """Keep each multiply-accepted streamline only in its closest bundle.

    Closest = smallest mmea feature value; ties go to the earlier bundle in
    atlas order.  Decisions are left untouched (they record the raw tests).
    """
    best: dict[int, tuple[float, int]] = {}
    for order, b in enumerate(bundles):
        mmea_of = {d.streamline_index: d.features["mmea_mm"] for d in b.decisions}
        for idx in b.accepted_indices:
            key = (mmea_of[int(idx)], order)
            if int(idx) not in best or key < best[int(idx)]:
                best[int(idx)] = key
    out = []
    for order, b in enumerate(bundles):
        keep = np.asarray(
            [i for i in b.accepted_indices if best[int(i)][1] == order],
            dtype=np.int64,
        )
        out.append(BundleParcellation(
            bundle_id=b.bundle_id, status=b.status,
            accepted_indices=keep, decisions=b.decisions, local=b.local,
        ))
    return out


def parcellate(
    atlas: AtlasModel,
    subject_streamlines: np.ndarray,
    config: RunConfig | None = None,
) -> ParcellationResult:
    """Full projection: global registration, then every bundle independently.

    Output is deterministic for any worker count: bundle tasks share only
    immutable inputs and results are merged in atlas order.
    """
    cfg = config or RunConfig()
    subject_streamlines = np.asarray(subject_streamlines, dtype=np.float64)
    if len(subject_streamlines) == 0:
        raise ValueError("empty subject tractogram")

    aligned, global_reg = global_align(atlas, subject_streamlines, cfg)
    atlas_all = atlas.all_streamlines()
    atlas_grid = StreamlineGrid(atlas_all, cfg.grid_cell_mm)
    subject_grid = StreamlineGrid(aligned, cfg.grid_cell_mm)

    def run(model: BundleModel) -> BundleParcellation:
        return parcellate_bundle(model, aligned, atlas_all, cfg,
                                 subject_grid=subject_grid, atlas_grid=atlas_grid)

    if cfg.workers == 1 or len(atlas.bundles) <= 1:
        results = [run(m) for m in atlas.bundles]
    else:
        workers = cfg.workers if cfg.workers > 0 else None
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, atlas.bundles))

    if cfg.winner_take_all:
        results = _winner_take_all(results)
    return ParcellationResult(
        bundles=tuple(results),
        global_registration=global_reg,
        config=cfg,
        subject_count=len(subject_streamlines),
    )
