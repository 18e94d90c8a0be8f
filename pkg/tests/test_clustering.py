"""One-pass clustering checked against a plain-loop replay oracle."""
import numpy as np
import pytest

from swmparc.clustering import cluster_centroids, quickbundles
from swmparc.distances import mdf

from conftest import random_streamlines


def replay(streamlines, threshold):
    """Independent reimplementation with scalar kernels and explicit state."""
    clusters = []  # [sum, count, members, flips]
    for idx, s in enumerate(streamlines):
        best = None
        for ci, (total, count, _, _) in enumerate(clusters):
            centroid = total / count
            direct = float(np.mean(np.linalg.norm(centroid - s, axis=1)))
            flipped = float(np.mean(np.linalg.norm(centroid - s[::-1], axis=1)))
            d = min(direct, flipped)
            if best is None or d < best[1]:
                best = (ci, d, flipped < direct)
        if best is not None and best[1] < threshold:
            ci, _, flip = best
            aligned = s[::-1] if flip else s
            clusters[ci][0] = clusters[ci][0] + aligned
            clusters[ci][1] += 1
            clusters[ci][2].append(idx)
            clusters[ci][3].append(flip)
        else:
            clusters.append([s.copy(), 1, [idx], [False]])
    return clusters


@pytest.mark.parametrize("threshold", [2.0, 8.0, 25.0])
def test_matches_replay_oracle(rng, threshold):
    lines = random_streamlines(rng, 50)
    got = quickbundles(lines, threshold)
    want = replay(lines, threshold)
    assert len(got) == len(want)
    for g, w in zip(got, want):
        assert g.member_indices == w[2]
        assert g.flipped == w[3]
        assert np.allclose(g.centroid, w[0] / w[1], atol=1e-9)


def test_partition_is_exact(rng):
    lines = random_streamlines(rng, 60)
    clusters = quickbundles(lines, 12.0)
    seen = sorted(i for c in clusters for i in c.member_indices)
    assert seen == list(range(60))


def test_assignment_distance_below_threshold(rng):
    """Each member was within threshold of its cluster's centroid when it joined."""
    lines = random_streamlines(rng, 50)
    threshold = 10.0
    clusters = quickbundles(lines, threshold)
    for c in clusters:
        running = None
        count = 0
        for idx, flip in zip(c.member_indices, c.flipped):
            s = lines[idx][::-1] if flip else lines[idx]
            if running is not None:
                at_assign = min(
                    mdf(running / count, lines[idx]),
                    mdf(running / count, lines[idx][::-1]),
                )
                assert at_assign < threshold
                running = running + s
            else:
                running = s.copy()
            count += 1
        assert np.allclose(c.centroid, running / count)


def test_infinite_threshold_single_cluster(rng):
    lines = random_streamlines(rng, 25)
    clusters = quickbundles(lines, np.inf)
    assert len(clusters) == 1
    assert clusters[0].count == 25


def test_tiny_threshold_all_singletons(rng):
    lines = random_streamlines(rng, 25)
    clusters = quickbundles(lines, 1e-9)
    assert len(clusters) == 25


def test_threshold_is_strict(rng):
    a = np.linspace([0.0, 0, 0], [10.0, 0, 0], 5)
    b = a + [0.0, 2.0, 0.0]
    # distance exactly 2: strict < means no merge at threshold 2
    assert len(quickbundles(np.stack([a, b]), 2.0)) == 2
    assert len(quickbundles(np.stack([a, b]), 2.0 + 1e-9)) == 1


def test_deterministic(rng):
    lines = random_streamlines(rng, 40)
    c1 = quickbundles(lines, 9.0)
    c2 = quickbundles(lines, 9.0)
    assert [c.member_indices for c in c1] == [c.member_indices for c in c2]


def test_rejects_nonpositive_threshold(rng):
    with pytest.raises(ValueError):
        quickbundles(random_streamlines(rng, 3), 0.0)


def test_centroid_stack():
    assert cluster_centroids([]).shape == (0, 0, 3)
    lines = random_streamlines(np.random.default_rng(3), 6)
    clusters = quickbundles(lines, 5.0)
    stack = cluster_centroids(clusters)
    assert stack.shape == (len(clusters), 21, 3)
