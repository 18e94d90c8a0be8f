import numpy as np
import pytest

import swmparc.distances as dist
from swmparc.distances import bundle_min_distance, mdf, mmea, pairwise_mdf, pairwise_mmea

from conftest import random_streamlines


def test_mdf_axioms(rng):
    A = random_streamlines(rng, 40)
    B = random_streamlines(rng, 40)
    for a, b in zip(A, B):
        d = mdf(a, b)
        assert d >= 0.0
        assert abs(d - mdf(b, a)) < 1e-9
        assert mdf(a, a) == 0.0
        assert mdf(a, a[::-1]) == 0.0  # flip identity


def test_mdf_picks_smaller_orientation():
    a = np.linspace([0.0, 0, 0], [10.0, 0, 0], 5)
    b = a[::-1] + [0.0, 1.0, 0.0]
    # direct order is reversed, flipped matches: distance is the 1 mm offset
    assert mdf(a, b) == pytest.approx(1.0)


def test_mdf_shape_checks():
    a = np.zeros((5, 3))
    with pytest.raises(ValueError):
        mdf(a, np.zeros((7, 3)))


def test_mmea_translation_invariance(rng):
    A = random_streamlines(rng, 30)
    B = random_streamlines(rng, 30)
    for a, b in zip(A, B):
        base = mmea(a, b)
        shifted = mmea(a + rng.uniform(-100, 100, 3), b + rng.uniform(-100, 100, 3))
        assert abs(base - shifted) < 1e-9
        assert abs(base - mmea(b, a)) < 1e-9


def test_mmea_requires_odd_point_count():
    with pytest.raises(ValueError):
        mmea(np.zeros((4, 3)), np.zeros((4, 3)))


def test_mmea_zero_after_translation():
    a = random_streamlines(np.random.default_rng(0), 1)[0]
    assert mmea(a, a + [5.0, -3.0, 2.0]) < 1e-9


def test_pairwise_mdf_matches_scalar_kernel(rng):
    A = random_streamlines(rng, 17)
    B = random_streamlines(rng, 23)
    fast = pairwise_mdf(A, B)
    slow = np.array([[mdf(a, b) for b in B] for a in A])
    assert np.abs(fast - slow).max() < 1e-9


def test_pairwise_mdf_chunking(rng, monkeypatch):
    monkeypatch.setattr(dist, "_CHUNK", 3)
    A = random_streamlines(rng, 10)
    B = random_streamlines(rng, 4)
    slow = np.array([[mdf(a, b) for b in B] for a in A])
    assert np.abs(pairwise_mdf(A, B) - slow).max() < 1e-9


def test_pairwise_self_distance_near_zero(rng):
    # the matmul expansion loses some precision exactly at zero distance
    A = random_streamlines(rng, 12) + 150.0
    assert np.abs(np.diag(pairwise_mdf(A, A))).max() < 1e-5


def test_pairwise_mmea_matches_scalar(rng):
    A = random_streamlines(rng, 9)
    B = random_streamlines(rng, 7)
    fast = pairwise_mmea(A, B)
    slow = np.array([[mmea(a, b) for b in B] for a in A])
    assert np.abs(fast - slow).max() < 1e-9


def test_bundle_min_distance_brute_force(rng):
    A = random_streamlines(rng, 8)
    B = random_streamlines(rng, 11)
    half_a = np.mean([min(mdf(a, b) for b in B) for a in A])
    half_b = np.mean([min(mdf(b, a) for a in A) for b in B])
    expected = 0.5 * (half_a + half_b)
    assert bundle_min_distance(A, B) == pytest.approx(expected, abs=1e-9)
    assert bundle_min_distance(A, B) == pytest.approx(bundle_min_distance(B, A), abs=1e-9)


def test_bundle_min_distance_zero_on_identical_sets(rng):
    A = random_streamlines(rng, 5)
    assert bundle_min_distance(A, A) < 1e-6
    with pytest.raises(ValueError):
        bundle_min_distance(A, np.empty((0, 21, 3)))
