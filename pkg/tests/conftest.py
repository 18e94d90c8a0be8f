"""Shared fixtures: small deterministic geometry helpers."""
import numpy as np
import pytest

from swmparc.geometry import resample

# filled by the acceptance tests; echoed after the run so the per-criterion
# verdict lines are visible even when pytest captures stdout
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_arc(radius=10.0, span_deg=180.0, k=21, center=(0.0, 0.0, 0.0)):
    """Planar circular arc in the xy plane, symmetric about the y axis."""
    half = np.radians(span_deg) / 2.0
    theta = np.linspace(np.pi / 2.0 - half, np.pi / 2.0 + half, k)
    pts = np.stack([
        radius * np.cos(theta),
        radius * np.sin(theta),
        np.zeros(k),
    ], axis=1)
    return pts + np.asarray(center, dtype=np.float64)


def random_streamlines(rng, n, k=21, scale=30.0, wobble=3.0):
    """Random smooth-ish polylines: line plus low-frequency noise."""
    start = rng.uniform(-scale, scale, size=(n, 1, 3))
    end = rng.uniform(-scale, scale, size=(n, 1, 3))
    t = np.linspace(0.0, 1.0, k)[None, :, None]
    lines = start + (end - start) * t
    lines += wobble * np.sin(np.pi * t) * rng.standard_normal((n, 1, 3))
    return np.stack([resample(s, k) for s in lines])


def random_rotation_matrix(rng):
    # QR of a Gaussian matrix, determinant fixed to +1
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1.0
    return q


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
