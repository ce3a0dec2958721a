import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from embedview.core import Dataset, LandmarkModel


@pytest.fixture
def rng_np():
    return np.random.default_rng(20240817)


@pytest.fixture
def small_dataset():
    gen = np.random.default_rng(11)
    pts = gen.normal(size=(500, 5)).astype(np.float32)
    return Dataset.from_points(pts)


def random_model(gen, g, d, lo_scale=1.0):
    hi = gen.normal(size=(g, d)).astype(np.float32)
    lo = (gen.random((g, 2)) * lo_scale).astype(np.float32)
    return LandmarkModel.create(hi, lo)


def py_sqdist_f32(p, l):
    """Sequential float32 accumulation, mirroring the kernels' arithmetic."""
    s = np.float32(0.0)
    for c in range(p.shape[0]):
        diff = np.float32(p[c]) - np.float32(l[c])
        s = np.float32(s + diff * diff)
    return s


def brute_force_knn_rows(points, landmarks, k):
    """Full-sort selection oracle: sort all landmarks by (distance, index)."""
    pts = np.asarray(points, np.float32)
    lms = np.asarray(landmarks, np.float32)
    idx_rows = []
    dist_rows = []
    for i in range(pts.shape[0]):
        pairs = sorted(
            ((py_sqdist_f32(pts[i], lms[j]), j) for j in range(lms.shape[0]))
        )[:k]
        dist_rows.append([p[0] for p in pairs])
        idx_rows.append([p[1] for p in pairs])
    return np.array(idx_rows, np.int32), np.array(dist_rows, np.float32)
