import numpy as np
import pytest

from embedview.core import Dataset, InputError, LandmarkModel, ParameterError, Rng
from embedview.datagen import extruded_s
from embedview.som import (
    SomConfig,
    bmu,
    fit_hi_for_new_landmark,
    quantization_error,
    som_tick,
)


def grid_model(rows, cols, dataset, rng):
    ys, xs = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    lo = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float32)
    hi = dataset.points[rng.choice_distinct(dataset.n, rows * cols)]
    return LandmarkModel.create(hi, lo)


class TestBmu:
    def test_exact_match(self, rng_np):
        hi = rng_np.random((8, 3)).astype(np.float32)
        assert bmu(hi[3], hi) == 3

    def test_tie_goes_to_lower_index(self):
        hi = np.array([[1.0], [-1.0]], np.float32)
        assert bmu(np.array([0.0]), hi) == 0

    def test_matches_full_scan_oracle(self, rng_np):
        hi = rng_np.normal(size=(64, 5)).astype(np.float32)
        for _ in range(30):
            p = rng_np.normal(size=5)
            best = min(range(64), key=lambda j: (np.sum((hi[j] - p) ** 2), j))
            assert bmu(p, hi) == best


class TestSomTick:
    def test_zero_alpha_leaves_hi_unchanged(self, small_dataset):
        rng = Rng(3)
        model = grid_model(4, 4, small_dataset, rng)
        out = som_tick(small_dataset, model, SomConfig(sigma=1.0, alpha=0.0), rng)
        assert np.array_equal(out, model.hi)

    def test_single_landmark_full_step_lands_on_sample(self):
        pts = np.arange(12, dtype=np.float32).reshape(4, 3)
        ds = Dataset.from_points(pts)
        model = LandmarkModel.create(np.zeros((1, 3), np.float32), np.zeros((1, 2), np.float32))
        rng = Rng(9)
        probe = Rng(9)
        expect_idx = int(probe.integers(0, 4, size=1)[0])
        out = som_tick(ds, model, SomConfig(sigma=1.0, alpha=1.0, batch_size=1), rng)
        np.testing.assert_array_equal(out[0], pts[expect_idx])

    def test_smaller_sigma_shrinks_non_bmu_updates(self, small_dataset):
        rng_seed = 77
        model = grid_model(4, 4, small_dataset, Rng(rng_seed))
        moved = {}
        for sigma in (0.2, 1.5):
            cfg = SomConfig(sigma=sigma, alpha=0.5, batch_size=1)
            out = som_tick(small_dataset, model, cfg, Rng(123))
            moved[sigma] = np.linalg.norm(
                out.astype(np.float64) - model.hi.astype(np.float64), axis=1
            )
        sample = small_dataset.points[Rng(123).integers(0, small_dataset.n, size=1)[0]]
        b = bmu(sample, model.hi)
        for j in range(model.g):
            if j == b:
                continue
            if moved[1.5][j] > 0:
                assert moved[0.2][j] < moved[1.5][j]

    def test_sigma_locality_never_amplifies(self, small_dataset):
        model = grid_model(4, 4, small_dataset, Rng(5))
        big = som_tick(small_dataset, model, SomConfig(sigma=2.0, alpha=0.3, batch_size=1), Rng(8))
        small = som_tick(small_dataset, model, SomConfig(sigma=0.5, alpha=0.3, batch_size=1), Rng(8))
        d_big = np.linalg.norm(big - model.hi, axis=1)
        d_small = np.linalg.norm(small - model.hi, axis=1)
        assert np.all(d_small <= d_big + 1e-12)

    def test_convexity_of_single_sample_update(self, small_dataset):
        model = grid_model(4, 4, small_dataset, Rng(21))
        rng = Rng(31)
        probe = Rng(31)
        s_idx = int(probe.integers(0, small_dataset.n, size=1)[0])
        sample = small_dataset.points[s_idx].astype(np.float64)
        out = som_tick(small_dataset, model, SomConfig(sigma=1.0, alpha=0.8, batch_size=1), rng)
        old = model.hi.astype(np.float64)
        lo_bound = np.minimum(old, sample[None, :]) - 1e-9
        hi_bound = np.maximum(old, sample[None, :]) + 1e-9
        assert np.all(out >= lo_bound) and np.all(out <= hi_bound)

    def test_deterministic_across_runs(self, small_dataset):
        cfg = SomConfig(sigma=0.8, alpha=0.2, batch_size=64)
        results = []
        for _ in range(2):
            model = grid_model(4, 4, small_dataset, Rng(1))
            rng = Rng(2)
            for _ in range(5):
                model = model.with_hi(som_tick(small_dataset, model, cfg, rng))
            results.append(model.hi)
        assert np.array_equal(results[0], results[1])

    def test_lo_is_never_modified(self, small_dataset):
        model = grid_model(3, 3, small_dataset, Rng(4))
        before = model.lo.copy()
        som_tick(small_dataset, model, SomConfig(), Rng(6))
        assert np.array_equal(model.lo, before)

    def test_quantization_error_drops_on_extruded_s(self):
        ds = Dataset.from_points(extruded_s(10_000, seed=5))
        rng = Rng(2)
        model = grid_model(16, 16, ds, rng)
        before = quantization_error(ds, model.hi)
        for t in range(50):
            frac = t / 49
            cfg = SomConfig(sigma=1.5 + (0.2 - 1.5) * frac, alpha=0.1)
            model = model.with_hi(som_tick(ds, model, cfg, rng))
        after = quantization_error(ds, model.hi)
        assert after <= before * 0.7


class TestFitHiForNewLandmark:
    def test_coincident_position_returns_that_row(self, rng_np):
        model = LandmarkModel.create(
            rng_np.random((6, 4)).astype(np.float32), rng_np.random((6, 2)).astype(np.float32)
        )
        np.testing.assert_array_equal(fit_hi_for_new_landmark(model.lo[2], model), model.hi[2])

    def test_midpoint_of_symmetric_pair(self):
        hi = np.array([[0.0, 0.0], [2.0, 2.0], [100.0, -100.0]], np.float32)
        lo = np.array([[-1.0, 0.0], [1.0, 0.0], [500.0, 500.0]], np.float32)
        model = LandmarkModel.create(hi, lo)
        fitted = fit_hi_for_new_landmark((0.0, 0.0), model)
        np.testing.assert_allclose(fitted, [1.0, 1.0], atol=1e-3)

    def test_matches_weight_formula(self, rng_np):
        model = LandmarkModel.create(
            rng_np.random((10, 5)).astype(np.float32), rng_np.random((10, 2)).astype(np.float32)
        )
        pos = rng_np.random(2)
        d2 = np.sum((model.lo.astype(np.float64) - pos) ** 2, axis=1)
        w = 1.0 / (d2 + 1e-6)
        expect = (w[:, None] * model.hi.astype(np.float64)).sum(axis=0) / w.sum()
        got = fit_hi_for_new_landmark(pos, model)
        np.testing.assert_allclose(got, expect, rtol=1e-6)

    def test_empty_model_rejected(self):
        model = LandmarkModel.create(np.zeros((0, 3), np.float32), np.zeros((0, 2), np.float32))
        with pytest.raises(InputError):
            fit_hi_for_new_landmark((0, 0), model)


class TestSomConfig:
    def test_validation(self):
        with pytest.raises(ParameterError):
            SomConfig(sigma=0.0)
        with pytest.raises(ParameterError):
            SomConfig(alpha=1.5)
        with pytest.raises(ParameterError):
            SomConfig(batch_size=0)
