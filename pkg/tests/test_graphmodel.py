import numpy as np
import pytest

from embedview.core import Dataset, LandmarkModel, ParameterError, Rng
from embedview.datagen import gaussians
from embedview.graphmodel import (
    EdgeSet,
    KmeansConfig,
    LayoutState,
    build_knn_graph,
    duplicate_landmark,
    kmeans_tick,
    layout_tick,
    net_forces,
    remove_landmark,
)


def edge_stress(lo, edges):
    pos = np.asarray(lo, np.float64)
    i, j = edges.pairs[:, 0], edges.pairs[:, 1]
    d = np.linalg.norm(pos[j] - pos[i], axis=1)
    return float(np.sum((d - edges.rest) ** 2))


class TestKmeansTick:
    def test_full_step_lands_on_sample(self):
        pts = np.arange(20, dtype=np.float32).reshape(5, 4)
        ds = Dataset.from_points(pts)
        model = LandmarkModel.create(
            np.full((2, 4), 100.0, np.float32), np.zeros((2, 2), np.float32)
        )
        rng = Rng(17)
        expect_idx = int(Rng(17).integers(0, 5, size=1)[0])
        out = kmeans_tick(ds, model, KmeansConfig(alpha_km=1.0, batch_size=1), rng)
        winner = np.argmin(np.sum((model.hi - pts[expect_idx]) ** 2, axis=1))
        np.testing.assert_array_equal(out[winner], pts[expect_idx])

    def test_tie_breaks_to_lower_index(self):
        pts = np.zeros((1, 1), np.float32)
        ds = Dataset.from_points(pts)
        model = LandmarkModel.create(
            np.array([[1.0], [-1.0]], np.float32), np.zeros((2, 2), np.float32)
        )
        out = kmeans_tick(ds, model, KmeansConfig(alpha_km=0.5, batch_size=1), Rng(0))
        assert out[0, 0] != model.hi[0, 0]  # landmark 0 won the tie
        assert out[1, 0] == model.hi[1, 0]

    def test_winner_never_moves_away_from_sample(self, small_dataset):
        model = LandmarkModel.create(
            small_dataset.points[:8].copy(), np.zeros((8, 2), np.float32)
        )
        rng = Rng(5)
        probe = Rng(5)
        sample = small_dataset.points[int(probe.integers(0, small_dataset.n, size=1)[0])]
        before = np.sum((model.hi.astype(np.float64) - sample) ** 2, axis=1).min()
        out = kmeans_tick(small_dataset, model, KmeansConfig(alpha_km=0.3, batch_size=1), rng)
        after = np.sum((out.astype(np.float64) - sample) ** 2, axis=1).min()
        assert after <= before + 1e-12

    def test_quantization_error_drops_on_two_clusters(self):
        pts, _ = gaussians(2, 2000, 4, seed=3, sd=0.3)
        ds = Dataset.from_points(pts)
        center = pts.mean(axis=0)
        model = LandmarkModel.create(
            np.stack([center + 0.01, center - 0.01]).astype(np.float32),
            np.zeros((2, 2), np.float32),
        )
        rng = Rng(8)

        def qe(hi):
            d2 = ((ds.points[:, None, :].astype(np.float64) - hi[None]) ** 2).sum(-1)
            return float(d2.min(axis=1).mean())

        before = qe(model.hi.astype(np.float64))
        cfg = KmeansConfig(alpha_km=0.05, batch_size=16)
        for _ in range(500):
            model = model.with_hi(kmeans_tick(ds, model, cfg, rng))
        assert qe(model.hi.astype(np.float64)) < before


class TestBuildKnnGraph:
    def test_collinear_chain(self):
        hi = np.array([[0.0], [1.0], [2.0]], np.float32)
        edges = build_knn_graph(hi, 1)
        assert edges.pairs.tolist() == [[0, 1], [1, 2]]

    def test_no_self_loops_or_duplicates(self, rng_np):
        hi = rng_np.normal(size=(20, 4)).astype(np.float32)
        edges = build_knn_graph(hi, 3)
        assert np.all(edges.pairs[:, 0] < edges.pairs[:, 1])
        seen = {tuple(p) for p in edges.pairs.tolist()}
        assert len(seen) == len(edges)

    def test_matches_symmetrized_oracle(self, rng_np):
        hi = rng_np.normal(size=(32, 6)).astype(np.float32)
        k_g = 3
        edges = build_knn_graph(hi, k_g, scale=2.0)
        expect = set()
        from conftest import py_sqdist_f32

        for i in range(32):
            order = sorted(
                (float(py_sqdist_f32(hi[i], hi[j])), j) for j in range(32) if j != i
            )
            for _, j in order[:k_g]:
                expect.add((min(i, j), max(i, j)))
        assert {tuple(p) for p in edges.pairs.tolist()} == expect
        for (i, j), rest in zip(edges.pairs.tolist(), edges.rest.tolist()):
            assert rest == pytest.approx(
                2.0 * np.sqrt(py_sqdist_f32(hi[i], hi[j])), rel=1e-5
            )

    def test_permutation_invariance(self, rng_np):
        hi = rng_np.normal(size=(16, 3)).astype(np.float32)
        perm = rng_np.permutation(16)
        base = {tuple(p) for p in build_knn_graph(hi, 2).pairs.tolist()}
        permuted = build_knn_graph(hi[perm], 2)
        mapped = {
            (min(perm[i], perm[j]), max(perm[i], perm[j]))
            for i, j in permuted.pairs.tolist()
        }
        assert mapped == base

    def test_k_g_bounds(self, rng_np):
        hi = rng_np.random((5, 2)).astype(np.float32)
        with pytest.raises(ParameterError):
            build_knn_graph(hi, 5)


class TestLayoutTick:
    def test_equilibrium_is_stationary(self):
        lo = np.array([[0.0, 0.0], [1.0, 0.0]], np.float32)
        edges = EdgeSet(pairs=np.array([[0, 1]], np.int32), rest=np.array([1.0], np.float32))
        st = LayoutState.for_count(2, repulsion=0.0)
        new_lo, vel = layout_tick(lo, edges, st)
        np.testing.assert_array_equal(new_lo, lo)
        assert np.all(vel == 0)

    def test_stretched_spring_pulls_together(self):
        lo = np.array([[0.0, 0.0], [3.0, 0.0]], np.float32)
        edges = EdgeSet(pairs=np.array([[0, 1]], np.int32), rest=np.array([1.0], np.float32))
        st = LayoutState.for_count(2, repulsion=0.0)
        new_lo, _ = layout_tick(lo, edges, st)
        assert new_lo[0, 0] > lo[0, 0]
        assert new_lo[1, 0] < lo[1, 0]

    def _random_graph_state(self, seed, g=8, k_g=3):
        gen = np.random.default_rng(seed)
        hi = gen.normal(size=(g, 5)).astype(np.float32)
        raw = build_knn_graph(hi, k_g)
        rest = raw.rest / raw.rest.mean()
        edges = EdgeSet(pairs=raw.pairs, rest=rest.astype(np.float32))
        lo = gen.random((g, 2)).astype(np.float32) * 0.2
        return lo, edges

    def test_stress_drops_over_200_ticks(self):
        lo, edges = self._random_graph_state(4)
        st = LayoutState.for_count(8)
        start = edge_stress(lo, edges)
        for _ in range(200):
            lo, vel = layout_tick(lo, edges, st)
            st = LayoutState(velocities=vel)
        assert edge_stress(lo, edges) < start

    def test_momentum_neutrality(self):
        lo, edges = self._random_graph_state(9)
        st = LayoutState.for_count(8)
        total = net_forces(lo, edges, st).sum(axis=0)
        assert np.abs(total).max() <= 1e-6

    def test_pinned_positions_bit_stable(self):
        lo, edges = self._random_graph_state(2)
        st = LayoutState.for_count(8)
        pinned = [0, 5]
        before = lo.copy()
        for _ in range(25):
            lo, vel = layout_tick(lo, edges, st, pinned_rows=pinned)
            st = LayoutState(velocities=vel)
            assert np.all(vel[pinned] == 0)
        assert np.array_equal(lo[pinned], before[pinned])

    def test_mirror_symmetry_preserved(self):
        # two mirrored pairs plus an edge across the axis
        lo = np.array(
            [[-1.0, 0.0], [1.0, 0.0], [-0.5, 1.0], [0.5, 1.0]], np.float32
        )
        pairs = np.array([[0, 1], [2, 3], [0, 2], [1, 3]], np.int32)
        edges = EdgeSet(pairs=pairs, rest=np.array([1.0, 0.5, 1.0, 1.0], np.float32))
        st = LayoutState.for_count(4)
        mirror = [1, 0, 3, 2]
        for _ in range(50):
            lo, vel = layout_tick(lo, edges, st)
            st = LayoutState(velocities=vel)
            reflected = lo[mirror].copy()
            reflected[:, 0] *= -1
            np.testing.assert_allclose(lo, reflected, atol=1e-6)


class TestDuplicateRemove:
    def _model(self, rng_np, g=6, d=4):
        return LandmarkModel.create(
            rng_np.random((g, d)).astype(np.float32), rng_np.random((g, 2)).astype(np.float32)
        )

    def test_duplicate_grows_by_one_with_fresh_id(self, rng_np):
        m = self._model(rng_np)
        m2 = duplicate_landmark(m, 3, Rng(5))
        assert m2.g == m.g + 1
        assert m2.ids[-1] == m.next_id
        assert len(set(m2.ids)) == m2.g

    def test_duplicate_without_training_keeps_recorded_jitter(self, rng_np):
        m = self._model(rng_np)
        m2 = duplicate_landmark(m, 2, Rng(9))
        lo_offset = np.linalg.norm(m2.lo[-1].astype(np.float64) - m.lo[2])
        assert lo_offset == pytest.approx(1e-2, rel=1e-3)
        ranges = m.hi.max(axis=0).astype(np.float64) - m.hi.min(axis=0)
        hi_offset = np.abs(m2.hi[-1].astype(np.float64) - m.hi[2])
        assert np.all(hi_offset <= 1e-4 * ranges + 1e-12)

    def test_duplicate_then_kmeans_separates_subclusters(self):
        gen = np.random.default_rng(0)
        blob = np.concatenate(
            [
                gen.normal((0, 0), 0.05, size=(500, 2)),
                gen.normal((2, 2), 0.05, size=(500, 2)),
            ]
        ).astype(np.float32)
        ds = Dataset.from_points(blob)
        model = LandmarkModel.create(
            blob.mean(axis=0, keepdims=True).astype(np.float32), np.zeros((1, 2), np.float32)
        )
        rng = Rng(11)
        model = duplicate_landmark(model, 0, rng)
        initial_sep = np.linalg.norm(model.hi[0].astype(np.float64) - model.hi[1])
        cfg = KmeansConfig(alpha_km=0.05, batch_size=16)
        for _ in range(500):
            model = model.with_hi(kmeans_tick(ds, model, cfg, rng))
        final_sep = np.linalg.norm(model.hi[0].astype(np.float64) - model.hi[1])
        assert final_sep > 10 * initial_sep

    def test_unknown_id_rejected(self, rng_np):
        with pytest.raises(ParameterError):
            duplicate_landmark(self._model(rng_np), 42, Rng(1))

    def test_remove_then_duplicate_never_reuses_id(self, rng_np):
        m = self._model(rng_np)
        removed_id = 1
        m = remove_landmark(m, removed_id)
        m = duplicate_landmark(m, 0, Rng(2))
        assert m.g == 6
        assert removed_id not in m.ids

    def test_remove_clears_pin(self, rng_np):
        from dataclasses import replace

        m = replace(self._model(rng_np), pinned=frozenset({2, 4}))
        m2 = remove_landmark(m, 2)
        assert m2.pinned == frozenset({4})

    def test_remove_respects_k_floor(self, rng_np):
        m = self._model(rng_np, g=4)
        with pytest.raises(ParameterError, match="at least"):
            remove_landmark(m, 0, k_floor=4)

    def test_neighbor_lists_never_reference_removed_id(self, rng_np):
        from embedview.knn import knn_base

        m = self._model(rng_np, g=8)
        removed_id = 5
        m = remove_landmark(m, removed_id)
        pts = rng_np.random((50, 4)).astype(np.float32)
        nb = knn_base(pts, m.hi, 4)
        referenced_ids = {m.ids[j] for j in set(nb.indices.ravel().tolist())}
        assert removed_id not in referenced_ids
