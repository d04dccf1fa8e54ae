import numpy as np
import pytest

import naive
from corpus import random_dataset
from wann.exceptions import CapacityError, ValidationError
from wann.reliability import (
    ReliabilityConfig,
    ReliabilityMap,
    compute_reliability_map,
    filter_unreliable,
)
from wann.store import LabeledDataset


def line_dataset():
    """Six points on a line, two label blocks: 0 0 0 | 1 1 1."""
    emb = np.arange(6, dtype=np.float64).reshape(6, 1)
    return LabeledDataset(emb, np.array([0, 0, 0, 1, 1, 1]), np.arange(6), 2)


class TestReliabilityConfig:
    def test_default_ladder(self):
        cfg = ReliabilityConfig()
        ladder = cfg.ladder()
        assert ladder[0] == 11 and ladder[-1] == 51
        assert all(k % 2 == 1 for k in ladder)
        assert len(ladder) == 21

    def test_even_endpoints_rejected(self):
        with pytest.raises(ValidationError):
            ReliabilityConfig(k_min=10, k_max=51)
        with pytest.raises(ValidationError):
            ReliabilityConfig(k_min=11, k_max=50)

    def test_inverted_rejected(self):
        with pytest.raises(ValidationError):
            ReliabilityConfig(k_min=9, k_max=7)


class TestComputeReliability:
    def test_line_example_frozen(self):
        # worked by hand: only the boundary point x=3 never recovers its
        # label (its single nearest neighbor under id tie-break is x=2 from
        # the other block, and larger rungs stay majority-0), so it falls
        # back to 1/k_max
        rmap = compute_reliability_map(line_dataset(), ReliabilityConfig(1, 5))
        assert rmap.entries == {0: 1.0, 1: 1.0, 2: 1.0, 3: 0.2, 4: 1.0, 5: 1.0}
        assert rmap.neighborhood == {0: 1, 1: 1, 2: 1, 3: 5, 4: 1, 5: 1}

    @pytest.mark.parametrize("grid", [True, False])
    @pytest.mark.parametrize("kmin,kmax", [(1, 5), (3, 7)])
    def test_matches_naive(self, rng, grid, kmin, kmax):
        ds = random_dataset(rng, 45, 3, 3, grid=grid)
        cfg = ReliabilityConfig(kmin, kmax)
        rmap = compute_reliability_map(ds, cfg)
        want_eta, want_k = naive.naive_reliability(ds, cfg.ladder())
        assert rmap.neighborhood == want_k
        for sid, e in want_eta.items():
            assert rmap.entries[sid] == pytest.approx(e, abs=0)

    def test_k_star_on_ladder(self, rng):
        ds = random_dataset(rng, 80, 4, 3)
        cfg = ReliabilityConfig(3, 11)
        rmap = compute_reliability_map(ds, cfg)
        rungs = set(cfg.ladder())
        assert set(rmap.neighborhood.values()) <= rungs

    def test_block_size_is_invisible(self, rng):
        ds = random_dataset(rng, 70, 3, 3)
        cfg = ReliabilityConfig(1, 7)
        a = compute_reliability_map(ds, cfg, block_size=7)
        b = compute_reliability_map(ds, cfg, block_size=4096)
        assert a.entries == b.entries
        assert a.neighborhood == b.neighborhood

    def test_row_order_invariant(self, rng):
        ds = random_dataset(rng, 50, 3, 2, grid=True)
        shuffled = ds.take(rng.permutation(ds.n))
        a = compute_reliability_map(ds, ReliabilityConfig(1, 5))
        b = compute_reliability_map(shuffled, ReliabilityConfig(1, 5))
        assert a.entries == b.entries

    def test_too_few_samples(self, rng):
        ds = random_dataset(rng, 5, 2, 2)
        with pytest.raises(CapacityError):
            compute_reliability_map(ds, ReliabilityConfig(1, 5))

    def test_duplicate_rows_still_vote_for_each_other(self):
        # two coincident points share a location but not an id; each one's
        # held-out neighborhood starts with its twin
        emb = np.array([[0.0], [0.0], [9.0], [9.5], [10.0], [10.5]])
        labels = np.array([0, 0, 1, 1, 1, 1])
        ds = LabeledDataset(emb, labels, np.arange(6), 2)
        rmap = compute_reliability_map(ds, ReliabilityConfig(1, 3))
        assert rmap.neighborhood[0] == 1
        assert rmap.neighborhood[1] == 1

    def test_separated_clusters_all_reliable(self, rng):
        emb = np.concatenate(
            [rng.normal(0, 0.1, size=(30, 2)), rng.normal(100, 0.1, size=(30, 2))]
        )
        labels = np.repeat([0, 1], 30)
        ds = LabeledDataset(emb, labels, np.arange(60), 2)
        rmap = compute_reliability_map(ds, ReliabilityConfig(1, 5))
        assert all(e == 1.0 for e in rmap.entries.values())


class TestReliabilityMap:
    def test_lookup_arrays(self):
        rmap = ReliabilityMap({10: 0.5, 20: 1.0}, {10: 2, 20: 1}, 5)
        np.testing.assert_array_equal(
            rmap.eta_for(np.array([20, 10, 20])), [1.0, 0.5, 1.0]
        )
        np.testing.assert_array_equal(
            rmap.k_star_for(np.array([[10, 20]])), [[2, 1]]
        )

    def test_missing_id_raises(self):
        rmap = ReliabilityMap({1: 1.0}, {1: 1}, 5)
        with pytest.raises(KeyError):
            rmap.eta_for(np.array([2]))

    def test_scaled_touches_only_weights(self):
        rmap = ReliabilityMap({1: 0.2, 2: 1.0}, {1: 5, 2: 1}, 5)
        doubled = rmap.scaled(2.0)
        assert doubled.entries == {1: 0.4, 2: 2.0}
        assert doubled.neighborhood == rmap.neighborhood
        with pytest.raises(ValidationError):
            rmap.scaled(0.0)

    def test_constant_map(self):
        rmap = ReliabilityMap.constant(np.array([3, 1, 2]), 7, 11)
        assert rmap.entries == {1: 1 / 7, 2: 1 / 7, 3: 1 / 7}
        assert set(rmap.neighborhood.values()) == {7}

    def test_key_set_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            ReliabilityMap({1: 1.0}, {2: 1}, 5)

    def test_nonpositive_eta_rejected(self):
        with pytest.raises(ValidationError):
            ReliabilityMap({1: 0.0}, {1: 1}, 5)

    def test_to_rows_sorted_by_id(self):
        rmap = ReliabilityMap({5: 1.0, 2: 0.2}, {5: 1, 2: 5}, 5)
        assert rmap.to_rows() == [(2, 0.2, 5), (5, 1.0, 1)]


class TestFilterUnreliable:
    def test_drops_floor_samples(self):
        ds = line_dataset()
        rmap = compute_reliability_map(ds, ReliabilityConfig(1, 5))
        kept = filter_unreliable(ds, rmap)
        assert sorted(kept.ids.tolist()) == [0, 1, 2, 4, 5]

    def test_all_floor_gives_empty(self):
        ds = line_dataset()
        rmap = ReliabilityMap.constant(ds.ids, 5, 5)
        kept = filter_unreliable(ds, rmap)
        assert kept.n == 0
        assert kept.d == ds.d

    def test_strict_threshold(self):
        # eta exactly at the floor is dropped, the next rung up survives
        ds = line_dataset()
        rmap = ReliabilityMap(
            {i: (0.2 if i < 3 else 1 / 3) for i in range(6)},
            {i: (5 if i < 3 else 3) for i in range(6)},
            5,
        )
        kept = filter_unreliable(ds, rmap)
        assert sorted(kept.ids.tolist()) == [3, 4, 5]
