import numpy as np
import pytest

from hyfl.data import synth_dataset
from hyfl.errors import ConfigError
from hyfl.partition import (
    client_matrices,
    partition_horizontal,
    partition_nonzero_split,
    partition_quadrant,
    partition_summary,
    partition_vertical,
    split_evenly,
    validate_partition,
)

from conftest import dataset_from_dense


def image_dataset(n, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, size=(n, 784)) * (rng.uniform(size=(n, 784)) < 0.3)
    y = rng.choice((-1, 1), size=n)
    return dataset_from_dense(x, y, name="img")


class TestSplitEvenly:
    def test_sizes_differ_by_at_most_one(self):
        blocks = split_evenly(10, 3)
        assert [b.size for b in blocks] == [4, 3, 3]
        assert np.concatenate(blocks).tolist() == list(range(10))


class TestQuadrant:
    def test_single_sample_group(self):
        ds = image_dataset(8)
        aug, part = partition_quadrant(ds, 4, bias_value=10.0)
        assert part.sample_groups == 1
        for k in range(4):
            assert part.samples_of_client(k).tolist() == list(range(8))
        validate_partition(part, aug)

    def test_first_quarter_holds_top_left(self):
        ds = image_dataset(4)
        _aug, part = partition_quadrant(ds, 8)
        expected = sorted(r * 28 + c for r in range(14) for c in range(14))
        assert part.features_of_client(0).tolist() == expected
        assert part.features_of_client(1).tolist() == expected  # second sample group

    def test_bias_only_on_fourth_quadrant(self):
        ds = image_dataset(4)
        aug, part = partition_quadrant(ds, 8, bias_value=10.0)
        assert aug.n_features == 785
        for k in range(part.n_clients):
            has_bias = 784 in part.features_of_client(k)
            assert has_bias == (k >= 6)  # clients 6,7 are the fourth quarter
        for idx, vals in aug.samples:
            assert idx[-1] == 784 and vals[-1] == 10.0

    def test_preconditions(self):
        ds = image_dataset(4)
        with pytest.raises(ConfigError):
            partition_quadrant(ds, 6)
        with pytest.raises(ConfigError):
            partition_quadrant(dataset_from_dense(np.ones((2, 10)), [1, -1]), 4)

    def test_sample_share_size(self):
        ds = image_dataset(10)
        _aug, part = partition_quadrant(ds, 8)
        sizes = sorted(part.samples_of_client(k).size for k in range(8))
        assert sizes == [5, 5, 5, 5, 5, 5, 5, 5]


class TestNonzeroSplit:
    def test_deal_counts_even(self):
        ds = dataset_from_dense([[1, 2, 3, 4, 5]], [1])
        part = partition_nonzero_split(ds, 1, 2, seed=0)
        counts = sorted(part.held_features(k, 0).size for k in range(2))
        assert counts == [2, 3]

    def test_grid_shape(self):
        ds = dataset_from_dense(np.arange(1, 9 * 4 + 1).reshape(9, 4), np.ones(9, int))
        part = partition_nonzero_split(ds, 3, 3, seed=1)
        assert part.n_clients == 9
        for k in range(9):
            assert part.samples_of_client(k).size == 3

    def test_union_covers_all_nonzeros(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(12, 9)) * (rng.uniform(size=(12, 9)) < 0.6)
        ds = dataset_from_dense(x, np.ones(12, int))
        part = partition_nonzero_split(ds, 4, 3, seed=3)
        validate_partition(part, ds)
        for i in range(12):
            got = np.sort(np.concatenate([part.held_features(k, i) for k in part.clients_of_sample(i)]))
            assert got.tolist() == ds.samples[i][0].tolist()

    def test_same_seed_identical(self):
        ds = dataset_from_dense(np.random.default_rng(5).normal(size=(6, 7)), np.ones(6, int))
        p1 = partition_nonzero_split(ds, 2, 3, seed=9)
        p2 = partition_nonzero_split(ds, 2, 3, seed=9)
        for k in range(p1.n_clients):
            for i in p1.samples_of_client(k):
                assert np.array_equal(p1.held_features(k, int(i)), p2.held_features(k, int(i)))

    def test_k_larger_than_n(self):
        ds = dataset_from_dense(np.ones((2, 2)), [1, -1])
        with pytest.raises(ConfigError):
            partition_nonzero_split(ds, 3, 1, seed=0)


class TestHorizontalVertical:
    def test_horizontal_blocks(self):
        ds = dataset_from_dense(np.ones((4, 3)), [1, 1, -1, -1])
        part = partition_horizontal(ds, 2)
        assert part.samples_of_client(0).tolist() == [0, 1]
        assert part.samples_of_client(1).tolist() == [2, 3]
        assert part.features_of_client(0).tolist() == [0, 1, 2]
        validate_partition(part, ds)

    def test_horizontal_one_sample_per_client(self):
        ds = dataset_from_dense(np.ones((4, 3)), [1, 1, -1, -1])
        part = partition_horizontal(ds, 4)
        assert all(part.samples_of_client(k).size == 1 for k in range(4))

    def test_vertical_identity_order(self):
        ds = dataset_from_dense(np.ones((3, 4)), [1, -1, 1])
        part = partition_vertical(ds, 2, seed=None)
        assert part.features_of_client(0).tolist() == [0, 1]
        assert part.features_of_client(1).tolist() == [2, 3]
        assert all(part.samples_of_client(k).size == 3 for k in range(2))
        validate_partition(part, ds)

    def test_vertical_seeded_shuffle_deterministic(self):
        ds = dataset_from_dense(np.ones((3, 10)), [1, -1, 1])
        p1 = partition_vertical(ds, 3, seed=4)
        p2 = partition_vertical(ds, 3, seed=4)
        for k in range(3):
            assert np.array_equal(p1.features_of_client(k), p2.features_of_client(k))
        validate_partition(p1, ds)

    def test_bounds(self):
        ds = dataset_from_dense(np.ones((3, 4)), [1, -1, 1])
        with pytest.raises(ConfigError):
            partition_horizontal(ds, 5)
        with pytest.raises(ConfigError):
            partition_vertical(ds, 9)


class TestDecomposition:
    def test_partial_inner_products_sum_to_full(self):
        # Partition-respecting decomposition of x_i . w across holders.
        rng = np.random.default_rng(6)
        ds = synth_dataset(17, 40, 12, 0.1, 0.1)
        schemes = [
            partition_nonzero_split(ds, 4, 3, seed=0),
            partition_horizontal(ds, 5),
            partition_vertical(ds, 4, seed=1),
        ]
        for part in schemes:
            mats = client_matrices(ds, part)
            w = rng.normal(size=ds.n_features)
            full = ds.csr() @ w
            got = np.zeros(ds.n_samples)
            for k in range(part.n_clients):
                np.add.at(got, part.samples_of_client(k), mats[k] @ w)
            err = np.abs(got - full) / (1.0 + np.abs(full))
            assert np.max(err) < 1e-9

    def test_holders_match_group_layout(self):
        ds = synth_dataset(18, 9, 6, 0.1, 0.0)
        part = partition_nonzero_split(ds, 3, 3, seed=0)
        assert part.clients_of_sample(0).tolist() == [0, 1, 2]
        assert part.clients_of_sample(8).tolist() == [6, 7, 8]
        assert part.n_holders().tolist() == [3] * 9


class TestSummary:
    def test_summary_fields(self):
        ds = dataset_from_dense(np.eye(4), [1, 1, -1, -1])
        part = partition_horizontal(ds, 2)
        s = partition_summary(part, ds)
        assert s["scheme"] == "horizontal"
        assert s["clients"][0] == {"client": 0, "n_samples": 2, "n_features": 4, "nnz": 2}
