import gzip

import numpy as np
import pytest

from hyfl.data import (
    compute_stats,
    datasets_equal,
    load_libsvm,
    mnist_label_map,
    normalize_samples,
    parse_libsvm,
    synth_dataset,
    to_libsvm,
)
from hyfl.errors import ConfigError, LabelError, ParseError

from conftest import dataset_from_dense


class TestParseLibsvm:
    def test_basic_line(self):
        ds = parse_libsvm("+1 1:0.5 3:1.0\n")
        assert ds.n_samples == 1
        assert ds.n_features == 3
        assert ds.labels[0] == 1
        idx, vals = ds.samples[0]
        assert idx.tolist() == [0, 2]
        assert vals.tolist() == [0.5, 1.0]

    def test_empty_feature_list(self):
        ds = parse_libsvm("-1\n")
        assert ds.n_samples == 1
        assert ds.samples[0][0].size == 0
        assert ds.labels[0] == -1

    def test_expected_features_override(self):
        ds = parse_libsvm("+1 1:2.0\n", expected_features=10)
        assert ds.n_features == 10

    def test_malformed_token_reports_line(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_libsvm("+1 1:1.0\n+1 2:x\n")

    def test_non_increasing_indices(self):
        with pytest.raises(ParseError, match="strictly increasing"):
            parse_libsvm("+1 3:1.0 3:2.0\n")
        with pytest.raises(ParseError, match="strictly increasing"):
            parse_libsvm("+1 3:1.0 2:2.0\n")

    def test_unmapped_label(self):
        with pytest.raises(LabelError):
            parse_libsvm("3 1:1.0\n")

    def test_label_map_dict_and_callable(self):
        ds = parse_libsvm("0 1:1.0\n7 1:1.0\n", label_map={0.0: -1, 7.0: 1})
        assert ds.labels.tolist() == [-1, 1]
        ds2 = parse_libsvm("0 1:1.0\n7 1:1.0\n", label_map=mnist_label_map)
        assert ds2.labels.tolist() == [-1, 1]

    def test_round_trip(self):
        text = "+1 1:0.5 3:1.25\n-1 2:-3.0\n+1\n"
        ds = parse_libsvm(text)
        again = parse_libsvm(to_libsvm(ds))
        assert datasets_equal(ds, again)

    def test_gzip_load(self, tmp_path):
        path = tmp_path / "d.libsvm.gz"
        with gzip.open(path, "wt") as fh:
            fh.write("+1 2:1.0\n-1 1:0.5\n")
        ds = load_libsvm(path)
        assert ds.n_samples == 2
        assert ds.samples[0][0].tolist() == [1]


class TestNormalize:
    def test_three_four_five(self):
        ds = dataset_from_dense([[3.0, 4.0]], [1])
        out = normalize_samples(ds)
        assert np.allclose(out.samples[0][1], [0.6, 0.8])
        assert np.linalg.norm(out.samples[0][1]) == pytest.approx(1.0, abs=1e-15)

    def test_small_norm_untouched(self):
        ds = dataset_from_dense([[0.3, 0.4]], [1])
        out = normalize_samples(ds)
        assert out.samples[0][1].tolist() == [0.3, 0.4]

    def test_zero_vector_untouched(self):
        ds = dataset_from_dense([[0.0, 0.0]], [1])
        out = normalize_samples(ds)
        assert out.samples[0][0].size == 0

    def test_idempotent_exactly(self):
        rng = np.random.default_rng(0)
        ds = dataset_from_dense(rng.normal(size=(20, 6)) * 3, np.ones(20, dtype=int))
        once = normalize_samples(ds)
        twice = normalize_samples(once)
        assert datasets_equal(once, twice)

    def test_norm_bound_holds(self):
        rng = np.random.default_rng(1)
        ds = dataset_from_dense(rng.normal(size=(50, 8)) * 5, np.ones(50, dtype=int))
        out = normalize_samples(ds)
        for _, vals in out.samples:
            assert np.linalg.norm(vals) <= 1 + 1e-12


class TestSynth:
    def test_deterministic(self):
        a = synth_dataset(7, 100, 10, 0.1, 0.0)
        b = synth_dataset(7, 100, 10, 0.1, 0.0)
        assert datasets_equal(a, b)

    def test_single_sample(self):
        ds = synth_dataset(3, 1, 4, 0.2, 0.0)
        assert ds.n_samples == 1

    def test_bounds_checked(self):
        with pytest.raises(ConfigError):
            synth_dataset(0, 0, 5, 0.1, 0.0)
        with pytest.raises(ConfigError):
            synth_dataset(0, 5, 5, 0.1, 0.6)

    def test_norms_below_one(self):
        ds = synth_dataset(11, 200, 20, 0.1, 0.0)
        for _, vals in ds.samples:
            assert np.linalg.norm(vals) <= 1 + 1e-12

    def test_margin_respected_without_noise(self):
        # Labels must agree with a separating direction at the stated margin.
        ds = synth_dataset(5, 150, 12, 0.15, 0.0)
        x = ds.csr().toarray()
        y = ds.labels
        # Recover the generator's direction via the labeled mean.
        direction = (y[:, None] * x).mean(axis=0)
        direction /= np.linalg.norm(direction)
        margins = y * (x @ direction)
        assert np.all(margins > 0.0)

    def test_noise_flips_labels(self):
        clean = synth_dataset(9, 100, 10, 0.1, 0.0)
        noisy = synth_dataset(9, 100, 10, 0.1, 0.2)
        assert int(np.sum(clean.labels != noisy.labels)) == 20


class TestStats:
    def test_dense_all_nonzero(self):
        ds = dataset_from_dense([[1.0, 2.0], [3.0, 4.0]], [1, -1])
        assert compute_stats(ds).sparsity == 0.0

    def test_all_zero(self):
        ds = dataset_from_dense(np.zeros((3, 4)), [1, 1, -1])
        assert compute_stats(ds).sparsity == 1.0

    def test_half(self):
        ds = dataset_from_dense([[1.0, 0.0], [0.0, 2.0]], [1, -1])
        assert compute_stats(ds).sparsity == pytest.approx(0.5, abs=1e-9)
