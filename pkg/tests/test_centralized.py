import numpy as np
import pytest

from hyfl.centralized import CentralRun, run_sdca_central, tune_lambda
from hyfl.data import synth_dataset
from hyfl.errors import ConfigError
from hyfl.metrics import accuracy
from hyfl.objective import Regularization

from conftest import dataset_from_dense


class TestSdcaCentral:
    def test_single_sample_optimum_in_three_steps(self, tiny_dataset):
        run = run_sdca_central(tiny_dataset, Regularization(1.0, 1), iterations=3)
        assert run.alpha_star[0] == pytest.approx(1.0, abs=1e-12)
        assert run.w_star[0] == pytest.approx(1.0, abs=1e-12)
        assert run.p_star == pytest.approx(0.5, abs=1e-12)
        assert run.d_star == pytest.approx(0.5, abs=1e-12)

    def test_dual_never_decreases(self):
        ds = synth_dataset(1, 25, 6, 0.1, 0.2)
        _, trace = run_sdca_central(
            ds, Regularization(0.05, 25), iterations=150, seed=4, record_dual=True
        )
        assert np.all(np.diff(trace) >= -1e-12)

    def test_bit_identical_given_seed(self):
        ds = synth_dataset(2, 30, 5, 0.1, 0.0)
        r1 = run_sdca_central(ds, Regularization(0.1, 30), 500, seed=7)
        r2 = run_sdca_central(ds, Regularization(0.1, 30), 500, seed=7)
        assert np.array_equal(r1.w_star, r2.w_star)
        assert r1.p_star == r2.p_star

    def test_separable_data_reaches_full_accuracy(self):
        # Also pins down the synthetic generator's separability contract.
        ds = synth_dataset(6, 80, 10, 0.15, 0.0)
        run = run_sdca_central(ds, Regularization(1e-3, 80), 80 * 200, gap_target=1e-8)
        assert accuracy(run.w_star, ds) == 1.0

    def test_gap_certificate(self):
        ds = synth_dataset(3, 40, 8, 0.1, 0.1)
        run = run_sdca_central(ds, Regularization(0.05, 40), 40 * 500, gap_target=1e-8)
        assert 0.0 <= run.gap <= 1e-8
        assert run.p_star - run.d_star == pytest.approx(run.gap, abs=1e-15)

    def test_zero_sample_row_is_handled(self):
        ds = dataset_from_dense([[0.0, 0.0], [1.0, 0.0]], [1, -1])
        run = run_sdca_central(ds, Regularization(0.5, 2), 50)
        assert np.isfinite(run.p_star)
        assert ds.labels[0] * run.alpha_star[0] == pytest.approx(1.0)

    def test_json_round_trip(self, tiny_dataset):
        run = run_sdca_central(tiny_dataset, Regularization(1.0, 1), 3)
        again = CentralRun.from_json(run.to_json())
        assert again.p_star == run.p_star
        assert np.array_equal(again.w_star, run.w_star)


class TestTuneLambda:
    def test_singleton_returned(self, tiny_dataset):
        assert tune_lambda(tiny_dataset, [0.001]) == 0.001

    def test_empty_rejected(self, tiny_dataset):
        with pytest.raises(ConfigError):
            tune_lambda(tiny_dataset, [])

    def test_small_lambda_beats_crushing_regularization(self):
        ds = synth_dataset(8, 120, 8, 0.15, 0.0)
        best = tune_lambda(ds, [1e3, 0.01], split_seed=1)
        assert best == 0.01

    def test_tie_takes_smaller(self):
        # Both candidates separate the data perfectly, so accuracy ties.
        ds = synth_dataset(9, 100, 6, 0.2, 0.0)
        best = tune_lambda(ds, [0.02, 0.01], split_seed=2)
        assert best == 0.01
