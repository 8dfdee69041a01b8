import gzip
import json
import struct

import numpy as np
import pytest

from focal_entropy.errors import DomainError
from focal_entropy.experiments import (
    BinnedDataset,
    IdxFormatError,
    SyntheticSpec,
    TrainConfig,
    compare_posteriors,
    focal_loss_and_grad,
    ingest_mnist,
    nearest_rank_cuts,
    posterior_from_csv,
    posterior_to_csv,
    quantize,
    read_idx,
    sample_synthetic,
    synthetic_posterior,
    theory_table,
    theory_target,
    train_classifier,
    write_idx,
)
from focal_entropy.experiments.mnist import IMAGES_MAGIC, LABELS_MAGIC
from focal_entropy.experiments.network import MLP, _log_softmax
from focal_entropy.pmf import Pmf
from focal_entropy.regime_analysis import power_law_q

SPEC = SyntheticSpec()


def small_run(gamma=1.0, seed=0, epochs=3, n=2000):
    data = sample_synthetic(SyntheticSpec(sample_count=n, seed=seed))
    return data, train_classifier(data, TrainConfig(gamma=gamma, seed=seed, epochs=epochs))


class TestSynthetic:
    def test_bayes_first_cell(self):
        post = synthetic_posterior(SPEC)
        num = 0.95 * 0.65 * 0.50
        ref = num / (num + 0.05 * 0.10 * 0.20)
        assert post[0, 0] == pytest.approx(ref, rel=1e-14)
        assert post[0, 0] == pytest.approx(0.996772, abs=1e-6)

    def test_rows_sum_to_one(self):
        np.testing.assert_allclose(synthetic_posterior(SPEC).sum(axis=1), 1.0, rtol=1e-15)

    def test_degenerate_prior(self):
        post = synthetic_posterior(SyntheticSpec(class_prior=(1.0, 0.0)))
        np.testing.assert_array_equal(post[:, 0], 1.0)

    def test_rejects_bad_tables(self):
        with pytest.raises(DomainError):
            SyntheticSpec(class_prior=(0.5, 0.6))
        with pytest.raises(DomainError):
            SyntheticSpec(f1_given_c=((0.5, 0.5, 0.0, 0.1), (0.25,) * 4))

    def test_sampling_concentration(self):
        data = sample_synthetic(SPEC)
        assert len(data) == 10000
        emp, exact = data.empirical_posterior(), synthetic_posterior(SPEC)
        big = data.counts >= 200
        assert big.sum() >= 8
        assert np.max(np.abs(emp[big] - exact[big])) <= 0.03
        assert data.class_counts[0] / len(data) == pytest.approx(0.95, abs=0.01)
        assert data.counts.sum() == len(data)

    def test_empty_sample(self):
        data = sample_synthetic(SyntheticSpec(sample_count=0))
        assert len(data) == 0
        np.testing.assert_array_equal(data.counts, 0)
        assert np.all(np.isnan(data.empirical_posterior()))

    def test_sampling_is_seeded(self):
        a, b = sample_synthetic(SPEC), sample_synthetic(SPEC)
        np.testing.assert_array_equal(a.cells, b.cells)
        np.testing.assert_array_equal(a.c, b.c)


class TestTheory:
    def test_first_cell(self):
        row = synthetic_posterior(SPEC)[0]
        t = theory_target(1.0, row)
        assert t.probs[0] == pytest.approx(0.958639, abs=1e-6)

    def test_uniform_and_gamma_zero(self):
        np.testing.assert_allclose(theory_target(2.0, [0.5, 0.5]).probs, 0.5, atol=1e-15)
        row = Pmf([0.8, 0.2])
        assert theory_target(0.0, row) == row

    def test_envelope_every_cell(self):
        post = synthetic_posterior(SPEC)
        theory = theory_table(1.0, post)
        for row, t in zip(post, theory):
            k = int(np.argmin(row))
            p = row[k]
            assert power_law_q(1.0, p) <= t[k] + 1e-12 <= power_law_q(2.0, p) + 2e-12

    def test_nan_rows_stay_nan(self):
        table = synthetic_posterior(SPEC)
        table[3] = np.nan
        out = theory_table(1.0, table)
        assert np.all(np.isnan(out[3])) and np.all(np.isfinite(out[4]))


class TestGradient:
    def test_finite_difference(self):
        rng = np.random.default_rng(1)
        z = rng.normal(size=(5, 2)) * 2
        y = np.array([0, 1, 1, 0, 1])
        for g in (0.0, 0.5, 1.0, 3.0):
            _, grad = focal_loss_and_grad(z, y, g)
            fd = np.zeros_like(z)
            h = 1e-6
            for idx in np.ndindex(z.shape):
                zp, zm = z.copy(), z.copy()
                zp[idx] += h
                zm[idx] -= h
                fd[idx] = (focal_loss_and_grad(zp, y, g)[0] - focal_loss_and_grad(zm, y, g)[0]) / (2 * h)
            np.testing.assert_allclose(grad, fd, atol=1e-4)

    def test_gamma_zero_is_cross_entropy(self):
        rng = np.random.default_rng(2)
        z = rng.normal(size=(50, 2)) * 3
        y = rng.integers(0, 2, 50)
        loss, grad = focal_loss_and_grad(z, y, 0.0)
        p = np.exp(_log_softmax(z))
        onehot = np.eye(2)[y]
        np.testing.assert_allclose(grad, (p - onehot) / 50, atol=1e-12)
        assert loss == pytest.approx(-np.mean(np.log(p[np.arange(50), y])), rel=1e-12)

    def test_backprop(self):
        rng = np.random.default_rng(3)
        net = MLP(8, 6, 2, rng)
        x = rng.normal(size=(4, 8))
        y = np.array([0, 1, 0, 1])
        logits, cache = net.forward(x)
        grads = net.backward(focal_loss_and_grad(logits, y, 1.0)[1], cache)
        h = 1e-6
        for name in ("W1", "b2"):
            arr = net.params[name]
            flat = arr.reshape(-1)
            for i in range(min(flat.size, 10)):
                old = flat[i]
                flat[i] = old + h
                up = focal_loss_and_grad(net.forward(x)[0], y, 1.0)[0]
                flat[i] = old - h
                dn = focal_loss_and_grad(net.forward(x)[0], y, 1.0)[0]
                flat[i] = old
                assert grads[name].reshape(-1)[i] == pytest.approx((up - dn) / (2 * h), abs=1e-6)


class TestTraining:
    def test_reproducible(self):
        _, a = small_run()
        _, b = small_run()
        np.testing.assert_array_equal(a.posterior, b.posterior)
        assert a.loss_trajectory == b.loss_trajectory

    def test_rows_valid_every_epoch(self):
        _, run = small_run(epochs=4)
        assert len(run.posterior_history) == 4
        for table in run.posterior_history:
            assert np.all(table >= 0)
            np.testing.assert_allclose(table.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(np.isfinite(run.loss_trajectory))

    def test_run_json_echoes_config(self):
        _, run = small_run(epochs=1, n=200)
        d = json.loads(run.to_json())
        assert d["config"]["hidden_width"] == 64 and d["config"]["batch_size"] == 64
        assert len(d["posterior"]) == 16

    def test_empty_dataset(self):
        with pytest.raises(DomainError):
            train_classifier(sample_synthetic(SyntheticSpec(sample_count=0)))

    @pytest.mark.slow
    def test_full_run_tracks_theory(self):
        data = sample_synthetic(SPEC)
        run = train_classifier(data, TrainConfig(gamma=1.0, seed=0))
        theory = theory_table(1.0, data.empirical_posterior())
        assert compare_posteriors(run.posterior, theory, data.counts).max_abs_gap <= 0.05


class TestPosteriorTables:
    def test_identical_tables(self):
        t = synthetic_posterior(SPEC)
        cmp = compare_posteriors(t, t, np.full(16, 500))
        assert cmp.max_abs_gap == 0.0

    def test_threshold_excludes_small_bins(self):
        a = synthetic_posterior(SPEC)
        b = a.copy()
        b[5] = [0.5, 0.5]
        counts = np.full(16, 500)
        counts[5] = 99
        cmp = compare_posteriors(a, b, counts)
        assert cmp.max_abs_gap == 0.0 and np.isnan(cmp.per_bin[5])
        counts[5] = 100
        assert compare_posteriors(a, b, counts).max_abs_gap > 0.4

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            compare_posteriors(np.zeros((16, 2)), np.zeros((15, 2)), np.zeros(16))

    def test_csv_round_trip(self):
        data = sample_synthetic(SyntheticSpec(sample_count=300))
        text = posterior_to_csv(data.empirical_posterior(), data.counts)
        assert text.splitlines()[0] == "f1_bin,f2_bin,count,p_c0,p_c1"
        table, counts = posterior_from_csv(text)
        np.testing.assert_array_equal(counts, data.counts)
        np.testing.assert_array_equal(table, data.empirical_posterior())

    def test_dataset_validation(self):
        with pytest.raises(ValueError):
            BinnedDataset([0, 4], [0, 0], [0, 1])


class TestMnist:
    def fixture(self, tmp_path, images, labels):
        ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
        write_idx(ip, images)
        write_idx(lp, labels)
        return ip, lp

    def test_header_magic(self, tmp_path):
        ip, lp = self.fixture(tmp_path, np.zeros((3, 28, 28)), np.zeros(3))
        assert struct.unpack(">I", ip.read_bytes()[:4])[0] == IMAGES_MAGIC
        assert struct.unpack(">I", lp.read_bytes()[:4])[0] == LABELS_MAGIC

    def test_bad_magic(self, tmp_path):
        ip, lp = self.fixture(tmp_path, np.zeros((3, 28, 28)), np.zeros(3))
        with pytest.raises(IdxFormatError):
            read_idx(lp, IMAGES_MAGIC)

    def test_truncated(self, tmp_path):
        ip, lp = self.fixture(tmp_path, np.zeros((3, 28, 28)), np.zeros(3))
        ip.write_bytes(ip.read_bytes()[:-10])
        with pytest.raises(IdxFormatError):
            ingest_mnist(ip, lp)

    def test_wrong_image_size(self, tmp_path):
        ip, lp = self.fixture(tmp_path, np.zeros((2, 28, 27)), np.zeros(2))
        with pytest.raises(IdxFormatError):
            read_idx(ip, IMAGES_MAGIC)

    def test_count_mismatch(self, tmp_path):
        ip, lp = self.fixture(tmp_path, np.zeros((3, 28, 28)), np.zeros(2))
        with pytest.raises(IdxFormatError):
            ingest_mnist(ip, lp)

    def test_all_zero_images(self, tmp_path):
        ip, lp = self.fixture(tmp_path, np.zeros((20, 28, 28)), np.arange(20) % 10)
        data = ingest_mnist(ip, lp)
        np.testing.assert_array_equal(data.f1, 0)
        np.testing.assert_array_equal(data.f2, 0)
        assert data.class_counts.tolist() == [18, 2]

    def test_quantile_bins(self, tmp_path):
        rng = np.random.default_rng(4)
        images = rng.integers(0, 256, (2000, 28, 28))
        ip, lp = self.fixture(tmp_path, images, rng.integers(0, 10, 2000))
        data = ingest_mnist(ip, lp)
        for f in (data.f1, data.f2):
            shares = np.bincount(f, minlength=4) / f.size
            np.testing.assert_allclose(shares, 0.25, atol=0.01)

    def test_gzip_input(self, tmp_path):
        ip, lp = self.fixture(tmp_path, np.full((2, 28, 28), 7), np.array([1, 3]))
        gz = tmp_path / "img.idx.gz"
        gz.write_bytes(gzip.compress(ip.read_bytes()))
        np.testing.assert_array_equal(read_idx(gz, IMAGES_MAGIC), read_idx(ip, IMAGES_MAGIC))

    def test_nearest_rank_ties_go_low(self):
        v = np.array([1.0, 2.0, 2.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        cuts = nearest_rank_cuts(v)
        np.testing.assert_array_equal(cuts, [2.0, 2.0, 4.0])
        np.testing.assert_array_equal(quantize(v, cuts), [0, 0, 0, 0, 2, 2, 3, 3])
