import struct

import numpy as np
import pytest

from lrcc import (
    LabelVector,
    MixtureSpec,
    ObservationSet,
    gen_low_rank_mixture,
    gen_mixture_with_counts,
    gen_quarter_spheres,
    gen_unbalanced_gaussian,
    load_csv,
    load_labels,
    load_mts,
    random_low_rank_means,
    save_labels,
    save_mts,
)
from lrcc.dataset import (
    UNBALANCED_SINGULAR_VALUES,
    BadMagicError,
    NonFiniteDataError,
    TruncatedPayloadError,
)
from lrcc.rng import make_rng, normal


class TestObservationSet:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            ObservationSet(np.zeros((0, 2, 2)))

    def test_rejects_non_finite(self):
        data = np.zeros((1, 2, 2))
        data[0, 0, 0] = np.nan
        with pytest.raises(NonFiniteDataError):
            ObservationSet(data)

    def test_transposes_to_wide_rows(self):
        obs = ObservationSet(np.arange(15.0).reshape(1, 3, 5))
        assert (obs.d1, obs.d2) == (5, 3)
        assert obs.transposed

    def test_data_read_only(self):
        obs = ObservationSet(np.zeros((2, 3, 2)))
        with pytest.raises(ValueError):
            obs.data[0, 0, 0] = 1.0


class TestLabelVector:
    def test_counts_classes(self):
        lv = LabelVector(np.array([0, 1, 1, 2]))
        assert lv.k == 3 and lv.n == 4

    def test_rejects_gap(self):
        with pytest.raises(ValueError):
            LabelVector(np.array([0, 2]))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            LabelVector(np.array([-1, 0]))


class TestMtsFormat:
    def test_zero_sample_layout(self, tmp_path):
        # magic + 3 u32 + 4 float64 zeros = 48 bytes
        obs = ObservationSet(np.zeros((1, 2, 2)))
        path = tmp_path / "z.mts"
        save_mts(obs, path)
        blob = path.read_bytes()
        assert blob[:4] == b"MTS1"
        assert struct.unpack("<III", blob[4:16]) == (1, 2, 2)
        assert blob[16:] == b"\x00" * 32

    def test_round_trip_bit_exact(self, tmp_path):
        rng = make_rng(3)
        obs = ObservationSet(normal(rng, (7, 4, 3)))
        path = tmp_path / "r.mts"
        save_mts(obs, path)
        back = load_mts(path)
        assert back.data.tobytes() == obs.data.tobytes()
        assert (back.n, back.d1, back.d2) == (obs.n, obs.d1, obs.d2)

    def test_load_transposes_narrow(self, tmp_path):
        path = tmp_path / "narrow.mts"
        values = np.arange(15.0)
        path.write_bytes(b"MTS1" + struct.pack("<III", 1, 3, 5)
                         + values.astype("<f8").tobytes())
        obs = load_mts(path)
        assert (obs.d1, obs.d2) == (5, 3)
        assert obs.transposed
        np.testing.assert_array_equal(obs.data[0], values.reshape(3, 5).T)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.mts"
        path.write_bytes(b"NOPE" + b"\x00" * 44)
        with pytest.raises(BadMagicError):
            load_mts(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "trunc.mts"
        path.write_bytes(b"MTS1" + struct.pack("<III", 2, 2, 2) + b"\x00" * 16)
        with pytest.raises(TruncatedPayloadError, match="truncated payload"):
            load_mts(path)

    def test_non_finite(self, tmp_path):
        path = tmp_path / "nan.mts"
        payload = np.array([np.nan, 0, 0, 0]).astype("<f8").tobytes()
        path.write_bytes(b"MTS1" + struct.pack("<III", 1, 2, 2) + payload)
        with pytest.raises(NonFiniteDataError):
            load_mts(path)


class TestCsv:
    def test_identity_line(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text("1,0,0,1\n")
        obs = load_csv(path, 2, 2)
        np.testing.assert_array_equal(obs.data[0], np.eye(2))

    def test_wrong_field_count_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,0,0,1\n1,2,3\n")
        with pytest.raises(ValueError, match="line 2"):
            load_csv(path, 2, 2)

    def test_unparsable_number(self, tmp_path):
        path = tmp_path / "nan.csv"
        path.write_text("1,x,0,1\n")
        with pytest.raises(ValueError, match="line 1"):
            load_csv(path, 2, 2)

    def test_line_count(self, tmp_path):
        rng = make_rng(5)
        rows = normal(rng, (12, 6))
        path = tmp_path / "digits.csv"
        path.write_text("\n".join(",".join(map(str, r)) for r in rows))
        obs = load_csv(path, 2, 3)
        assert obs.n == 12


def test_labels_round_trip(tmp_path):
    lv = LabelVector(np.array([0, 0, 1, 2, 1]))
    path = tmp_path / "labels.txt"
    save_labels(lv, path)
    back = load_labels(path)
    np.testing.assert_array_equal(back.labels, lv.labels)


class TestQuarterSpheres:
    def test_polar_coordinates(self):
        # (theta, v) = (0, pi/2) maps to singular values (1, 0, 0)
        theta, v = 0.0, np.pi / 2
        s = np.array([np.sin(v) * np.cos(theta), np.sin(v) * np.sin(theta), np.cos(v)])
        np.testing.assert_allclose(s, [1.0, 0.0, 0.0], atol=1e-15)

    def test_paper_default_shapes(self):
        obs, labels = gen_quarter_spheres(100, 20, 10, 0.1, seed=1)
        assert obs.data.shape == (200, 20, 10)
        assert labels.k == 2
        assert np.bincount(labels.labels).tolist() == [100, 100]

    def test_deterministic(self):
        a, _ = gen_quarter_spheres(10, 6, 4, 0.1, seed=9)
        b, _ = gen_quarter_spheres(10, 6, 4, 0.1, seed=9)
        assert a.data.tobytes() == b.data.tobytes()

    def test_noise_free_rank_three(self):
        obs, _ = gen_quarter_spheres(5, 8, 5, 0.0, seed=2)
        svals = np.linalg.svd(obs.data, compute_uv=False)
        assert np.all(svals[:, 3:] < 1e-12)

    def test_dimension_error(self):
        with pytest.raises(ValueError):
            gen_quarter_spheres(5, 2, 4)

    def test_share_factors_flag(self):
        shared, _ = gen_quarter_spheres(4, 6, 4, 0.0, seed=3, share_factors=True)
        indep, _ = gen_quarter_spheres(4, 6, 4, 0.0, seed=3, share_factors=False)
        assert shared.data.tobytes() != indep.data.tobytes()


class TestUnbalancedGaussian:
    def test_singular_value_table_column_one(self):
        np.testing.assert_allclose(UNBALANCED_SINGULAR_VALUES[:, 0], [0.02, 0.48])

    def test_noise_free_equals_centroids(self):
        obs, labels = gen_unbalanced_gaussian([2] * 8, 6, 4, noise=0.0, seed=4)
        first = {alpha: np.nonzero(labels.labels == alpha)[0][0] for alpha in range(8)}
        for i in range(obs.n):
            np.testing.assert_array_equal(obs.data[i], obs.data[first[labels.labels[i]]])
        svals = np.linalg.svd(obs.data[first[0]], compute_uv=False)
        np.testing.assert_allclose(svals[:2], [0.48, 0.02], atol=1e-12)

    def test_paper_sizes_total(self):
        obs, labels = gen_unbalanced_gaussian(
            (2000, 2000, 2000, 100, 100, 100, 100, 100), 20, 10, 0.1, seed=0)
        assert obs.n == 6500
        assert labels.k == 8

    def test_needs_eight_sizes(self):
        with pytest.raises(ValueError):
            gen_unbalanced_gaussian([5, 5], 6, 4)


class TestLowRankMixture:
    def make_spec(self, noise=0.1):
        means = random_low_rank_means(2, 6, 4, rank=2, seed=11)
        return MixtureSpec(means, np.array([0.5, 0.5]), noise, np.array([2, 2]))

    def test_zero_noise_single_component(self):
        means = random_low_rank_means(1, 6, 4, rank=2, seed=12)
        spec = MixtureSpec(means, np.array([1.0]), 0.0, np.array([2]))
        obs, labels = gen_low_rank_mixture(spec, 10, seed=5)
        for i in range(10):
            np.testing.assert_array_equal(obs.data[i], means[0])
        assert labels.k == 1

    def test_degenerate_weight(self):
        means = random_low_rank_means(2, 6, 4, rank=1, seed=13)
        spec = MixtureSpec(means, np.array([1.0, 0.0]), 0.0, np.array([1, 1]))
        _, labels = gen_low_rank_mixture(spec, 10, seed=6)
        assert np.all(labels.labels == 0)

    def test_binomial_frequencies(self):
        spec = self.make_spec()
        n = 10000
        _, labels = gen_low_rank_mixture(spec, n, seed=7)
        for alpha, pi in enumerate(spec.weights):
            freq = np.mean(labels.labels == alpha)
            sd = np.sqrt(pi * (1 - pi) / n)
            assert abs(freq - pi) <= 3 * sd

    def test_zero_noise_preserves_rank(self):
        spec = self.make_spec(noise=0.0)
        obs, labels = gen_low_rank_mixture(spec, 20, seed=8)
        svals = np.linalg.svd(obs.data, compute_uv=False)
        ranks = (svals > 1e-10 * svals[:, :1]).sum(axis=1)
        expected = spec.ranks[labels.labels]
        np.testing.assert_array_equal(ranks, expected)

    def test_mixture_spec_validates_rank(self):
        means = random_low_rank_means(1, 6, 4, rank=3, seed=14)
        with pytest.raises(ValueError, match="target rank"):
            MixtureSpec(means, np.array([1.0]), 0.1, np.array([1]))

    def test_mixture_spec_validates_weights(self):
        means = random_low_rank_means(2, 6, 4, rank=1, seed=15)
        with pytest.raises(ValueError, match="sum to 1"):
            MixtureSpec(means, np.array([0.6, 0.5]), 0.1, np.array([1, 1]))

    def test_fixed_counts(self):
        spec = self.make_spec()
        obs, labels = gen_mixture_with_counts(spec, [3, 5], seed=9)
        assert obs.n == 8
        assert np.bincount(labels.labels).tolist() == [3, 5]
