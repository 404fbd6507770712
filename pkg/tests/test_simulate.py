import math

import numpy as np
import pytest
from scipy.stats import kurtosis

from gbcregion.schemes import (UncodedParams, hybrid_distortions, hybrid_from_uncoded,
                               make_hybrid_params, optimal_hybrid_params, uncoded_distortions)
from gbcregion.simulate import (CHUNK, DistributionFamily, StreamingMoments,
                                empirical_distortions, knn_conditional_entropy, knn_entropy,
                                sample_batch, worst_case_check)


@pytest.fixture
def hp_win(window_inst):
    return optimal_hybrid_params(window_inst, 0.5)


def source_noise(batch):
    return np.vstack([batch.S1, batch.S2, batch.Z1, batch.Z2])


class TestSampling:
    @pytest.mark.parametrize("family", list(DistributionFamily))
    def test_covariance(self, window_inst, hp_win, family):
        n = 10 ** 6
        b = sample_batch(window_inst, hp_win, family, n, seed=1)
        cov = np.cov(source_noise(b))
        target = np.zeros((4, 4))
        target[:2, :2] = window_inst.source_cov
        target[2, 2], target[3, 3] = window_inst.N1, window_inst.N2
        assert np.max(np.abs(cov - target)) <= 4 * window_inst.sigma2 / math.sqrt(n)
        assert np.var(b.U) == pytest.approx(hp_win.Q, rel=4 * math.sqrt(2 / n))

    @pytest.mark.parametrize("family, kurt", [("gaussian", 3.0), ("uniform", 1.8),
                                              ("laplace", 6.0)])
    def test_marginal_shape(self, window_inst, hp_win, family, kurt):
        b = sample_batch(window_inst, hp_win, family, 10 ** 6, seed=2)
        assert kurtosis(b.Z1, fisher=False) == pytest.approx(kurt, rel=0.03)
        # the quantization noise is Gaussian in every family
        assert kurtosis(b.U, fisher=False) == pytest.approx(3.0, rel=0.03)

    def test_uniform_is_bounded(self, window_inst, hp_win):
        b = sample_batch(window_inst, hp_win, "uniform", 10 ** 5, seed=2)
        assert np.max(np.abs(b.Z2)) <= math.sqrt(3 * window_inst.N2)

    def test_same_seed_same_batch(self, window_inst, hp_win):
        a = sample_batch(window_inst, hp_win, "laplace", 3 * CHUNK + 17, seed=5)
        b = sample_batch(window_inst, hp_win, "laplace", 3 * CHUNK + 17, seed=5)
        for k in ("S1", "S2", "U", "Z1", "Z2"):
            assert np.array_equal(getattr(a, k), getattr(b, k))

    def test_thread_count_invariant(self, window_inst, hp_win):
        a = sample_batch(window_inst, hp_win, "gaussian", 5 * CHUNK, seed=9, threads=1)
        b = sample_batch(window_inst, hp_win, "gaussian", 5 * CHUNK, seed=9, threads=4)
        assert np.array_equal(a.S1, b.S1) and np.array_equal(a.U, b.U)
        da = empirical_distortions(window_inst, hp_win, a, threads=1)
        db = empirical_distortions(window_inst, hp_win, b, threads=4)
        assert da.d1 == db.d1 and da.d2 == db.d2

    def test_different_seeds_differ(self, window_inst, hp_win):
        a = sample_batch(window_inst, hp_win, "gaussian", 100, seed=1)
        b = sample_batch(window_inst, hp_win, "gaussian", 100, seed=2)
        assert not np.array_equal(a.S1, b.S1)

    def test_families_share_uniforms(self, window_inst, hp_win):
        g = sample_batch(window_inst, hp_win, "gaussian", 1000, seed=4)
        u = sample_batch(window_inst, hp_win, "uniform", 1000, seed=4)
        assert np.array_equal(g.U, u.U)
        assert np.corrcoef(g.Z1, u.Z1)[0, 1] > 0.95

    def test_bad_n(self, window_inst, hp_win):
        with pytest.raises(ValueError):
            sample_batch(window_inst, hp_win, "gaussian", 0, seed=0)

    def test_pure_analog_has_no_u(self, window_inst):
        hp = hybrid_from_uncoded(window_inst, UncodedParams(0.5))
        b = sample_batch(window_inst, hp, "gaussian", 100, seed=0)
        assert not np.any(b.U)


class TestStreamingMoments:
    def test_merge_matches_direct(self, rng):
        data = rng.normal(size=(3, 1000)) * [[1], [5], [0.1]] + [[2], [-1], [0]]
        acc = StreamingMoments(3)
        for lo in range(0, 1000, 137):
            acc.merge(StreamingMoments.from_data(data[:, lo:lo + 137]))
        np.testing.assert_allclose(acc.mean, data.mean(axis=1), rtol=1e-12)
        np.testing.assert_allclose(acc.cov(), np.cov(data), rtol=1e-10)
        np.testing.assert_allclose(acc.sem(), data.std(axis=1, ddof=1) / math.sqrt(1000))

    def test_empty_and_single(self):
        acc = StreamingMoments(2).merge(StreamingMoments(2))
        assert acc.n == 0
        acc.merge(StreamingMoments.from_data(np.ones((2, 1))))
        assert acc.n == 1 and np.all(np.isnan(acc.cov()))


class TestEmpiricalDistortions:
    def test_single_sample(self, window_inst, hp_win):
        b = sample_batch(window_inst, hp_win, "gaussian", 1, seed=0)
        d = empirical_distortions(window_inst, hp_win, b)
        c1 = d.coeffs[0]
        xd = hp_win.gamma_t * (b.S2[0] + b.U[0])
        err = b.S1[0] - (c1.a * xd + c1.b * (hp_win.alpha_t * b.S1[0] + hp_win.beta_t * b.S2[0]
                                               + b.Z1[0]))
        assert d.d1 == pytest.approx(err ** 2, rel=1e-12)
        assert d.n == 1 and math.isnan(d.se1)

    def test_hybrid_within_three_se(self, window_inst, hp_win):
        b = sample_batch(window_inst, hp_win, "gaussian", 2 * 10 ** 5, seed=11)
        d = empirical_distortions(window_inst, hp_win, b)
        assert abs(d.d1 - 0.5) <= 3 * d.se1
        assert abs(d.d2 - 0.602) <= 3 * d.se2
        assert abs(d.power - window_inst.P) <= 3 * d.power_se
        assert d.orthogonality < 5 / math.sqrt(d.n)

    def test_uncoded_within_three_se(self, uncoded_inst):
        up = UncodedParams(0.3)
        hp = hybrid_from_uncoded(uncoded_inst, up)
        d = empirical_distortions(uncoded_inst, hp, sample_batch(uncoded_inst, hp, "uniform", 2 * 10 ** 5, seed=12))
        exact = uncoded_distortions(uncoded_inst, up)
        assert abs(d.d1 - exact.d1) <= 3 * d.se1
        assert abs(d.d2 - exact.d2) <= 3 * d.se2

    def test_as_dict(self, window_inst, hp_win):
        d = empirical_distortions(window_inst, hp_win, sample_batch(window_inst, hp_win, "gaussian", 1000, seed=0))
        out = d.as_dict()
        assert set(out) >= {"d1", "d2", "se1", "se2", "power", "coeffs"}


class TestEntropy:
    @pytest.mark.parametrize("var", [0.25, 4.0])
    def test_gaussian_calibration(self, rng, var):
        x = rng.normal(0, math.sqrt(var), 10 ** 5)
        exact = 0.5 * math.log(2 * math.pi * math.e * var)
        assert knn_entropy(x, k=5) == pytest.approx(exact, abs=0.02)

    def test_uniform(self, rng):
        x = rng.uniform(0, 3, 10 ** 5)
        assert knn_entropy(x, k=5) == pytest.approx(math.log(3), abs=0.02)

    def test_bivariate(self, rng):
        cov = np.array([[1.0, 0.6], [0.6, 2.0]])
        x = rng.multivariate_normal([0, 0], cov, 10 ** 5)
        exact = 0.5 * math.log((2 * math.pi * math.e) ** 2 * np.linalg.det(cov))
        assert knn_entropy(x, k=5) == pytest.approx(exact, abs=0.03)

    def test_conditional(self, rng):
        y = rng.normal(0, 1, 10 ** 5)
        x = 0.8 * y + rng.normal(0, 0.3, 10 ** 5)
        exact = 0.5 * math.log(2 * math.pi * math.e * 0.09)
        assert knn_conditional_entropy(x, y, k=5) == pytest.approx(exact, abs=0.03)

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            knn_entropy(np.arange(5.0), k=5)


class TestWorstCase:
    def test_too_few_samples(self, window_inst, hp_win):
        with pytest.raises(ValueError, match="too small"):
            worst_case_check(window_inst, hp_win, "uniform", 20, k_nn=5)

    def test_gaussian_control_gap_is_zero(self, window_inst, hp_win):
        rep = worst_case_check(window_inst, hp_win, "gaussian", 20_000, seed=1)
        assert rep.entropy["gap_rx1"] == 0.0 and rep.entropy["gap_rx2"] == 0.0

    def test_reproducible(self, window_inst, hp_win):
        a = worst_case_check(window_inst, hp_win, "laplace", 20_000, seed=3, threads=1)
        b = worst_case_check(window_inst, hp_win, "laplace", 20_000, seed=3, threads=3)
        assert a.as_dict() == b.as_dict()

    def test_pure_analog_skips_entropy(self, uncoded_inst):
        hp = hybrid_from_uncoded(uncoded_inst, UncodedParams(0.5))
        rep = worst_case_check(uncoded_inst, hp, "uniform", 20_000, seed=0)
        assert rep.entropy is None and rep.rate_feasible is None

    def test_uniform_passes(self, window_inst):
        hp = make_hybrid_params(window_inst, 0.4, 0.2)
        rep = worst_case_check(window_inst, hp, "uniform", 50_000, seed=4)
        assert rep.passed, rep.as_dict()
        assert rep.analytic["d1"] == pytest.approx(hybrid_distortions(window_inst, hp).d1)
