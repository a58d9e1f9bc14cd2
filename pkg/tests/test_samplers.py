import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from covlda.exceptions import ConfigError, NumericalError
from covlda.model import CountData, CovariateMatrix, Hyperparams, LatentState
from covlda.samplers import (ClampCounter, SliceConfig, beta_log_fcd, branch_rng, make_rng,
                             sample_beta, sample_overdispersion, sample_phi, sample_phi_row,
                             sample_z_sweep, slice_sample, z_fcd_weights)

from oracles import (brute_force_weights, collapsed_log_joint, nb_logpmf_naive,
                     random_tiny_instance)


def state_from_cube(n_lsk):
    """A LatentState carrying only count caches (no token list)."""
    e = np.zeros(0, dtype=np.int64)
    return LatentState(e, e, e, np.zeros(n_lsk.shape[0] + 1, dtype=np.int64), n_lsk,
                       n_lsk.sum(1), n_lsk.sum(0), n_lsk.sum((0, 1)))


def covariate_weights(n_lsk, l, s, lam, size, gamma):
    hp = Hyperparams(np.asarray(gamma), n_lsk.shape[2])
    p = size / (size + lam[l])
    return z_fcd_weights(l, s, state_from_cube(n_lsk), p, size, hp)


def chain(log_target, x0, cfg, n, thin, seed):
    rng = make_rng(seed)
    out = np.empty(n)
    x = x0
    for i in range(n):
        for _ in range(thin):
            x = slice_sample(log_target, x, cfg, rng)
        out[i] = x
    return out


class TestSliceSampler:
    def test_uniform_support(self):
        draws = chain(lambda x: 0.0, 3.0, SliceConfig(lower=2.0, upper=5.0), 2000, 1, 0)
        assert draws.min() >= 2.0 and draws.max() <= 5.0

    def test_normal_moments(self):
        draws = chain(lambda x: -0.5 * x * x, 0.0, SliceConfig(), 20000, 1, 1)
        assert -0.05 < draws.mean() < 0.05
        assert 0.9 < draws.var() < 1.1

    def test_gamma_ks(self):
        draws = chain(lambda x: 2 * math.log(x) - x, 1.0, SliceConfig(lower=0.0), 20000, 5, 2)
        assert stats.kstest(draws, stats.gamma(3).cdf).pvalue > 0.001

    def test_zero_density_start(self):
        with pytest.raises(NumericalError):
            slice_sample(lambda x: 0.0, 10.0, SliceConfig(lower=0.0, upper=1.0), make_rng(0))

    def test_deterministic(self):
        a = chain(lambda x: -0.5 * x * x, 0.3, SliceConfig(), 50, 1, 9)
        b = chain(lambda x: -0.5 * x * x, 0.3, SliceConfig(), 50, 1, 9)
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("kw", [{"width": 0}, {"max_expansions": 0}, {"lower": 2, "upper": 1}])
    def test_config_validation(self, kw):
        with pytest.raises(ConfigError):
            SliceConfig(**kw)

    def test_branch_rng_independent(self):
        a, b = branch_rng(make_rng(3), 2)
        assert a.random() != b.random()


class TestPhi:
    def test_single_category(self):
        assert np.array_equal(sample_phi_row([5], [0.1], make_rng(0)), [1.0])

    def test_simplex(self):
        phi = sample_phi(np.array([[3, 0], [0, 0], [1, 7]]), np.full(3, 0.1), make_rng(0))
        assert phi.shape == (2, 3)
        assert np.all(phi >= 0) and np.allclose(phi.sum(1), 1, atol=1e-12)

    def test_tiny_concentration_never_degenerate(self):
        rng = make_rng(0)
        for _ in range(200):
            row = sample_phi_row(np.zeros(5), np.full(5, 1e-3), rng)
            assert np.isfinite(row).all() and abs(row.sum() - 1) < 1e-12

    def test_skewed_mean(self):
        rng = make_rng(4)
        draws = np.array([sample_phi_row([1000, 0], [0.1, 0.1], rng) for _ in range(5000)])
        assert abs(draws[:, 0].mean() - 1000.1 / 1000.2) <= 0.01

    @settings(max_examples=8, deadline=None)
    @given(counts=st.lists(st.integers(0, 20), min_size=2, max_size=4), seed=st.integers(0, 1000))
    def test_mean_within_three_se(self, counts, seed):
        rng = make_rng(seed)
        a = np.array(counts) + 0.1
        draws = np.array([sample_phi_row(counts, np.full(len(counts), 0.1), rng) for _ in range(5000)])
        mean = a / a.sum()
        var = mean * (1 - mean) / (a.sum() + 1)
        se = np.sqrt(var / 5000)
        assert np.all(np.abs(draws.mean(0) - mean) <= 3 * se + 1e-12)

    def test_conjugate_parameters(self):
        # counts (3,0,1) with gamma 0.1 is Dirichlet(3.1, 0.1, 1.1)
        rng = make_rng(5)
        draws = np.array([sample_phi_row([3, 0, 1], np.full(3, 0.1), rng) for _ in range(20000)])
        a = np.array([3.1, 0.1, 1.1])
        assert np.allclose(draws.mean(0), a / a.sum(), atol=0.01)
        assert stats.kstest(draws[:, 0], stats.beta(3.1, 1.2).cdf).pvalue > 0.001


class TestBetaFcd:
    def test_prior_only(self):
        X = CovariateMatrix(np.zeros((0, 1)))
        vals = [beta_log_fcd([0.0], 0, v, [], X, 5.0, 10.0) for v in (-1, 0, 1)]
        assert vals[1] == 0.0 and vals[0] < 0 and vals[2] < 0
        assert vals[0] == pytest.approx(-1 / 20)

    def test_zero_count_monotone(self):
        X = CovariateMatrix(np.ones((1, 1)))
        vs = np.linspace(0, 5, 11)
        f = [beta_log_fcd([0.0], 0, v, [0], X, 3.0, 1e12) for v in vs]
        assert np.all(np.diff(f) < 0)
        assert f[4] == pytest.approx(3.0 * math.log(3.0 / (3.0 + math.exp(vs[4]))), abs=1e-9)

    def test_naive_oracle(self, rng):
        design = rng.normal(size=(5, 3))
        X = CovariateMatrix(design)
        n = rng.integers(0, 20, 5)
        b = rng.normal(size=3)
        got = beta_log_fcd(b, 1, 0.7, n, X, 4.0, 10.0)
        bb = b.copy()
        bb[1] = 0.7
        want = -0.7 ** 2 / 20.0
        for l in range(5):
            eta = sum(design[l, j] * bb[j] for j in range(3))
            want += nb_logpmf_naive(int(n[l]), math.exp(eta), 4.0)
        assert got == pytest.approx(want, abs=1e-10)


def _intercept_data(rng, beta0, L, size=1e6):
    lam = math.exp(beta0)
    n = rng.negative_binomial(size, size / (size + lam), size=L)
    return n[:, None], CovariateMatrix(np.ones((L, 1)), ["Intercept"])


class TestSampleBeta:
    def test_prior_recovery(self):
        hp = Hyperparams.default(1, 1)
        X = CovariateMatrix(np.zeros((0, 1)))
        rng = make_rng(0)
        b = np.zeros((1, 1))
        draws = np.empty(20000)
        for i in range(draws.size):
            b = sample_beta(np.zeros((0, 1)), b, 5.0, X, hp, SliceConfig(), rng)
            draws[i] = b[0, 0]
        tau = math.sqrt(10)
        assert abs(draws.mean()) <= 0.1 * tau

    def test_intercept_only(self):
        rng = make_rng(1)
        n_lk, X = _intercept_data(rng, 2.0, 500)
        hp = Hyperparams.default(1, 1)
        b = np.zeros((1, 1))
        draws = []
        for i in range(600):
            b = sample_beta(n_lk, b, 1000.0, X, hp, SliceConfig(), rng)
            if i >= 100:
                draws.append(b[0, 0])
        assert abs(np.mean(draws) - 2.0) <= 0.2

    def test_deterministic(self, small_state, small_X, small_hp):
        b0 = np.zeros((3, small_X.d))
        a = sample_beta(small_state, b0, 5.0, small_X, small_hp, SliceConfig(), make_rng(7))
        b = sample_beta(small_state, b0, 5.0, small_X, small_hp, SliceConfig(), make_rng(7))
        assert np.array_equal(a, b)

    def test_empty_cluster_reverts_to_prior(self):
        # an all-zero abundance column leaves the slope essentially prior-driven
        rng = make_rng(2)
        x = rng.uniform(-0.5, 0.5, 200)
        X = CovariateMatrix.with_intercept(x[:, None])
        hp = Hyperparams.default(1, 1)
        b = np.zeros((1, 2))
        slopes = []
        for i in range(3000):
            b = sample_beta(np.zeros((200, 1)), b, 1000.0, X, hp, SliceConfig(), rng)
            if i >= 500:
                slopes.append(b[0, 1])
        assert np.var(slopes) >= 0.25 * hp.prior_var

    def test_clamp_counts_events(self):
        c = ClampCounter()
        out = c.clamp(np.array([1.0, 800.0]))
        assert out[1] == 700.0 and c.events == 1


class TestOverdispersion:
    def _draws(self, size, seed):
        rng = make_rng(seed)
        n_lk, X = _intercept_data(rng, 2.5, 400, size=size)
        hp = Hyperparams.default(1, 1)
        beta = np.array([[2.5]])
        N, out = 500.0, []
        for i in range(800):
            N = sample_overdispersion(n_lk, beta, X, hp, SliceConfig(100.0), rng, N)
            out.append(N)
        return np.array(out[200:])

    def test_support_and_comparison(self):
        big, small = self._draws(1e6, 0), self._draws(2.0, 1)
        assert np.all((big > 0) & (big <= 1000)) and np.all((small > 0) & (small <= 1000))
        assert np.median(big) > 10 * np.median(small)

    def test_deterministic(self, small_state, small_X, small_hp):
        beta = np.zeros((3, small_X.d))
        a = sample_overdispersion(small_state, beta, small_X, small_hp, SliceConfig(100.0), make_rng(3), 50.0)
        b = sample_overdispersion(small_state, beta, small_X, small_hp, SliceConfig(100.0), make_rng(3), 50.0)
        assert a == b


class TestZWeights:
    def test_single_cluster(self):
        n = np.array([[[2]]])
        assert np.array_equal(covariate_weights(n, 0, 0, np.ones((1, 1)), 3.0, [0.1]), [1.0])

    def test_symmetric(self):
        n = np.array([[[1, 1, 1], [2, 2, 2]]])
        w = covariate_weights(n, 0, 1, np.full((1, 3), 2.0), 3.0, [0.1, 0.1])
        assert np.allclose(w, 1 / 3, atol=1e-14)

    def test_toy_two_clusters(self):
        # L=1, S=2, 3 tokens; one token of category 1 removed
        n = np.array([[[1, 0], [0, 1]]])
        lam, size, gamma = np.array([[1.5, 4.0]]), 2.5, [0.1, 0.1]
        got = covariate_weights(n, 0, 1, lam, size, gamma)
        want = brute_force_weights(lambda c: collapsed_log_joint(c, lam, size, gamma), n, 0, 1)
        assert np.allclose(got, want, atol=1e-10, rtol=0)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_oracle_property(self, seed):
        n, l, s, lam, size, gamma = random_tiny_instance(np.random.default_rng(seed))
        got = covariate_weights(n, l, s, lam, size, gamma)
        want = brute_force_weights(lambda c: collapsed_log_joint(c, lam, size, gamma), n, l, s)
        assert abs(got.sum() - 1) <= 1e-12 and np.all(got >= 0)
        assert np.allclose(got, want, atol=1e-10, rtol=0)

    def test_large_counts_no_underflow(self):
        n = np.zeros((1, 1, 2), dtype=np.int64)
        n[0, 0] = [10**6, 3]
        w = covariate_weights(n, 0, 0, np.array([[1e6, 1e-3]]), 1000.0, [0.1])
        assert np.isfinite(w).all() and abs(w.sum() - 1) < 1e-12


class TestZSweep:
    def test_single_cluster_unchanged(self, small_data, small_X):
        state = LatentState.random(small_data, 1, make_rng(0))
        before = state.copy()
        hp = Hyperparams.default(small_data.S, 1)
        sample_z_sweep(state, np.zeros((1, small_X.d)), 10.0, small_X, hp, make_rng(1))
        assert np.array_equal(before.z, state.z) and np.array_equal(before.n_lsk, state.n_lsk)

    def test_recount_after_sweeps(self, small_state, small_data, small_X, small_hp):
        # instance 3 of the fixture has zero tokens
        rng = make_rng(2)
        beta = rng.normal(size=(3, small_X.d))
        for _ in range(20):
            sample_z_sweep(small_state, beta, 10.0, small_X, small_hp, rng)
            small_state.check(small_data.counts)
        assert small_state.n_lk[3].sum() == 0

    def test_deterministic(self, small_data, small_X, small_hp):
        def run(seed):
            st_ = LatentState.random(small_data, 3, make_rng(0))
            sample_z_sweep(st_, np.zeros((3, small_X.d)), 10.0, small_X, small_hp, make_rng(seed),
                           random_scan=True)
            return st_.z

        assert np.array_equal(run(4), run(4))
