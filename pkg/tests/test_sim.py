import itertools
import math

import numpy as np
import pytest
from scipy.special import comb

from chainbound.errors import DomainError, NotSPD
from chainbound.sim import (
    clopper_pearson, empirical_tail, example_A_scale, example_A_suprema, limsup_statistic,
    limsup_target, poly_martingale_from_signs, rademacher_signs, read_suprema, sample_example_A,
    sample_gaussian, sample_normalized_sum, sample_poly_martingale, simulate_limsup, write_suprema,
)


class TestGaussian:
    def test_identity_covariance(self):
        X = sample_gaussian(np.eye(3), 100_000, seed=1)
        assert np.max(np.abs(np.cov(X.T) - np.eye(3))) <= 0.02
        assert np.all(np.abs(X.mean(axis=0)) <= 3 / math.sqrt(100_000))

    def test_zero_covariance(self):
        assert np.all(sample_gaussian(np.zeros((4, 4)), 100, seed=2) == 0)

    def test_deterministic(self):
        cov = np.array([[1.0, 0.5], [0.5, 2.0]])
        a = sample_gaussian(cov, 5000, seed=3)
        b = sample_gaussian(cov, 5000, seed=3)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, sample_gaussian(cov, 5000, seed=4))

    def test_thread_count_irrelevant(self, monkeypatch):
        cov = np.eye(3)
        monkeypatch.setenv("CHAINBOUND_THREADS", "1")
        a = sample_gaussian(cov, 10_000, seed=5, block=1000)
        monkeypatch.setenv("CHAINBOUND_THREADS", "4")
        b = sample_gaussian(cov, 10_000, seed=5, block=1000)
        assert np.array_equal(a, b)

    def test_not_spd(self):
        with pytest.raises(NotSPD):
            sample_gaussian(np.array([[1.0, 2.0], [2.0, 1.0]]), 10, seed=0)
        with pytest.raises(NotSPD):
            sample_gaussian(np.array([[1.0, 0.2], [0.0, 1.0]]), 10, seed=0)

    def test_replicates_positive(self):
        with pytest.raises(DomainError):
            sample_gaussian(np.eye(2), 0, seed=0)


class TestExampleA:
    def test_first_coordinate_unscaled(self):
        assert example_A_scale(1)[0] == 1.0

    def test_tail_of_base_variable(self):
        X = sample_example_A(1, 100_000, seed=6)[:, 0]
        k = int(np.sum(np.abs(X) > 2))
        lo, hi = clopper_pearson(k, X.size)
        assert lo <= math.exp(-2) <= hi

    def test_scale_decreases(self):
        X = sample_example_A(100, 50_000, seed=7)
        sd = X[:, [0, 9, 99]].std(axis=0)
        assert sd[0] > sd[1] > sd[2]

    def test_censored_matches_full_paths(self):
        n, R, floor = 64, 200_000, 2.0
        full = sample_example_A(n, R, seed=8).max(axis=1)
        cens = example_A_suprema(n, R, seed=9, floor=floor)
        u = np.array([2.5, 3.0])
        a = empirical_tail(full, u)
        b = empirical_tail(cens, u)
        for i in range(u.size):
            # two independent estimates of the same probability
            se = math.sqrt(a.p_hat[i] * (1 - a.p_hat[i]) / R * 2)
            assert abs(a.p_hat[i] - b.p_hat[i]) <= 4 * se
        assert np.all(cens[np.isfinite(cens)] > floor)

    def test_censored_floor(self):
        with pytest.raises(DomainError):
            example_A_suprema(4, 10, seed=0, floor=0.0)


class TestPolyMartingale:
    def test_d1_is_walk(self):
        eps = rademacher_signs(50, 20, seed=10)
        assert np.array_equal(poly_martingale_from_signs(eps, 1), np.cumsum(eps, axis=1))

    def test_d2_identity(self):
        eps = rademacher_signs(10_000, 20, seed=11)
        xi = poly_martingale_from_signs(eps, 2)
        S = np.cumsum(eps.astype(np.int64), axis=1)
        n = np.arange(1, 10_001)
        assert np.array_equal(2 * xi, S * S - n)

    def test_d3_brute_force(self):
        eps = rademacher_signs(9, 5, seed=12)
        xi = poly_martingale_from_signs(eps, 3)
        for r in range(eps.shape[0]):
            for n in range(1, 10):
                ref = sum(int(eps[r, i]) * int(eps[r, j]) * int(eps[r, k])
                          for i, j, k in itertools.combinations(range(n), 3))
                assert xi[r, n - 1] == ref

    def test_variance(self):
        xi = sample_poly_martingale(2, 20, 100_000, seed=13)[:, 19]
        assert abs(xi.var() / comb(20, 2) - 1) <= 0.05

    def test_sign_flip_even_d(self):
        eps = rademacher_signs(400, 10, seed=14)
        a = limsup_statistic(poly_martingale_from_signs(eps, 2), 2)
        b = limsup_statistic(poly_martingale_from_signs(-eps, 2), 2)
        assert np.array_equal(a.per_replicate, b.per_replicate)

    def test_targets(self):
        assert limsup_target(2) == 1.0
        assert limsup_target(1) == math.sqrt(2)

    def test_d1_lil(self):
        s = simulate_limsup(1, 2**20, 200, seed=15)
        assert 0.7 * math.sqrt(2) <= s.median <= 1.05 * math.sqrt(2)


class TestNormalizedSum:
    def test_rademacher_moments(self):
        X = sample_normalized_sum("rademacher", 3, 100, 100_000, seed=17)
        assert np.max(np.abs(np.cov(X.T) - np.eye(3))) <= 0.03

    def test_n_one_exampleA(self):
        X = sample_normalized_sum("exampleA", 1, 1, 100_000, seed=18)[:, 0]
        k = int(np.sum(np.abs(X) > 2))
        lo, hi = clopper_pearson(k, X.size)
        assert lo <= math.exp(-2) <= hi

    def test_unknown_base(self):
        with pytest.raises(DomainError):
            sample_normalized_sum("cauchy", 2, 2, 10, seed=0)


class TestEmpiricalTail:
    def test_below_minimum(self, rng):
        X = rng.standard_normal((1000, 4))
        t = empirical_tail(X, [X.max(axis=1).min() - 1])
        assert t.p_hat[0] == 1.0 and t.ci_hi[0] == 1.0

    def test_zero_count_interval(self, rng):
        R = 1000
        t = empirical_tail(rng.standard_normal((R, 2)), [100.0])
        assert t.counts[0] == 0 and t.ci_lo[0] == 0
        assert t.ci_hi[0] == pytest.approx(1 - 0.005 ** (1 / R), rel=1e-9)

    def test_counts_nonincreasing_and_ci(self, rng):
        t = empirical_tail(rng.standard_normal((5000, 3)), np.linspace(-1, 4, 30))
        assert np.all(np.diff(t.counts) <= 0)
        assert np.all((t.ci_lo <= t.p_hat) & (t.p_hat <= t.ci_hi))

    def test_subadditive(self, rng):
        X = rng.standard_normal((20_000, 6))
        u = np.linspace(0, 3, 13)
        whole = empirical_tail(X, u).counts
        parts = empirical_tail(X[:, :3], u).counts + empirical_tail(X[:, 3:], u).counts
        assert np.all(whole <= parts)

    def test_two_sided(self):
        X = np.array([[-3.0, 1.0], [0.5, 0.2]])
        assert empirical_tail(X, [2.0], two_sided=True).counts[0] == 1
        assert empirical_tail(X, [2.0]).counts[0] == 0

    def test_normalization(self):
        X = np.array([[2.0, 6.0]])
        assert empirical_tail(X, [2.5], normalization=np.array([1.0, 3.0])).counts[0] == 0

    def test_decreasing_grid_rejected(self):
        with pytest.raises(DomainError):
            empirical_tail(np.zeros(3), [2.0, 1.0])


def test_suprema_io_round_trip(tmp_path, rng):
    sup = rng.standard_normal(1000)
    sup[3] = -np.inf
    p = tmp_path / "sup.bin"
    write_suprema(str(p), sup)
    raw = p.read_bytes()
    assert int.from_bytes(raw[:8], "little") == 1000 and len(raw) == 8 + 8000
    assert np.array_equal(read_suprema(str(p)), sup)


def test_suprema_truncated(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes((5).to_bytes(8, "little") + b"\0" * 16)
    with pytest.raises(DomainError):
        read_suprema(str(p))
