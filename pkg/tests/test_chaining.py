import math

import numpy as np
import pytest

from chainbound.chaining import (
    DEFAULT_RHOS, ChainingSequence, admissibility_check, build_chain, chain_L, chain_sum_X,
    default_gamma, delta_phi, k_inverse, k_profile,
)
from chainbound.entropy import FiniteMetricSpace
from chainbound.errors import DomainError
from chainbound.phi import subgaussian
from chainbound.presets import singleton, two_point

from oracles import exact_K


def segment8():
    return FiniteMetricSpace.from_points(np.linspace(0.0, 1.0, 8))


def flat_chain(M):
    """Singleton ball with M repeated levels {t0}."""
    return ChainingSequence(0, 1.0, (0,), tuple((0,) for _ in range(M + 1)))


class TestGamma:
    def test_first_two_weights(self):
        g = default_gamma(2, 0.75)
        assert g.gamma[0] == 4.0
        assert g.gamma[1] == pytest.approx(16 / 3, rel=1e-15)

    def test_truncated_sum(self):
        g = default_gamma(30, 0.75)
        assert abs(np.sum(1 / g.gamma) - 1) <= 1e-3
        assert np.sum(1 / g.gamma) + g.tail == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("rho", [0.5, 2 / 3, 1.0, 1.2])
    def test_rho_outside_interval(self, rho):
        with pytest.raises(DomainError):
            default_gamma(3, rho)

    def test_first_weight_at_least_three(self):
        for rho in DEFAULT_RHOS:
            assert default_gamma(1, rho).gamma[0] >= 3


class TestBuildChain:
    def test_singleton(self):
        c = build_chain(singleton(), 0, 1.0)
        assert c.levels == ((0,),)
        assert chain_L(singleton(), c, default_gamma(1)) == 0.0

    def test_two_point(self):
        sp = two_point(1.0)
        c = build_chain(sp, 0, 1.0)
        assert c.levels == ((0,), (0, 1))
        P = c.projections(sp)
        assert P[1, 1] == 1 and P[0, 1] == 0

    def test_segment_levels(self):
        sp = segment8()
        for strategy in ("dyadic", "refine"):
            c = build_chain(sp, 0, 1.0, strategy, gamma=default_gamma(8, 0.75))
            sizes = [len(l) for l in c.levels]
            assert all(a <= b for a, b in zip(sizes, sizes[1:]))
            assert sizes[-1] <= len(c.ball) and sizes[-1] == 8
            assert all(set(a) <= set(b) for a, b in zip(c.levels, c.levels[1:]))

    def test_levels_inside_ball(self):
        sp = segment8()
        c = build_chain(sp, 3, 0.3)
        ball = set(np.flatnonzero(sp.dist[3] <= 0.3))
        assert set(c.ball) == ball and all(set(l) <= ball for l in c.levels)
        assert c.levels[0] == (3,)

    def test_final_level_exact(self):
        sp = FiniteMetricSpace.from_points([0.0, 0.0, 0.4, 0.9])
        c = build_chain(sp, 2, 1.0)
        P = c.projections(sp)
        assert np.all(sp.dist[np.asarray(c.ball), P[-1]] == 0)

    def test_refine_needs_gamma(self):
        with pytest.raises(DomainError):
            build_chain(segment8(), 0, 1.0, "refine")

    def test_delta_range(self):
        with pytest.raises(DomainError):
            build_chain(segment8(), 0, 1.5)

    def test_json_round_trip(self):
        sp = segment8()
        c = build_chain(sp, 2, 0.8)
        back = ChainingSequence.from_json(c.to_json(sp, default_gamma(c.depth)), sp)
        assert back.levels == c.levels and back.ball == c.ball


class TestChainL:
    def test_two_point_value(self):
        sp = two_point(0.6)
        c = build_chain(sp, 0, 0.6)
        assert chain_L(sp, c, default_gamma(1, 0.75)) == pytest.approx(0.15, abs=1e-15)

    def test_doubling_gamma_halves(self, rng):
        sp = FiniteMetricSpace.from_points(rng.random((9, 2)) * 0.7)
        c = build_chain(sp, 0, 1.0)
        g = default_gamma(c.depth, 0.8)
        assert chain_L(sp, c, g.scaled(2.0)) == chain_L(sp, c, g) / 2

    def test_depth_mismatch(self):
        c = build_chain(segment8(), 0, 1.0)
        with pytest.raises(DomainError):
            chain_L(segment8(), c, default_gamma(1))


class TestProfile:
    def test_below_min_distance(self):
        prof = k_profile(segment8(), [0.05, 0.1])
        assert np.all(prof.k_values == 0)

    def test_two_point(self):
        prof = k_profile(two_point(1.0), [0.5, 1.0], gamma_candidates=[0.75])
        assert np.array_equal(prof.k_values, [0.0, 0.25])

    def test_monotone_and_witnesses(self, rng):
        sp = FiniteMetricSpace.from_points(rng.random((10, 2)) * 0.7)
        prof = k_profile(sp)
        assert np.all(np.diff(prof.k_values) >= 0)
        for k, w in zip(prof.k_values, prof.witnesses):
            assert chain_L(sp, w.chain, w.gamma) == k

    @pytest.mark.parametrize("seed", range(3))
    def test_upper_bounds_exhaustive(self, seed):
        sp = FiniteMetricSpace.from_points(np.random.default_rng(seed).random((5, 2)) * 0.8)
        grid = np.linspace(0.1, 1, 6)
        prof = k_profile(sp, grid, max_depth=3)
        for d, k in zip(grid, prof.k_values):
            assert k >= exact_K(sp, d, DEFAULT_RHOS) - 1e-12

    def test_inflated(self):
        prof = k_profile(two_point(1.0), [0.5, 1.0], gamma_candidates=[0.75])
        assert np.array_equal(prof.inflated(2.0).k_values, [0.0, 0.5])


class TestInverse:
    @pytest.fixture
    def prof(self):
        return k_profile(two_point(1.0), [0.25, 0.5, 1.0], gamma_candidates=[0.75])

    def test_above_max(self, prof):
        assert k_inverse(prof, 0.3) == (1.0, True)

    def test_small_h(self, prof):
        assert k_inverse(prof, 1e-9) == (1.0, False)

    def test_exact_hit(self, prof):
        assert k_inverse(prof, 0.25) == (1.0, False)

    def test_first_positive(self, rng):
        sp = FiniteMetricSpace.from_points(rng.random((8, 2)))
        prof = k_profile(sp)
        first = prof.delta_grid[np.flatnonzero(prof.k_values > 0)[0]]
        assert k_inverse(prof, 1e-12)[0] == first

    def test_nonpositive_h(self, prof):
        with pytest.raises(DomainError):
            k_inverse(prof, 0.0)


class TestDeltaPhi:
    def test_subgaussian_plugin(self, rng):
        sp = FiniteMetricSpace.from_points(rng.random((8, 2)) * 0.7)
        prof = k_profile(sp)
        for C, u in ((1.0, 2.0), (0.3, 5.0)):
            assert delta_phi(prof, subgaussian(), C, u) == k_inverse(prof, C / (2 * u * u))[0]

    def test_two_point(self):
        prof = k_profile(two_point(1.0), [0.1, 0.5, 1.0], gamma_candidates=[0.75])
        assert delta_phi(prof, subgaussian(), 1.0, 2.0) == 1.0

    def test_nonincreasing_in_u(self, rng):
        sp = FiniteMetricSpace.from_points(rng.random((8, 2)) * 0.7)
        prof = k_profile(sp)
        d = [delta_phi(prof, subgaussian(), 1.0, u) for u in np.linspace(0.5, 30, 60)]
        assert all(b <= a for a, b in zip(d, d[1:]))

    def test_zero_u(self):
        prof = k_profile(two_point(1.0), [1.0])
        with pytest.raises(DomainError):
            delta_phi(prof, subgaussian(), 1.0, 0.0)


class TestChainSum:
    def test_flat_chain_at_zero(self):
        assert chain_sum_X(flat_chain(4), default_gamma(4), subgaussian(), 0.0) == 4.0

    def test_two_point_hand_value(self):
        c = build_chain(two_point(1.0), 0, 1.0)
        X = chain_sum_X(c, default_gamma(1, 0.75), subgaussian(), 8.0)
        assert X == pytest.approx(2 * math.exp(-2), rel=1e-14)

    def test_degenerate_u(self, rng):
        sp = FiniteMetricSpace.from_points(rng.random((9, 2)) * 0.7)
        c = build_chain(sp, 0, 1.0)
        sizes = [len(l) for l in c.levels]
        expected = sum(a * b for a, b in zip(sizes[1:], sizes[:-1]))
        assert chain_sum_X(c, default_gamma(c.depth), subgaussian(), 0.0) == expected

    def test_strictly_decreasing(self, rng):
        sp = FiniteMetricSpace.from_points(rng.random((9, 2)) * 0.7)
        c = build_chain(sp, 0, 1.0)
        X = [chain_sum_X(c, default_gamma(c.depth), subgaussian(), u) for u in np.linspace(0.1, 20, 50)]
        assert all(b < a for a, b in zip(X, X[1:]))


class TestAdmissibility:
    def test_flat_chain_never_admissible(self):
        # gamma_n >= 3 > 2 and phi* increasing: every term of X already
        # exceeds exp(-phi*(u/2)), so no threshold exists on any grid
        u = np.linspace(0.0, 40.0, 401)
        rep = admissibility_check(flat_chain(3), default_gamma(3, 0.75), subgaussian(), u)
        assert not rep.ok.any()
        assert rep.threshold is None
        assert np.all(rep.X >= rep.rhs)

    def test_zero_u_fails(self, rng):
        sp = FiniteMetricSpace.from_points(rng.random((6, 2)) * 0.7)
        c = build_chain(sp, 0, 1.0)
        rep = admissibility_check(c, default_gamma(c.depth), subgaussian(), [0.0, 1.0])
        assert not rep.ok[0] and rep.X[0] >= 1

    def test_larger_gamma_is_harder(self):
        c = flat_chain(3)
        g = default_gamma(3, 0.75)
        for u in (1.0, 5.0, 12.0):
            assert chain_sum_X(c, g.scaled(1.5), subgaussian(), u) > chain_sum_X(c, g, subgaussian(), u)

    def test_empty_grid(self):
        with pytest.raises(DomainError):
            admissibility_check(flat_chain(1), default_gamma(1), subgaussian(), [])


class TestInvariants:
    @pytest.mark.parametrize("seed", range(5))
    def test_projection_optimal_and_telescoping(self, seed):
        rng = np.random.default_rng(seed)
        sp = FiniteMetricSpace.from_points(rng.random((12, 2)) * 0.7)
        for strategy in ("dyadic", "refine"):
            c = build_chain(sp, seed, 0.8, strategy, gamma=default_gamma(10, 0.8))
            P = c.projections(sp)
            ball = np.asarray(c.ball)
            for m, lev in enumerate(c.levels):
                best = sp.dist[np.ix_(ball, np.asarray(lev))].min(axis=1)
                assert np.array_equal(sp.dist[ball, P[m]], best)
            steps = sp.dist[P[1:], P[:-1]].sum(axis=0)
            assert np.all(sp.dist[c.ball_center, P[-1]] <= steps + 1e-12)
