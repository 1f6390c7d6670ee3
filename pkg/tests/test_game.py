import math

import numpy as np
import pytest

from semcom_market.channel import LinkParams, SemanticPayload
from semcom_market.game import (
    GameOutcome,
    MarketCollapseError,
    MarketConfig,
    UserProfile,
    aggregate_demand,
    best_response,
    brute_force_equilibrium,
    closed_form_price,
    demand_profile,
    equilibrium,
    masp_utility,
    printed_formula_price,
    user_utility,
    verify_no_deviation,
)

# Pinned by independent high-precision evaluation of the reference scenario
# (five users, c=2, fee=10, cap=200 MHz, p_max=20, delta=15).
PRICE_DERIVED = 4.289026106876867
PRICE_PRINTED = 4.310716655896217
LEADER_UTILITY = 23.12607684458862
SUM_DEMANDS = 5.734349995028129
UTILITY_U1_B5_P2 = 9.325832369191915
BR_U1_P2 = 3.6413707252129375
GRID_POINTS = 10_000
GRID_STEP = 18.0 / (GRID_POINTS - 1)


def make_user(rng):
    link = LinkParams(
        tx_power_w=rng.uniform(1.0, 20.0),
        noise_power_w=10 ** rng.uniform(-18, -12),
        unit_gain=rng.uniform(0.001, 0.1),
        distance_m=rng.uniform(50, 800),
        path_loss_exp=rng.uniform(1.5, 3.5),
    )
    payload = SemanticPayload(source_bits=8e7, compression_rate=rng.uniform(0.1, 1.0))
    return UserProfile(immersion=rng.uniform(5, 30), ssim=rng.uniform(0.3, 1.0),
                       link=link, payload=payload)


class TestUserUtility:
    def test_zero_bandwidth_is_zero(self, default_market):
        for u in default_market.users:
            assert user_utility(u, 0.0, 3.0) == 0.0

    def test_reference_value(self, default_market):
        u1 = default_market.users[0]
        val = user_utility(u1, 5.0, 2.0)
        assert val == pytest.approx(UTILITY_U1_B5_P2, rel=1e-12)
        # independent re-derivation from the formula pieces
        expected = 15.0 * math.log1p(5.0 * u1.capacity / 24.0) * math.log1p(0.75) - 10.0
        assert val == pytest.approx(expected, rel=1e-14)

    def test_derivative_at_zero_vanishes_at_threshold(self, default_market):
        # dU/db at 0+ is delta*S*C/V - p, so it is zero when p equals the
        # participation threshold
        u1 = default_market.users[0]
        p = u1.participation_threshold
        h = 1e-7
        deriv = (user_utility(u1, h, p) - user_utility(u1, 0.0, p)) / h
        assert deriv == pytest.approx(0.0, abs=1e-5)

    def test_concavity_in_bandwidth(self, rng):
        for _ in range(50):
            user = make_user(rng)
            price = rng.uniform(0.5, 20.0)
            bs = np.linspace(0.01, 50.0, 200)
            utils = np.array([user_utility(user, b, price) for b in bs])
            second = utils[2:] - 2 * utils[1:-1] + utils[:-2]
            assert np.all(second <= 1e-9)


class TestBestResponse:
    def test_zero_above_threshold(self, default_market):
        for u in default_market.users:
            assert best_response(u, u.participation_threshold) == 0.0
            assert best_response(u, u.participation_threshold + 1.0) == 0.0

    def test_continuity_at_threshold(self, default_market):
        u1 = default_market.users[0]
        b = best_response(u1, u1.participation_threshold * (1.0 - 1e-9))
        assert 0.0 < b < 1e-6

    def test_reference_value(self, default_market):
        u1 = default_market.users[0]
        b = best_response(u1, 2.0)
        assert b == pytest.approx(BR_U1_P2, rel=1e-12)
        assert b == pytest.approx(15.0 * math.log1p(0.75) / 2.0 - 24.0 / u1.capacity, rel=1e-14)

    def test_grid_argmax_oracle(self, default_market):
        # exhaustive search over a million bandwidths agrees with the formula
        u1 = default_market.users[0]
        grid = np.linspace(0.0, 200.0, 1_000_000)
        inv_age = grid * (u1.capacity / u1.volume_mbit)
        utils = u1.immersion * np.log1p(inv_age) * u1.quality_term - 2.0 * grid
        b_star = best_response(u1, 2.0)
        assert abs(grid[np.argmax(utils)] - b_star) <= 200.0 / 999_999
        assert user_utility(u1, b_star, 2.0) >= utils.max()

    def test_optimality_against_random_probes(self, rng):
        for _ in range(20):
            user = make_user(rng)
            price = rng.uniform(0.5, 15.0)
            b_star = best_response(user, price)
            best = user_utility(user, b_star, price)
            probes = rng.uniform(0.0, 100.0, size=10_000)
            assert all(user_utility(user, b, price) <= best + 1e-9 for b in probes)

    def test_rejects_nonpositive_price(self, default_market):
        with pytest.raises(ValueError):
            best_response(default_market.users[0], 0.0)


class TestMaspUtility:
    def test_price_at_cost_gives_fee(self, default_market):
        d = demand_profile(default_market, default_market.unit_cost)
        assert masp_utility(default_market, default_market.unit_cost, d) == pytest.approx(10.0)

    def test_zero_demand_gives_fee(self, default_market):
        z = np.zeros(default_market.num_users)
        assert masp_utility(default_market, 7.0, z) == 10.0

    def test_compositional_rederivation(self, default_market):
        # utility at p=4 with best responses matches a hand-built sum
        price = 4.0
        d = demand_profile(default_market, price)
        expected = 10.0 + sum((price - 2.0) * b for b in d)
        assert masp_utility(default_market, price, d) == pytest.approx(expected, rel=1e-12)

    def test_negative_demand_rejected(self, default_market):
        with pytest.raises(ValueError):
            masp_utility(default_market, 3.0, np.array([-1.0] * 5))


def single_user_market(default_market):
    return MarketConfig(unit_cost=2.0, service_fee=10.0, bandwidth_cap=1e9,
                        price_cap=20.0, users=(default_market.users[0],))


class TestClosedForm:
    def test_reference_derived(self, default_market):
        assert closed_form_price(default_market) == pytest.approx(PRICE_DERIVED, rel=1e-12)

    def test_reference_printed(self, default_market):
        assert printed_formula_price(default_market) == pytest.approx(PRICE_PRINTED, rel=1e-12)

    def test_variants_differ_on_heterogeneous_users(self, default_market):
        derived = closed_form_price(default_market)
        printed = printed_formula_price(default_market)
        assert abs(derived - printed) / printed > 1e-4

    def test_single_user_variants_coincide(self, default_market):
        market = single_user_market(default_market)
        u = market.users[0]
        expected = math.sqrt(2.0 * u.immersion * u.quality_term * u.capacity / u.volume_mbit)
        assert closed_form_price(market) == pytest.approx(expected, rel=1e-12)
        assert printed_formula_price(market) == pytest.approx(expected, rel=1e-12)

    def test_homogeneous_users_coincide(self, default_market):
        # same capacity C for everyone: C factors out of the printed form
        u = default_market.users[2]
        market = MarketConfig(2.0, 10.0, 200.0, 20.0, users=(u,) * 4)
        derived = closed_form_price(market)
        printed = printed_formula_price(market)
        assert abs(derived - printed) / printed < 1e-9

    def test_collapse_when_nobody_participates(self, default_market):
        # thresholds all sit below the unit cost -> nobody ever buys
        u = default_market.users[0]
        weak = UserProfile(immersion=1e-3, ssim=u.ssim, link=u.link, payload=u.payload)
        market = MarketConfig(2.0, 10.0, 200.0, 20.0, users=(weak,))
        with pytest.raises(MarketCollapseError):
            closed_form_price(market)


class TestBruteForce:
    def test_reference_equilibrium(self, default_market):
        out = brute_force_equilibrium(default_market, GRID_POINTS)
        assert abs(out.price - PRICE_DERIVED) <= GRID_STEP
        assert out.leader_utility == pytest.approx(LEADER_UTILITY, rel=1e-6)

    def test_single_user_matches_closed_form(self, default_market):
        market = single_user_market(default_market)
        out = brute_force_equilibrium(market, GRID_POINTS)
        assert abs(out.price - closed_form_price(market)) <= GRID_STEP

    def test_tiny_cap_collapses(self, default_market):
        market = MarketConfig(2.0, 10.0, 0.001, 20.0, default_market.users)
        with pytest.raises(MarketCollapseError):
            brute_force_equilibrium(market, GRID_POINTS)

    def test_grid_size_guard(self, default_market):
        with pytest.raises(ValueError):
            brute_force_equilibrium(default_market, 100)


class TestEquilibrium:
    def test_unconstrained_cap_equals_closed_form(self, default_market):
        market = MarketConfig(2.0, 10.0, 1e9, 20.0, default_market.users)
        out = equilibrium(market)
        assert out.price == pytest.approx(closed_form_price(market), rel=1e-12)
        assert out.leader_utility == pytest.approx(LEADER_UTILITY, rel=1e-12)
        assert out.demands.sum() == pytest.approx(SUM_DEMANDS, rel=1e-12)

    def test_reference_matches_brute_force(self, default_market):
        eq = equilibrium(default_market)
        bf = brute_force_equilibrium(default_market, GRID_POINTS)
        assert abs(eq.price - bf.price) <= GRID_STEP
        assert eq.leader_utility >= bf.leader_utility - 1e-9

    def test_binding_cap_hits_it_exactly(self, default_market):
        # unconstrained aggregate is ~5.73 MHz; a 3 MHz cap binds
        market = MarketConfig(2.0, 10.0, 3.0, 20.0, default_market.users)
        out = equilibrium(market)
        assert out.demands.sum() == pytest.approx(3.0, abs=1e-6)
        assert out.price > PRICE_DERIVED

    def test_outcome_internally_consistent(self, default_market):
        out = equilibrium(default_market)
        assert out.leader_utility == pytest.approx(
            masp_utility(default_market, out.price, out.demands), rel=1e-9)
        for u, b, util in zip(default_market.users, out.demands, out.follower_utilities):
            assert util == pytest.approx(user_utility(u, b, out.price), rel=1e-12)

    def test_no_deviation(self, default_market):
        report = verify_no_deviation(default_market, equilibrium(default_market), probes=2_000)
        assert report["ok"], report

    def test_leader_concavity_on_active_region(self, default_market):
        # reduced utility with followers best-responding, all users active
        prices = np.linspace(2.05, 6.8, 300)
        utils = np.array([masp_utility(default_market, p, demand_profile(default_market, p))
                          for p in prices])
        second = utils[2:] - 2 * utils[1:-1] + utils[:-2]
        assert np.all(second <= 1e-9)

    def test_aggregate_demand_non_increasing(self, default_market):
        prices = np.linspace(2.0, 20.0, 500)
        agg = np.array([aggregate_demand(default_market, p) for p in prices])
        assert np.all(np.diff(agg) <= 1e-12)


class TestTypes:
    def test_quality_term_cached_exactly(self, default_market):
        for u in default_market.users:
            assert abs(u.quality_term - math.log(1.0 + u.ssim)) <= 1e-12

    def test_market_invariants(self, default_market):
        users = default_market.users
        with pytest.raises(ValueError):
            MarketConfig(unit_cost=0.0, service_fee=10.0, bandwidth_cap=200.0,
                         price_cap=20.0, users=users)
        with pytest.raises(ValueError):
            MarketConfig(unit_cost=21.0, service_fee=10.0, bandwidth_cap=200.0,
                         price_cap=20.0, users=users)
        with pytest.raises(ValueError):
            MarketConfig(unit_cost=2.0, service_fee=10.0, bandwidth_cap=0.0,
                         price_cap=20.0, users=users)
        with pytest.raises(ValueError):
            MarketConfig(unit_cost=2.0, service_fee=10.0, bandwidth_cap=200.0,
                         price_cap=20.0, users=())

    def test_outcome_rejects_negative_demand(self):
        with pytest.raises(ValueError):
            GameOutcome(price=3.0, demands=np.array([-0.1]), leader_utility=1.0,
                        follower_utilities=np.array([0.0]))

    def test_user_invariants(self, default_market):
        u = default_market.users[0]
        with pytest.raises(ValueError):
            UserProfile(immersion=0.0, ssim=u.ssim, link=u.link, payload=u.payload)
        with pytest.raises(ValueError):
            UserProfile(immersion=15.0, ssim=1.5, link=u.link, payload=u.payload)
