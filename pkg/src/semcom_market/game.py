"""One-leader, multi-follower bandwidth market.

The provider posts a unit bandwidth price p; each user buys the bandwidth
that maximizes

    U_i(b) = delta_i * ln(1 + 1/A_i(b)) * ln(1 + SSIM_i) - p * b,

where A_i is the semantic-information age at bandwidth b.  The leader's
payoff is a flat service fee plus the margin (p - c) on all bandwidth sold.

Canonical game-layer units: bandwidth in MHz and payload volume in Mbit, so
prices are per MHz and V/C is directly in MHz.  Changing the unit rescales
the p*b term against the log term and therefore moves the equilibrium; every
CSV emitted by this package states the unit in its header.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import LinkParams, SemanticPayload, channel_capacity


class MarketCollapseError(RuntimeError):
    """No feasible price clears the market (every price violates a constraint)."""


@dataclass(frozen=True)
class UserProfile:
    """A follower: taste for freshness, delivered quality, and link physics."""

    immersion: float
    ssim: float
    link: LinkParams
    payload: SemanticPayload
    # derived terms, cached at construction
    quality_term: float = field(init=False)   # ln(1 + ssim)
    capacity: float = field(init=False)        # bit/s/Hz
    volume_mbit: float = field(init=False)

    def __post_init__(self):
        if not self.immersion > 0.0:
            raise ValueError("UserProfile.immersion must be positive")
        if not 0.0 < self.ssim <= 1.0:
            raise ValueError("UserProfile.ssim must be in (0, 1]")
        object.__setattr__(self, "quality_term", math.log1p(self.ssim))
        object.__setattr__(self, "capacity", channel_capacity(self.link))
        object.__setattr__(self, "volume_mbit", self.payload.payload_mbit)

    @property
    def participation_threshold(self) -> float:
        """Price above which the user stops buying: delta*S*C / V."""
        return self.immersion * self.quality_term * self.capacity / self.volume_mbit


@dataclass(frozen=True)
class MarketConfig:
    """Leader-side constants plus the follower population.

    unit_cost      provider's cost per MHz sold (c)
    service_fee    flat content-generation fee collected regardless of demand
    bandwidth_cap  total MHz the provider may sell
    price_cap      regulatory ceiling on the unit price
    """

    unit_cost: float
    service_fee: float
    bandwidth_cap: float
    price_cap: float
    users: tuple[UserProfile, ...]

    def __post_init__(self):
        if not 0.0 < self.unit_cost <= self.price_cap:
            raise ValueError("require 0 < unit_cost <= price_cap")
        if not self.bandwidth_cap > 0.0:
            raise ValueError("bandwidth_cap must be positive")
        if len(self.users) < 1:
            raise ValueError("at least one user required")
        object.__setattr__(self, "users", tuple(self.users))

    @property
    def num_users(self) -> int:
        return len(self.users)


@dataclass(frozen=True)
class GameOutcome:
    price: float
    demands: np.ndarray
    leader_utility: float
    follower_utilities: np.ndarray

    def __post_init__(self):
        if np.any(self.demands < 0.0):
            raise ValueError("demands must be non-negative")


def user_utility(user: UserProfile, bandwidth: float, price: float) -> float:
    """Follower payoff at a posted price and purchased bandwidth (MHz).

    At b = 0 the freshness term is ln(1 + 0) = 0 (no service), so the payoff
    is exactly zero: no service, no payment.
    """
    if bandwidth < 0.0:
        raise ValueError("bandwidth must be non-negative")
    if bandwidth == 0.0:
        return 0.0
    inv_age = bandwidth * user.capacity / user.volume_mbit
    return user.immersion * math.log1p(inv_age) * user.quality_term - price * bandwidth


def best_response(user: UserProfile, price: float) -> float:
    """Utility-maximizing bandwidth demand (MHz) at a posted price.

    The follower problem is concave in b; the stationary point
    delta*S/p - V/C is the optimum whenever it is positive, i.e. whenever
    the price is below the participation threshold delta*S*C/V.
    """
    if price <= 0.0:
        raise ValueError("price must be positive")
    if price >= user.participation_threshold:
        return 0.0
    return user.immersion * user.quality_term / price - user.volume_mbit / user.capacity


def demand_profile(config: MarketConfig, price: float) -> np.ndarray:
    """Best-response demand of every user at one price."""
    return np.array([best_response(u, price) for u in config.users])


def aggregate_demand(config: MarketConfig, price: float) -> float:
    return float(demand_profile(config, price).sum())


def masp_utility(config: MarketConfig, price: float, demands: np.ndarray) -> float:
    """Leader payoff: service fee plus margin on all bandwidth sold."""
    demands = np.asarray(demands, dtype=float)
    if np.any(demands < 0.0):
        raise ValueError("demands must be non-negative")
    return config.service_fee + float((price - config.unit_cost) * demands.sum())


def _weighted_sums(config: MarketConfig, active: np.ndarray) -> tuple[float, float]:
    """(sum of delta_i*S_i, sum of V_i/C_i) over the active users."""
    ds = sum(u.immersion * u.quality_term for u, a in zip(config.users, active) if a)
    vc = sum(u.volume_mbit / u.capacity for u, a in zip(config.users, active) if a)
    return ds, vc


def closed_form_price(config: MarketConfig) -> float:
    """Stationary price of the leader's reduced utility, clamped to [c, p_max].

    Derived from the first-order condition sum_i(-V_i/C_i + c*delta_i*S_i/p^2) = 0,
    giving p = sqrt(c * sum(delta*S) / sum(V/C)).  The sums run over the
    active users only; since raising the price can push users below their
    participation threshold, the active set is re-derived at the candidate
    price until it is stable (bounded number of sweeps; the grid solver is
    the arbiter for pathological populations).
    """
    thresholds = np.array([u.participation_threshold for u in config.users])
    active = thresholds > config.unit_cost
    if not active.any():
        raise MarketCollapseError("no user participates at any feasible price")
    price = config.unit_cost
    for _ in range(config.num_users + 2):
        ds, vc = _weighted_sums(config, active)
        price = math.sqrt(config.unit_cost * ds / vc)
        price = min(max(price, config.unit_cost), config.price_cap)
        new_active = thresholds > price
        if not new_active.any():
            raise MarketCollapseError("no user participates at the candidate price")
        if np.array_equal(new_active, active):
            break
        active = new_active
    return price


def printed_formula_price(config: MarketConfig) -> float:
    """The alternative closed form sqrt(c * sum(delta*S*C) / sum(V)), clamped.

    This variant coincides with :func:`closed_form_price` exactly when all
    users share one capacity (C factors out of the sums) and differs on
    heterogeneous populations; exposed so both can be compared against the
    grid-search solution.
    """
    dsc = sum(u.immersion * u.quality_term * u.capacity for u in config.users)
    v = sum(u.volume_mbit for u in config.users)
    price = math.sqrt(config.unit_cost * dsc / v)
    return min(max(price, config.unit_cost), config.price_cap)


def _outcome_at(config: MarketConfig, price: float, demands: np.ndarray) -> GameOutcome:
    utils = np.array([user_utility(u, b, price) for u, b in zip(config.users, demands)])
    return GameOutcome(
        price=price,
        demands=demands,
        leader_utility=masp_utility(config, price, demands),
        follower_utilities=utils,
    )


def brute_force_equilibrium(config: MarketConfig, grid_points: int = 10_000) -> GameOutcome:
    """Exhaustive scan of the leader's price over a uniform grid.

    Followers play their analytic best responses at every grid price.  A
    price is feasible when it satisfies the leader's constraint set: every
    user buys a strictly positive amount and the total stays within the
    bandwidth cap.  Returns the feasible price of highest leader utility
    (lowest price on ties); independent of, and the arbiter for, the
    closed-form solvers.
    """
    if grid_points < 1_000:
        raise ValueError("grid_points must be at least 1000")
    prices = np.linspace(config.unit_cost, config.price_cap, grid_points)
    ds = np.array([u.immersion * u.quality_term for u in config.users])
    vc = np.array([u.volume_mbit / u.capacity for u in config.users])
    # demand matrix, users x grid
    demand = ds[:, None] / prices[None, :] - vc[:, None]
    np.maximum(demand, 0.0, out=demand)
    totals = demand.sum(axis=0)
    feasible = (demand.min(axis=0) > 0.0) & (totals <= config.bandwidth_cap)
    if not feasible.any():
        raise MarketCollapseError("no grid price satisfies the market constraints")
    utility = np.where(feasible, config.service_fee + (prices - config.unit_cost) * totals, -np.inf)
    best = int(np.argmax(utility))  # argmax takes the first (lowest-price) maximizer
    return _outcome_at(config, float(prices[best]), demand[:, best])


def equilibrium(config: MarketConfig, bisect_tol: float = 1e-6) -> GameOutcome:
    """Leader-optimal price with best-response demands.

    Uses the closed form when the resulting aggregate demand fits under the
    bandwidth cap.  When the cap binds, the price is raised to the smallest
    level at which aggregate demand meets the cap: aggregate best response
    is non-increasing in price, so bisection on [p_closed, p_max] applies.
    """
    price = closed_form_price(config)
    demands = demand_profile(config, price)
    if demands.sum() <= config.bandwidth_cap:
        return _outcome_at(config, price, demands)
    lo, hi = price, config.price_cap
    if aggregate_demand(config, hi) > config.bandwidth_cap:
        raise MarketCollapseError("demand exceeds the bandwidth cap even at the price cap")
    # tolerance is on the demand gap in MHz, not on the price interval
    for _ in range(200):
        if config.bandwidth_cap - aggregate_demand(config, hi) <= bisect_tol:
            break
        mid = 0.5 * (lo + hi)
        if aggregate_demand(config, mid) > config.bandwidth_cap:
            lo = mid
        else:
            hi = mid
    demands = demand_profile(config, hi)
    return _outcome_at(config, hi, demands)


def verify_no_deviation(
    config: MarketConfig,
    outcome: GameOutcome,
    probes: int = 10_000,
    rel_tol: float = 1e-9,
) -> dict:
    """Probe both equilibrium inequalities on uniform deviation grids.

    Checks that no single follower improves by changing its own bandwidth
    and that the leader does not improve at any feasible grid price.
    Returns a report dict with the worst observed improvements.
    """
    scale = max(abs(outcome.leader_utility), 1.0)
    worst_follower = -np.inf
    for i, user in enumerate(config.users):
        grid = np.linspace(0.0, config.bandwidth_cap, probes)
        utils = np.array([user_utility(user, b, outcome.price) for b in grid])
        worst_follower = max(worst_follower, float(utils.max() - outcome.follower_utilities[i]))
    prices = np.linspace(config.unit_cost, config.price_cap, probes)
    worst_leader = -np.inf
    for p in prices:
        d = demand_profile(config, p)
        if d.min() <= 0.0 or d.sum() > config.bandwidth_cap:
            continue  # not playable under the leader's constraint set
        worst_leader = max(worst_leader, masp_utility(config, p, d) - outcome.leader_utility)
    follower_ok = worst_follower <= rel_tol * scale
    leader_ok = worst_leader <= rel_tol * scale
    return {
        "follower_ok": follower_ok,
        "leader_ok": leader_ok,
        "ok": follower_ok and leader_ok,
        "worst_follower_gain": worst_follower,
        "worst_leader_gain": worst_leader,
    }
