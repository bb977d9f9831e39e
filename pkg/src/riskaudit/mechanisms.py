"""Built-in mechanisms.

* second price: deterministic, universally truthful baseline;
* lottery menus: single-player mechanisms with enumerable coins, the
  workhorse for exact truthful-in-expectation tests;
* coverage auction: maximal-in-distributional-range combinatorial auction
  over coverage valuations with expected-externality payments.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import EXACT, Enumerable, Mechanism, Streamed, profile_key
from .errors import InputError
from .valuations import CoverageValuation, SingleItemValuation
from .welfare import OptimizerParams, maximize_expected_welfare

SINGLE_ITEM = "item"


def _check_single_item(mech, reports):
    mech.check_reports(reports)
    for i, v in enumerate(reports):
        if not isinstance(v, SingleItemValuation):
            raise InputError(f"{mech.name}: player {i} must report a single-item value")


class SecondPrice(Mechanism):
    """Highest report wins and pays the second-highest; ties go to the
    lowest player index."""

    name = "second_price"

    def __init__(self, n_players):
        if n_players < 1:
            raise InputError("second price needs at least one player")
        self.n_players = n_players
        self.items = (SINGLE_ITEM,)
        self.coin_model = Enumerable(((None, 1.0),))

    def check_reports(self, reports):
        super().check_reports(reports)

    def _winner(self, reports):
        _check_single_item(self, reports)
        amounts = [v.amount for v in reports]
        return max(range(len(amounts)), key=lambda i: (amounts[i], -i))

    def allocate(self, reports, coin):
        w = self._winner(reports)
        return tuple(frozenset({SINGLE_ITEM}) if i == w else frozenset()
                     for i in range(self.n_players))

    def pay(self, reports, coin, allocation):
        w = self._winner(reports)
        others = [v.amount for i, v in enumerate(reports) if i != w]
        price = max(others) if others else 0.0
        return tuple(float(price) if i == w else 0.0 for i in range(self.n_players))


def make_second_price(n_players) -> SecondPrice:
    return SecondPrice(n_players)


@dataclass(frozen=True)
class LotteryMenu:
    """Report regions ``[threshold_k, threshold_{k+1})`` mapped to an
    allocation probability and an unconditional payment.

    ``tiers`` is a tuple of ``(threshold, probability, payment)`` sorted by
    threshold, the first threshold being 0 so that regions cover all
    nonnegative reports.
    """

    tiers: tuple

    def __post_init__(self):
        if not self.tiers:
            raise InputError("lottery menu needs at least one tier")
        ths = [t for t, _, _ in self.tiers]
        if ths[0] != 0 or any(b <= a for a, b in zip(ths, ths[1:])):
            raise InputError("menu thresholds must start at 0 and increase strictly")
        for t, q, pay in self.tiers:
            if not 0.0 <= q <= 1.0:
                raise InputError(f"tier at {t}: probability {q} outside [0, 1]")

    @classmethod
    def from_tiers(cls, tiers):
        return cls(tuple((float(t), float(q), float(p)) for t, q, p in tiers))

    @classmethod
    def taxation(cls, thresholds, probs, base_payment=0.0):
        """Menu for a monotone allocation priced by the taxation principle.

        Payment in tier k is ``base + sum_{l<=k} threshold_l * (q_l - q_{l-1})``,
        which makes truthful reporting optimal for every value.
        """
        if any(b < a for a, b in zip(probs, probs[1:])):
            raise InputError("taxation menus need nondecreasing probabilities")
        tiers, pay = [], float(base_payment)
        for k, (t, q) in enumerate(zip(thresholds, probs)):
            if k:
                pay += t * (q - probs[k - 1])
            tiers.append((t, q, pay))
        return cls.from_tiers(tiers)

    def lookup(self, report: float):
        chosen = self.tiers[0]
        for tier in self.tiers:
            if report >= tier[0]:
                chosen = tier
        return chosen[1], chosen[2]

    def to_json(self):
        return [{"from": t, "prob": q, "payment": p} for t, q, p in self.tiers]


class Lottery(Mechanism):
    """Single player; the coin is the left end of an interval of a uniform
    draw, split at every menu probability, and the item is allocated when
    the coin lies below the report's tier probability.

    With the menu ``{0: (0, 0), 5: (0.5, 1)}`` the coins are ``0.0`` and
    ``0.5``, each with probability one half; coin ``0.0`` allocates to
    reports of at least 5.
    """

    name = "lottery"

    def __init__(self, menu: LotteryMenu):
        self.menu = menu
        self.n_players = 1
        self.items = (SINGLE_ITEM,)
        cuts = sorted({0.0, 1.0, *(q for _, q, _ in menu.tiers)})
        self.coin_model = Enumerable(tuple((a, b - a) for a, b in zip(cuts, cuts[1:])))

    def allocate(self, reports, coin):
        _check_single_item(self, reports)
        q, _ = self.menu.lookup(reports[0].amount)
        return (frozenset({SINGLE_ITEM}) if coin < q else frozenset(),)

    def pay(self, reports, coin, allocation):
        _check_single_item(self, reports)
        return (self.menu.lookup(reports[0].amount)[1],)


def make_lottery(menu) -> Lottery:
    if not isinstance(menu, LotteryMenu):
        menu = LotteryMenu.from_tiers(menu)
    return Lottery(menu)


class CoverageAuction(Mechanism):
    """Randomized auction over coverage valuations.

    The fractional allocation ``x*`` maximizing reported expected welfare is
    rounded item by item: one uniform per item is split into consecutive
    intervals of length ``1 - exp(-x*[i, j])`` in player order, the rest
    meaning "unallocated". Each player is charged, deterministically, the
    expected externality it imposes on the others.

    Optimizer results are memoized per report profile.
    """

    name = "coverage_auction"
    has_closed_form = True
    max_enumerated_items = 16

    def __init__(self, n_players, items, params: OptimizerParams | None = None):
        self.n_players = n_players
        self.items = tuple(items)
        self.params = params or OptimizerParams()
        m = len(self.items)
        self.coin_model = Streamed(lambda rng: rng.random(m))
        self.payoff_oracle = EXACT
        self._x_cache = {}
        self._pay_cache = {}

    def check_reports(self, reports):
        super().check_reports(reports)
        for i, v in enumerate(reports):
            if not isinstance(v, CoverageValuation):
                raise InputError(f"{self.name}: player {i} must report a coverage valuation")

    def fractional_allocation(self, reports) -> np.ndarray:
        key = profile_key(reports)
        if key not in self._x_cache:
            self.check_reports(reports)
            self._x_cache[key] = maximize_expected_welfare(list(reports), self.items,
                                                           self.params)
        return self._x_cache[key]

    def win_probabilities(self, reports) -> np.ndarray:
        return -np.expm1(-self.fractional_allocation(reports))

    def winners(self, reports, uniforms) -> np.ndarray:
        """Winner index per item (-1 if none) for uniforms of shape (..., m)."""
        probs = self.win_probabilities(reports)
        cum = np.cumsum(probs, axis=0)                      # (n, m)
        u = np.asarray(uniforms, dtype=float)
        # first player whose cumulative interval contains u
        beaten = u[..., None, :] >= cum                      # (..., n, m)
        idx = beaten.sum(axis=-2)
        return np.where(idx >= self.n_players, -1, idx)

    def allocate(self, reports, coin):
        w = self.winners(reports, coin)
        return tuple(frozenset(it for it, k in zip(self.items, w) if k == i)
                     for i in range(self.n_players))

    def expected_values(self, reports, x) -> np.ndarray:
        probs = -np.expm1(-x)
        return np.array([v.expected_value_product(dict(zip(self.items, probs[i])))
                         for i, v in enumerate(reports)])

    def payments(self, reports) -> tuple:
        key = profile_key(reports)
        if key not in self._pay_cache:
            self._pay_cache[key] = tuple(
                self.externality(reports, i) for i in range(self.n_players))
        return self._pay_cache[key]

    def externality(self, reports, player) -> float:
        reports = tuple(reports)
        with_i = self.expected_values(reports, self.fractional_allocation(reports))
        without = reports[:player] + (CoverageValuation.zero(self.items),) + reports[player + 1:]
        without_i = self.expected_values(without, self.fractional_allocation(without))
        others = [k for k in range(self.n_players) if k != player]
        return float(without_i[others].sum() - with_i[others].sum())

    def pay(self, reports, coin, allocation):
        return self.payments(reports)

    def player_outcomes(self, reports, player):
        reports = tuple(reports)
        m = len(self.items)
        if m > self.max_enumerated_items:
            raise InputError(f"refusing to enumerate 2^{m} bundles")
        probs = self.win_probabilities(reports)[player]
        payment = self.payments(reports)[player]
        out = []
        for mask in itertools.product((False, True), repeat=m):
            p = float(np.prod(np.where(mask, probs, 1.0 - probs)))
            if p > 0.0:
                bundle = frozenset(it for it, inc in zip(self.items, mask) if inc)
                out.append((p, bundle, payment))
        return out


def make_coverage_auction(instance, opt_params: OptimizerParams | None = None) -> CoverageAuction:
    for i, v in enumerate(instance.true_valuations):
        if not isinstance(v, CoverageValuation):
            raise InputError(f"player {i}: coverage auction needs coverage valuations")
    return CoverageAuction(instance.n_players, instance.items, opt_params)


def coverage_externality_payment(instance_or_mech, reports, player_index) -> float:
    """Others' expected welfare without the player minus with the player."""
    mech = instance_or_mech
    if not isinstance(mech, CoverageAuction):
        mech = make_coverage_auction(instance_or_mech)
    return mech.externality(tuple(reports), player_index)
