"""Mechanism abstraction: randomized allocation and payment rules driven by
an explicit coin model, plus exact and Monte-Carlo expected payoffs.

A mechanism never keeps hidden RNG state. Every random quantity is a pure
function of the reports and a coin outcome, and coin outcomes are either
enumerated with their probabilities or drawn from a seeded generator.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import InputError, UnsupportedMethodError
from .valuations import VALUE_TOL

Allocation = tuple  # tuple[frozenset[str], ...], one bundle per player


@dataclass(frozen=True)
class Exact:
    """Expectation computed by enumerating coin outcomes (or a closed form)."""

    def describe(self):
        return "exact"


@dataclass(frozen=True)
class MonteCarlo:
    """Expectation estimated as the mean of ``n`` seeded runs."""

    n: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise InputError("MonteCarlo requires n >= 1")

    def describe(self):
        return f"montecarlo(n={self.n}, seed={self.seed})"


EXACT = Exact()


@dataclass(frozen=True)
class Enumerable:
    """Finite coin space given as ``((coin, probability), ...)``."""

    outcomes: tuple

    def __post_init__(self):
        probs = [p for _, p in self.outcomes]
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > VALUE_TOL:
            raise InputError(f"coin probabilities must be >= 0 and sum to 1, got {probs}")

    def draw(self, rng):
        return self.draw_many(rng, 1)[0]

    def draw_many(self, rng, n):
        probs = np.array([p for _, p in self.outcomes], dtype=float)
        idx = rng.choice(len(probs), size=n, p=probs / probs.sum())
        return [self.outcomes[k][0] for k in idx]


@dataclass(frozen=True)
class Streamed:
    """Coins produced by ``sampler(rng)`` from a seeded numpy Generator."""

    sampler: Callable = field(compare=False)

    def draw(self, rng):
        return self.sampler(rng)

    def draw_many(self, rng, n):
        return [self.sampler(rng) for _ in range(n)]


@dataclass(frozen=True)
class Realization:
    allocation: Allocation
    payments: tuple
    coin: Any


@dataclass(frozen=True)
class Instance:
    """Players, items, true valuations and an optional independent prior.

    ``prior`` holds one tuple of ``(valuation, probability)`` per player.
    """

    n_players: int
    items: tuple
    true_valuations: tuple
    prior: tuple | None = None

    def __post_init__(self):
        if len(self.true_valuations) != self.n_players:
            raise InputError("need one true valuation per player")
        for v in self.true_valuations:
            _check_items(v, self.items)
        if self.prior is not None:
            if len(self.prior) != self.n_players:
                raise InputError("prior must list a distribution for every player")
            for i, dist in enumerate(self.prior):
                total = sum(p for _, p in dist)
                if not dist or abs(total - 1.0) > VALUE_TOL:
                    raise InputError(f"prior of player {i} sums to {total}, not 1")
                for v, p in dist:
                    if p < 0:
                        raise InputError(f"negative prior probability for player {i}")
                    _check_items(v, self.items)


def _check_items(v, items):
    extra = set(getattr(v, "items", ())) - set(items)
    if extra:
        raise InputError(f"valuation references unknown items {sorted(extra)}")


def stable_digest(*parts) -> int:
    """64-bit digest of ``repr`` of canonical parts, stable across processes."""
    h = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(h[:8], "little")


def profile_key(reports) -> tuple:
    return tuple(v.canonical() for v in reports)


class Mechanism:
    """Direct-revelation mechanism with an explicit coin model.

    Subclasses implement :meth:`allocate` and :meth:`pay`. Payments receive
    the same coin as the allocation so they may be correlated with it.
    Mechanisms with a closed-form outcome distribution per player set
    ``has_closed_form`` and override :meth:`player_outcomes`.
    """

    n_players: int
    items: tuple
    coin_model: Enumerable | Streamed
    payoff_oracle: Exact | MonteCarlo = EXACT
    has_closed_form = False
    name = "mechanism"

    def allocate(self, reports, coin) -> Allocation:
        raise NotImplementedError

    def pay(self, reports, coin, allocation) -> tuple:
        raise NotImplementedError

    def check_reports(self, reports):
        if len(reports) != self.n_players:
            raise InputError(
                f"{self.name}: expected {self.n_players} reports, got {len(reports)}")

    @property
    def supports_exact(self) -> bool:
        return self.has_closed_form or isinstance(self.coin_model, Enumerable)

    def player_outcomes(self, reports, player):
        """``[(probability, bundle, payment), ...]`` for one player."""
        if not isinstance(self.coin_model, Enumerable):
            raise UnsupportedMethodError(
                f"{self.name}: exact outcomes need enumerable coins or a closed form")
        self.check_reports(reports)
        out = []
        for coin, prob in self.coin_model.outcomes:
            alloc = self.allocate(reports, coin)
            out.append((prob, alloc[player], self.pay(reports, coin, alloc)[player]))
        return out


def run(mech: Mechanism, reports: Sequence, seed=None, *, coin=None) -> Realization:
    """Run once; the coin is either given or drawn from ``default_rng(seed)``."""
    reports = tuple(reports)
    mech.check_reports(reports)
    if coin is None:
        coin = mech.coin_model.draw(np.random.default_rng(seed))
    alloc = tuple(frozenset(b) for b in mech.allocate(reports, coin))
    seen = set()
    for bundle in alloc:
        if seen & bundle:
            raise AssertionError(f"{mech.name}: item allocated twice")
        seen |= bundle
    payments = tuple(float(p) for p in mech.pay(reports, coin, alloc))
    if len(payments) != mech.n_players:
        raise AssertionError(f"{mech.name}: payment vector has wrong length")
    return Realization(alloc, payments, coin)


def payoff_samples(mech, reports, true_valuation, player, n, seed) -> np.ndarray:
    """Realized payoffs ``v_true(bundle) - payment`` over ``n`` seeded runs."""
    reports = tuple(reports)
    mech.check_reports(reports)
    rng = np.random.default_rng(seed)
    out = np.empty(n)
    for k, coin in enumerate(mech.coin_model.draw_many(rng, n)):
        alloc = mech.allocate(reports, coin)
        out[k] = true_valuation.value(alloc[player]) - mech.pay(reports, coin, alloc)[player]
    return out


def expected_payoff(mech, reports, as_if_true, player, method=EXACT) -> float:
    """Expected payoff of ``player`` valued under ``as_if_true[player]``.

    The mechanism sees ``reports``; value is assessed with the true
    valuation, which is what a misreport audit needs.
    """
    true_v = as_if_true[player]
    if isinstance(method, Exact):
        if not mech.supports_exact:
            raise UnsupportedMethodError(
                f"{mech.name}: exact expected payoff needs enumerable coins or a closed form")
        return float(sum(p * (true_v.value(b) - pay)
                         for p, b, pay in mech.player_outcomes(tuple(reports), player)))
    if isinstance(method, MonteCarlo):
        return float(payoff_samples(mech, reports, true_v, player, method.n, method.seed).mean())
    raise UnsupportedMethodError(f"unknown method {method!r}")
