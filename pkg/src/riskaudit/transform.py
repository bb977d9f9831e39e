"""Risk-neutralizing payment transform.

Given a mechanism ``(A, p)``, the transformed mechanism keeps ``A`` and
charges player i

    p'_i = v_i(A(v)) - Pi_i(v),   Pi_i(v) = E[v_i(A(v)) - p_i(v)],

where ``v_i`` is the *reported* valuation. A truthful player then receives
``Pi_i(v)`` on every coin outcome, and expected payments are unchanged.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (EXACT, Exact, Mechanism, MonteCarlo, expected_payoff,
                   payoff_samples, profile_key, stable_digest)
from .errors import InputError, UnsupportedMethodError


@dataclass(frozen=True)
class PayoffEstimate:
    mean: float
    std: float = 0.0
    n: int = 0  # 0 marks an exact value

    @property
    def stderr(self) -> float:
        return self.std / np.sqrt(self.n) if self.n else 0.0

    def additive_bound(self, z=2.5758) -> float:
        return z * self.stderr

    def multiplicative_bound(self, z=2.5758) -> float:
        """Relative half-width of the confidence interval (inf at mean 0)."""
        b = self.additive_bound(z)
        if b == 0.0:
            return 0.0
        return b / abs(self.mean) if self.mean else float("inf")


@dataclass
class PayoffTable:
    """Expected truthful payoffs keyed by ``(profile_key, player)``."""

    entries: dict = field(default_factory=dict)
    method: str = "exact"

    def lookup(self, reports, player) -> float:
        try:
            return self.entries[(profile_key(reports), player)].mean
        except KeyError:
            raise InputError(
                f"no payoff estimate for player {player} at this report profile") from None

    def perturbed(self, fn) -> "PayoffTable":
        """New table with means replaced by ``fn(key, player, mean)``."""
        return PayoffTable(
            {k: replace(e, mean=float(fn(k[0], k[1], e.mean))) for k, e in self.entries.items()},
            method=self.method + "+perturbed")

    def __len__(self):
        return len(self.entries)


def estimated_payoff_table(base: Mechanism, reports_grid, method=MonteCarlo(10_000, 0)) -> PayoffTable:
    """Tabulate ``Pi_i`` for every profile in ``reports_grid`` and player.

    Monte-Carlo entries use seed ``(method.seed, entry_index)`` so results do
    not depend on evaluation order.
    """
    table = PayoffTable(method=method.describe())
    index = 0
    for reports in reports_grid:
        reports = tuple(reports)
        for i in range(base.n_players):
            if isinstance(method, MonteCarlo):
                seed = np.random.SeedSequence([method.seed, index])
                xs = payoff_samples(base, reports, reports[i], i, method.n, seed)
                est = PayoffEstimate(float(xs.mean()),
                                     float(xs.std(ddof=1)) if method.n > 1 else 0.0,
                                     method.n)
            else:
                est = PayoffEstimate(expected_payoff(base, reports, reports, i, method))
            table.entries[(profile_key(reports), i)] = est
            index += 1
    return table


class TransformedMechanism(Mechanism):
    """Base allocation rule with payments ``v_i(A) - Pi_i``.

    ``Pi`` comes from exactly one source: the base mechanism's exact oracle,
    a Monte-Carlo estimate with a seed fixed at construction, a precomputed
    :class:`PayoffTable`, or an interim (Bayesian) expectation over a prior.
    """

    def __init__(self, base: Mechanism, method=EXACT, *, table: PayoffTable | None = None,
                 prior=None):
        self.base = base
        self.method = method
        self.table = table
        self.prior = prior
        self.n_players = base.n_players
        self.items = base.items
        self.coin_model = base.coin_model
        self.payoff_oracle = base.payoff_oracle
        self.has_closed_form = base.has_closed_form
        self.name = f"transformed({base.name})"
        self._pi_cache = {}

    def check_reports(self, reports):
        self.base.check_reports(reports)

    def expected_truthful_payoff(self, reports, player) -> float:
        reports = tuple(reports)
        key = (profile_key(reports) if self.prior is None else reports[player].canonical(),
               player)
        if key not in self._pi_cache:
            self._pi_cache[key] = self._compute_pi(reports, player)
        return self._pi_cache[key]

    def _compute_pi(self, reports, player):
        if self.table is not None:
            return self.table.lookup(reports, player)
        if self.prior is not None:
            return interim_payoff(self.base, self.prior, reports[player], player, self.method)
        if isinstance(self.method, MonteCarlo):
            seed = np.random.SeedSequence(
                [self.method.seed, player, stable_digest(profile_key(reports))])
            xs = payoff_samples(self.base, reports, reports[player], player, self.method.n, seed)
            return float(xs.mean())
        return expected_payoff(self.base, reports, reports, player, self.method)

    def allocate(self, reports, coin):
        return self.base.allocate(reports, coin)

    def pay(self, reports, coin, allocation):
        return tuple(float(reports[i].value(allocation[i]) - self.expected_truthful_payoff(reports, i))
                     for i in range(self.n_players))

    def player_outcomes(self, reports, player):
        reports = tuple(reports)
        pi = self.expected_truthful_payoff(reports, player)
        rep = reports[player]
        return [(p, b, float(rep.value(b) - pi))
                for p, b, _ in self.base.player_outcomes(reports, player)]


def transform(base: Mechanism, method=EXACT, *, table: PayoffTable | None = None) -> TransformedMechanism:
    if table is None and isinstance(method, Exact) and not base.supports_exact:
        raise UnsupportedMethodError(
            f"{base.name} has no exact payoff oracle; use MonteCarlo or a table")
    return TransformedMechanism(base, method, table=table)


def _others_profiles(prior, player):
    """``(probability, {k: valuation})`` over the prior of players != player."""
    others = [k for k in range(len(prior)) if k != player]
    for combo in itertools.product(*(prior[k] for k in others)):
        p = 1.0
        for _, q in combo:
            p *= q
        yield p, {k: v for k, (v, _) in zip(others, combo)}


def interim_payoff(base, prior, report, player, method=EXACT, true_valuation=None) -> float:
    """``E[v(A(report, v_-i)) - p_i]`` over others' types and the coins.

    Value is assessed with ``true_valuation`` (defaults to the report).
    """
    true_valuation = report if true_valuation is None else true_valuation
    total = 0.0
    for k, (p, others) in enumerate(_others_profiles(prior, player)):
        if p == 0.0:
            continue
        reports = tuple(report if j == player else others[j] for j in range(len(prior)))
        as_true = tuple(true_valuation if j == player else others[j] for j in range(len(prior)))
        m = method
        if isinstance(method, MonteCarlo):
            m = MonteCarlo(method.n, int(np.random.SeedSequence([method.seed, player, k])
                                         .generate_state(1)[0]))
        total += p * expected_payoff(base, reports, as_true, player, m)
    return float(total)


def transform_bayesian(base: Mechanism, prior, method=EXACT) -> TransformedMechanism:
    """Interim version: ``Pi_i`` depends on player i's own report only.

    ``prior`` is one tuple of ``(valuation, probability)`` per player.
    """
    if prior is None:
        raise InputError("Bayesian transform needs a prior")
    if len(prior) != base.n_players:
        raise InputError("prior must cover every player")
    if isinstance(method, Exact) and not base.supports_exact:
        raise UnsupportedMethodError(f"{base.name} has no exact payoff oracle")
    return TransformedMechanism(base, method, prior=tuple(tuple(d) for d in prior))
