"""Brute-force incentive audits over finite type spaces.

Every audit enumerates players, true profiles and unilateral deviations
drawn from the same grid, computes the distribution of realized payoffs
under truth and under the deviation, and compares expected utilities.
Utilities are applied per realization and only then averaged.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .core import EXACT, Exact, MonteCarlo, payoff_samples, profile_key, run, stable_digest
from .errors import InputError, UnsupportedMethodError
from .transform import _others_profiles
from .utility import Identity, default_battery

Z99 = 2.5758293035489004


@dataclass(frozen=True)
class TypeSpace:
    """Finite candidate valuations per player."""

    grids: tuple

    def __post_init__(self):
        if any(len(g) == 0 for g in self.grids):
            raise InputError("every player needs at least one candidate valuation")

    @classmethod
    def of(cls, *grids):
        return cls(tuple(tuple(g) for g in grids))

    @property
    def n_players(self):
        return len(self.grids)

    def profiles(self):
        return itertools.product(*self.grids)


@dataclass(frozen=True)
class Witness:
    player: int
    true_profile: tuple
    deviation: object
    utility: str
    margin: float
    truthful: float
    deviating: float
    ci_halfwidth: float = 0.0
    utility_model: object = field(default=None, compare=False, repr=False)

    def sort_key(self):
        return (self.margin, self.player, self.utility, repr(profile_key(self.true_profile)),
                repr(self.deviation.canonical() if self.deviation is not None else None))

    def to_dict(self):
        return {
            "player": self.player,
            "true_profile": [v.to_json() for v in self.true_profile],
            "deviation": self.deviation.to_json() if self.deviation is not None else None,
            "utility": self.utility,
            "margin": self.margin,
            "truthful": self.truthful,
            "deviating": self.deviating,
            "ci_halfwidth": self.ci_halfwidth,
        }


@dataclass
class AuditReport:
    mode: str
    verdict: str
    worst_margin: float
    witnesses: list
    method: str
    tolerance: float
    n_checks: int = 0
    flags: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self):
        return {
            "mode": self.mode,
            "verdict": self.verdict,
            "worst_margin": self.worst_margin,
            "method": self.method,
            "tolerance": self.tolerance,
            "n_checks": self.n_checks,
            "flags": sorted(self.flags),
            "details": self.details,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


@dataclass(frozen=True)
class PayoffLottery:
    """Realized payoffs with probabilities; ``group`` tags sample batches
    (mixture components) so Monte-Carlo variances can be combined."""

    probs: np.ndarray
    payoffs: np.ndarray
    group: np.ndarray
    sampled: bool

    @classmethod
    def mixture(cls, parts):
        parts = [(w, lot) for w, lot in parts if w > 0]
        probs = np.concatenate([w * lot.probs for w, lot in parts])
        pay = np.concatenate([lot.payoffs for _, lot in parts])
        group = np.concatenate([np.full(len(lot.probs), k) for k, (_, lot) in enumerate(parts)])
        return cls(probs, pay, group, any(lot.sampled for _, lot in parts))

    def expect(self, u):
        """Mean of ``u`` and variance of that estimate (0 when exact)."""
        vals = np.asarray(u(self.payoffs), dtype=float)
        mean = float(np.dot(self.probs, vals))
        if not self.sampled:
            return mean, 0.0
        var = 0.0
        for g in np.unique(self.group):
            sel = self.group == g
            k = int(sel.sum())
            if k > 1:
                w = float(self.probs[sel].sum())
                var += w * w * float(np.var(vals[sel], ddof=1)) / k
        return mean, var


def payoff_lottery(mech, reports, true_valuation, player, method=EXACT) -> PayoffLottery:
    reports = tuple(reports)
    if isinstance(method, Exact):
        if not mech.supports_exact:
            raise UnsupportedMethodError(f"{mech.name}: exact audit unsupported")
        outs = mech.player_outcomes(reports, player)
        probs = np.array([p for p, _, _ in outs], dtype=float)
        pay = np.array([true_valuation.value(b) - t for _, b, t in outs], dtype=float)
        return PayoffLottery(probs, pay, np.zeros(len(probs), dtype=int), False)
    if isinstance(method, MonteCarlo):
        seed = np.random.SeedSequence(
            [method.seed, player,
             stable_digest(profile_key(reports), true_valuation.canonical())])
        xs = payoff_samples(mech, reports, true_valuation, player, method.n, seed)
        return PayoffLottery(np.full(method.n, 1.0 / method.n), xs,
                             np.zeros(method.n, dtype=int), True)
    raise UnsupportedMethodError(f"unknown method {method!r}")


def _replace(profile, i, v):
    return profile[:i] + (v,) + profile[i + 1:]


def _resolve_battery(utilities, lotteries):
    lo = min((float(lot.payoffs.min()) for lot in lotteries if len(lot.payoffs)), default=0.0)
    return [u.resolve(lo) for u in utilities]


def _evaluate(mode, checks, utilities, method, tol, factor=1.0, apx=False):
    """``checks``: list of ``(player, true_profile, deviation, truth_lot, dev_lot)``."""
    lots = [c[3] for c in checks] + [c[4] for c in checks]
    battery = _resolve_battery(utilities, lots)
    witnesses, flags = [], set()
    worst = float("inf")
    verdict = "pass"
    n = 0
    tightest = None
    for player, profile, dev, truth, devl in checks:
        for u in battery:
            lhs, var_l = truth.expect(u)
            rhs, var_r = devl.expect(u)
            f = factor
            if apx and (np.any(u(truth.payoffs) < 0) or np.any(u(devl.payoffs) < 0)):
                flags.add("additive-mode: negative utilities")
                f = 1.0
            margin = lhs - f * rhs
            half = Z99 * float(np.sqrt(var_l + f * f * var_r))
            n += 1
            w = Witness(player, profile, dev, u.name, float(margin), float(lhs), float(rhs), half,
                        utility_model=u)
            if tightest is None or w.sort_key() < tightest.sort_key():
                tightest = w
            worst = min(worst, margin)
            if margin + half < -tol:
                witnesses.append(w)
                verdict = "fail"
            elif margin - half < -tol:
                witnesses.append(w)
                if verdict == "pass":
                    verdict = "inconclusive"
    if verdict == "inconclusive" and any(w.margin + w.ci_halfwidth < -tol for w in witnesses):
        verdict = "fail"
    witnesses.sort(key=Witness.sort_key)
    details = {"utilities": [u.name for u in battery]}
    if tightest is not None:
        details["tightest_check"] = tightest.to_dict()
    if factor != 1.0:
        details["factor"] = factor
    return AuditReport(mode, verdict, worst if n else 0.0, witnesses, method.describe(), tol,
                       n, sorted(flags), details)


def _dsic_checks(mech, space, method):
    if space.n_players != mech.n_players:
        raise InputError("type space and mechanism disagree on the number of players")
    cache = {}

    def lottery(reports, true_v, i):
        key = (profile_key(reports), true_v.canonical(), i)
        if key not in cache:
            cache[key] = payoff_lottery(mech, reports, true_v, i, method)
        return cache[key]

    checks = []
    for profile in space.profiles():
        for i in range(mech.n_players):
            truth = lottery(profile, profile[i], i)
            for dev in space.grids[i]:
                if dev == profile[i]:
                    continue
                checks.append((i, profile, dev, truth,
                               lottery(_replace(profile, i, dev), profile[i], i)))
    return checks


def audit_tie(mech, space: TypeSpace, method=EXACT, tol=1e-9) -> AuditReport:
    """Truthful-in-expectation: expected payoff maximized by truth."""
    return _evaluate("tie", _dsic_checks(mech, space, method), [Identity()], method, tol)


def audit_risk_averse(mech, space: TypeSpace, utilities=None, method=EXACT, tol=1e-9) -> AuditReport:
    """Dominant-strategy IC for each utility in the battery."""
    utilities = default_battery() if utilities is None else list(utilities)
    return _evaluate("risk-averse", _dsic_checks(mech, space, method), utilities, method, tol)


def audit_apx(mech, space: TypeSpace, utilities=None, epsilon=0.0, tol=1e-9,
              method=EXACT) -> AuditReport:
    """``E[u(truth)] >= (1 - epsilon) * E[u(deviation)] - tol``.

    Checks touching negative utility values fall back to ``epsilon = 0``
    and the report is flagged.
    """
    if not 0.0 <= epsilon < 1.0:
        raise InputError("epsilon must lie in [0, 1)")
    utilities = default_battery() if utilities is None else list(utilities)
    return _evaluate("apx", _dsic_checks(mech, space, method), utilities, method, tol,
                     factor=1.0 - epsilon, apx=True)


def audit_bic(mech, prior, space: TypeSpace | None = None, method=EXACT, tol=1e-9,
              risk_averse=False, utilities=None) -> AuditReport:
    """Interim check against a product prior (truth is a Bayes-Nash equilibrium).

    ``space`` supplies each player's types and deviations; by default the
    prior's support.
    """
    if prior is None:
        raise InputError("Bayesian audit needs a prior")
    if space is None:
        space = TypeSpace(tuple(tuple(v for v, _ in d) for d in prior))
    if risk_averse:
        utilities = default_battery() if utilities is None else list(utilities)
    else:
        utilities = [Identity()]
    checks = []
    for i in range(mech.n_players):
        others = list(_others_profiles(prior, i))

        def interim(report, true_v):
            parts = []
            for p, prof in others:
                reports = tuple(report if j == i else prof[j] for j in range(mech.n_players))
                parts.append((p, payoff_lottery(mech, reports, true_v, i, method)))
            return PayoffLottery.mixture(parts)

        for v in space.grids[i]:
            truth = interim(v, v)
            for dev in space.grids[i]:
                if dev == v:
                    continue
                # witness profile: own type, others left unspecified
                checks.append((i, (v,), dev, truth, interim(dev, v)))
    return _evaluate("bic" + ("-risk-averse" if risk_averse else ""), checks, utilities,
                     method, tol)


def recheck_witness(mech, witness: Witness, method=EXACT) -> float:
    """Recompute a DSIC witness margin (factor 1) from its own tuple."""
    if witness.utility_model is None:
        raise InputError("witness carries no utility model")
    profile = tuple(witness.true_profile)
    i = witness.player
    truth = payoff_lottery(mech, profile, profile[i], i, method)
    dev = payoff_lottery(mech, _replace(profile, i, witness.deviation), profile[i], i, method)
    u = witness.utility_model
    return truth.expect(u)[0] - dev.expect(u)[0]


def verify_transform_claims(base, transformed, space: TypeSpace, seeds=range(16),
                            tol=1e-12) -> AuditReport:
    """Structural checks of the transform on every profile in ``space``:

    (a) expected payment per player unchanged; (b) truthful payoff constant
    across coin outcomes; (c) identical allocations for every seed;
    (d) expected revenue unchanged.
    """
    if not base.supports_exact:
        raise UnsupportedMethodError("claims verification needs an exact oracle on the base")
    seeds = list(seeds)
    gaps = {"expected_payment": 0.0, "truthful_payoff_spread": 0.0,
            "allocation_mismatches": 0, "revenue": 0.0}
    witnesses = []
    n = 0

    def flag(claim, profile, i, amount):
        witnesses.append(Witness(i, profile, None, claim, -float(amount), 0.0, 0.0))

    for profile in space.profiles():
        rev_base = rev_new = 0.0
        for i in range(base.n_players):
            ob = base.player_outcomes(profile, i)
            on = transformed.player_outcomes(profile, i)
            ep_base = sum(p * t for p, _, t in ob)
            ep_new = sum(p * t for p, _, t in on)
            rev_base += ep_base
            rev_new += ep_new
            gap = abs(ep_new - ep_base)
            gaps["expected_payment"] = max(gaps["expected_payment"], gap)
            if gap > tol:
                flag("expected_payment", profile, i, gap)
            payoffs = [profile[i].value(b) - t for p, b, t in on if p > 0]
            for s in seeds:
                r = run(transformed, profile, s)
                payoffs.append(profile[i].value(r.allocation[i]) - r.payments[i])
            spread = max(payoffs) - min(payoffs)
            gaps["truthful_payoff_spread"] = max(gaps["truthful_payoff_spread"], spread)
            if spread > tol:
                flag("truthful_payoff_spread", profile, i, spread)
            n += 2
        for s in seeds:
            if run(base, profile, s).allocation != run(transformed, profile, s).allocation:
                gaps["allocation_mismatches"] += 1
                flag("allocation_equality", profile, -1, 1.0)
        gap = abs(rev_new - rev_base)
        gaps["revenue"] = max(gaps["revenue"], gap)
        if gap > tol:
            flag("revenue", profile, -1, gap)
        n += len(seeds) + 1
    witnesses.sort(key=Witness.sort_key)
    worst = -max(gaps["expected_payment"], gaps["truthful_payoff_spread"], gaps["revenue"],
                 float(gaps["allocation_mismatches"]))
    return AuditReport("claims", "fail" if witnesses else "pass", worst, witnesses, "exact",
                       tol, n, [], {"max_deviation": gaps, "seeds": seeds})
