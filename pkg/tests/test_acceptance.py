"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]`` / ``[FAIL]`` line (visible under
``pytest -v``) before asserting, so a run log doubles as a scorecard.
"""

import time

import numpy as np
import pytest

from conftest import S
from oracles import brute_expected_value, central_difference, random_feasible
from riskaudit import _kernels
from riskaudit.audit import (TypeSpace, audit_apx, audit_bic, audit_risk_averse, audit_tie,
                             verify_transform_claims)
from riskaudit.cli import main
from riskaudit.core import EXACT, Enumerable, profile_key
from riskaudit.instance_io import fixture_path, load_fixture
from riskaudit.mechanisms import make_lottery
from riskaudit.transform import (estimated_payoff_table, interim_payoff, transform,
                                 transform_bayesian)
from riskaudit.utility import CARA, Identity, default_battery
from riskaudit.valuations import CoverageValuation, expected_value_product
from riskaudit.welfare import CoverageProblem, expected_welfare, maximize_expected_welfare

LOTTERIES = ["lottery", "lottery_taxation", "lottery_steep", "lottery_small_stakes"]
ENUMERABLE = LOTTERIES + ["second_price"]
COVERAGE = ["coverage_2x2", "coverage_3x3", "coverage_sym"]


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, text):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}")
        assert ok, text
    return emit


def test_criterion_1_transform_makes_tie_mechanisms_risk_averse_ic(verdict):
    start = time.perf_counter()
    rows, ok = [], True
    for name in ENUMERABLE + ["coverage_2x2"]:
        f = load_fixture(name)
        base, space = f.build_mechanism(), f.type_space()
        floor = -1e-3 if name.startswith("coverage") else -1e-9
        tie = audit_tie(base, space, tol=-floor)
        ra = audit_risk_averse(transform(base), space, default_battery(), tol=-floor)
        good = tie.passed and ra.passed and ra.worst_margin >= floor
        ok &= good
        rows.append(f"{name}={ra.worst_margin:.3g}")
    elapsed = time.perf_counter() - start
    ok &= elapsed <= 60
    verdict(1, ok, f"worst margins {', '.join(rows)}; {elapsed:.1f}s (limit 60s)")


def test_criterion_2_untransformed_lottery_counterexample(verdict):
    u = CARA(1)
    expected = (u(9.0) + u(-1.0)) / 2 - u(0.0)
    mech = make_lottery([(0, 0, 0), (5, 0.5, 1)])
    rep = audit_risk_averse(mech, TypeSpace.of([S(1), S(10)]), [u])
    w = rep.witnesses[0] if rep.witnesses else None
    ok = (rep.verdict == "fail" and w is not None and w.true_profile == (S(10),)
          and abs(w.margin - expected) <= 1e-3 and abs(w.margin - (-0.359)) <= 1e-3)
    verdict(2, ok, f"verdict {rep.verdict}, witness margin "
                   f"{w.margin if w else float('nan'):.6f} (hand value {expected:.6f})")


def test_criterion_3_transform_claims(verdict):
    worst = {"expected_payment": 0.0, "truthful_payoff_spread": 0.0,
             "allocation_mismatches": 0, "revenue": 0.0}
    ok = True
    for name in ENUMERABLE:
        f = load_fixture(name)
        base = f.build_mechanism()
        assert isinstance(base.coin_model, Enumerable)
        rep = verify_transform_claims(base, transform(base), f.type_space(), range(32), 1e-12)
        ok &= rep.passed
        for k, v in rep.details["max_deviation"].items():
            worst[k] = max(worst[k], v)
    ok &= worst["allocation_mismatches"] == 0
    ok &= max(worst["expected_payment"], worst["truthful_payoff_spread"], worst["revenue"]) <= 1e-12
    verdict(3, ok, f"{len(ENUMERABLE)} mechanism pairs; max deviations {worst}")


def _hand_second_price(i, own, other):
    """Second price for two players, ties to player 0: (win, price)."""
    win = own > other or (own == other and i == 0)
    return win, (other if win else 0.0)


def _hand_interim(prior_other, i, true_v, report):
    """Interim payoff under the interim-transformed second price, by hand."""
    def pi(r):
        return sum(q * (r * w - p) for v, q in prior_other
                   for w, p in [_hand_second_price(i, r, v)])
    outcomes = []
    for v, q in prior_other:
        win, _ = _hand_second_price(i, report, v)
        payment = report * win - pi(report)
        outcomes.append((q, true_v * win - payment))
    return outcomes


def test_criterion_4_bayesian_transform(verdict):
    f = load_fixture("second_price_bayes")
    sp, prior = f.build_mechanism(), f.instance.prior
    tb = transform_bayesian(sp, prior)
    pi1 = interim_payoff(sp, prior, S(2), 0)
    spread = 0.0
    for i in range(2):
        others = prior[1 - i]
        for v, _ in prior[i]:
            payoffs = []
            for o, q in others:
                reps = (v, o) if i == 0 else (o, v)
                payoffs += [v.value(b) - pay for p, b, pay in tb.player_outcomes(reps, i) if p > 0]
            spread = max(spread, max(payoffs) - min(payoffs))
    ra = audit_bic(tb, prior, risk_averse=True, utilities=default_battery())
    neutral = audit_bic(tb, prior, utilities=[Identity()])

    # hand enumeration of every interim margin under Identity
    plain = [[(v.amount, q) for v, q in d] for d in prior]
    hand = []
    for i in range(2):
        for t, _ in plain[i]:
            truth = sum(q * x for q, x in _hand_interim(plain[1 - i], i, t, t))
            for r, _ in plain[i]:
                if r != t:
                    hand.append(truth - sum(q * x for q, x in _hand_interim(plain[1 - i], i, t, r)))
    ok = (abs(pi1 - 1.0) <= 1e-12 and spread <= 1e-12 and ra.passed and neutral.passed
          and abs(neutral.worst_margin - min(hand)) <= 1e-12)
    verdict(4, ok, f"Pi_1(2) = {pi1:.12g}, truthful interim spread {spread:.1e}, "
                   f"battery verdict {ra.verdict}, worst margin {neutral.worst_margin:.12g} "
                   f"vs hand {min(hand):.12g}")


def test_criterion_5_multiplicative_vs_additive_error(verdict):
    eps = 0.1
    big = load_fixture("lottery")
    small = load_fixture("lottery_small_stakes")
    outcome = {}
    for label, sign in (("under", -1), ("over", +1)):
        base = big.build_mechanism()
        profiles = [tuple(p) for p in big.type_space().profiles()]
        table = estimated_payoff_table(base, profiles, EXACT).perturbed(
            lambda key, i, m, s=sign: m * (1 + s * eps))
        rep = audit_apx(transform(base, table=table), big.type_space(), epsilon=eps)
        outcome[label] = rep

    # same absolute error, eps times the big player's truthful payoff
    pi_big = estimated_payoff_table(big.build_mechanism(), [big.instance.true_valuations],
                                    EXACT).lookup(big.instance.true_valuations, 0)
    delta = eps * pi_big

    def shifted(f):
        base = f.build_mechanism()
        truth = profile_key(f.instance.true_valuations)
        table = estimated_payoff_table(base, [tuple(p) for p in f.type_space().profiles()],
                                       EXACT).perturbed(
            lambda key, i, m: m - delta if key == truth else m)
        return base, audit_apx(transform(base, table=table), f.type_space(), epsilon=eps)

    small_base, small_rep = shifted(small)
    _, big_rep = shifted(big)
    pi_small = estimated_payoff_table(small_base, [small.instance.true_valuations],
                                      EXACT).lookup(small.instance.true_valuations, 0)
    ratio = pi_big / pi_small
    ok = (outcome["under"].passed and outcome["over"].passed and big_rep.passed
          and small_rep.verdict == "fail" and abs(ratio - 100) <= 1e-9)
    verdict(5, ok, f"eps={eps}: -eps*Pi {outcome['under'].verdict}, +eps*Pi "
                   f"{outcome['over'].verdict}; shift {delta:g} on Pi={pi_big:g} "
                   f"{big_rep.verdict}, on Pi={pi_small:g} ({ratio:.0f}x smaller) "
                   f"{small_rep.verdict}; flags {sorted(set(small_rep.flags) | set(big_rep.flags))}")


def test_criterion_6_optimizer(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    fd_err = concave_gap = dominance_gap = 0.0
    for name in COVERAGE:
        f = load_fixture(name)
        prob = CoverageProblem(list(f.instance.true_valuations), f.instance.items)
        args = (prob.eplayer, prob.eweight, prob.emask)
        for _ in range(100):
            x = random_feasible(rng, *prob.shape)
            fd = central_difference(lambda z: _kernels.welfare(z, *args), x, h=1e-5)
            fd_err = max(fd_err, float(np.abs(_kernels.welfare_and_grad(x, *args)[1] - fd).max()))
        for _ in range(1000):
            x, y = random_feasible(rng, *prob.shape), random_feasible(rng, *prob.shape)
            wx, wy = expected_welfare(x, prob), expected_welfare(y, prob)
            for lam in (0.25, 0.5, 0.75):
                gap = lam * wx + (1 - lam) * wy - expected_welfare(lam * x + (1 - lam) * y, prob)
                concave_gap = max(concave_gap, gap)
        best = expected_welfare(maximize_expected_welfare(prob, params=f.optimizer), prob)
        for _ in range(1000):
            dominance_gap = max(dominance_gap,
                                expected_welfare(random_feasible(rng, *prob.shape), prob) - best)
    unit = CoverageValuation.from_sets({"1": ["a"]})
    x = maximize_expected_welfare([unit, unit], ["1"])
    sym = abs(x[0, 0] - x[1, 0])
    elapsed = time.perf_counter() - start
    ok = (fd_err <= 1e-4 and concave_gap <= 1e-9 and dominance_gap <= 0
          and sym <= 1e-4 and elapsed <= 30)
    verdict(6, ok, f"fd err {fd_err:.1e}, concavity gap {concave_gap:.1e}, dominance gap "
                   f"{dominance_gap:.1e}, |x1-x2| {sym:.1e}; {elapsed:.1f}s (limit 30s)")


def _plain(v, items):
    universe = dict(v.universe)
    sets = {it: set() for it in items}
    sets.update({it: set(el) for it, el in v.item_sets})
    return universe, sets


def test_criterion_7_oracle_equivalence(verdict):
    rng = np.random.default_rng(7)
    closed_err, n_vals = 0.0, 0
    for name in COVERAGE:
        f = load_fixture(name)
        items = f.instance.items
        assert len(items) <= 4
        vals = set(f.instance.true_valuations)
        for g in f.grids or ():
            vals |= set(g)
        for v in vals:
            n_vals += 1
            universe, sets = _plain(v, items)
            for _ in range(50):
                q = dict(zip(items, rng.random(len(items))))
                closed_err = max(closed_err, abs(expected_value_product(v, q)
                                                 - brute_expected_value(universe, sets, q)))

    n = 100_000
    z_scores = []
    for name in COVERAGE:
        f = load_fixture(name)
        mech = f.build_mechanism()
        reps = f.instance.true_valuations
        items = mech.items
        closed = expected_welfare(mech.fractional_allocation(reps), list(reps), items)
        winners = mech.winners(reps, rng.random((n, len(items))))
        realized = np.zeros(n)
        for i, v in enumerate(reps):
            owned = winners == i
            codes = owned @ (1 << np.arange(len(items)))
            table = np.array([v.value([it for k, it in enumerate(items) if mask >> k & 1])
                              for mask in range(1 << len(items))])
            realized += table[codes]
        sigma = realized.std(ddof=1)
        bound = 5 * sigma / np.sqrt(n)
        z_scores.append(abs(realized.mean() - closed) / bound if bound else 0.0)
    ok = closed_err <= 1e-9 and max(z_scores) <= 1.0
    verdict(7, ok, f"closed form vs enumeration max err {closed_err:.1e} over {n_vals} "
                   f"valuations; sampler/closed-form gap at most "
                   f"{max(z_scores):.2f} of the 5 sigma/sqrt(n) bound (n={n})")


RUNS = [
    ["audit", "--mode", "risk-averse", "--in", "lottery"],
    ["audit", "--mode", "risk-averse", "--method", "montecarlo", "--samples", "3000",
     "--in", "lottery_taxation"],
    ["audit", "--mode", "apx", "--epsilon", "0.1", "--samples", "2000", "--in", "lottery"],
    ["audit", "--mode", "claims", "--in", "coverage_2x2"],
    ["audit", "--mode", "bic", "--transform", "bayesian", "--risk-averse",
     "--in", "second_price_bayes"],
    ["transform", "--method", "montecarlo", "--samples", "1000", "--then-audit", "tie",
     "--in", "lottery_steep"],
    ["run", "--seed", "11", "--in", "coverage_3x3"],
    ["optimize", "--in", "coverage_2x2"],
]


def test_criterion_8_cli_determinism(verdict, tmp_path, capsys):
    identical = 0
    for k, argv in enumerate(RUNS):
        argv = argv[:-1] + [str(fixture_path(argv[-1]))]
        blobs = []
        for rep in range(3):
            out = tmp_path / f"{k}-{rep}.json"
            main(argv + ["--seed", "5", "--out", str(out)] if "--seed" not in argv
                 else argv + ["--out", str(out)])
            blobs.append(out.read_bytes())
        identical += all(b == blobs[0] for b in blobs)
    capsys.readouterr()
    verdict(8, identical == len(RUNS),
            f"{identical}/{len(RUNS)} commands byte-identical across 3 runs")
