import numpy as np
import pytest

from conftest import S
from riskaudit.core import (EXACT, Enumerable, Instance, MonteCarlo, expected_payoff,
                            payoff_samples, run)
from riskaudit.errors import InputError, UnsupportedMethodError
from riskaudit.instance_io import load_fixture
from riskaudit.mechanisms import SINGLE_ITEM, make_coverage_auction, make_second_price


def test_second_price_run_any_seed():
    mech = make_second_price(2)
    for seed in (0, 1, 99):
        r = run(mech, (S(5), S(3)), seed)
        assert r.allocation == (frozenset({SINGLE_ITEM}), frozenset())
        assert r.payments == (3.0, 0.0)


def test_forced_coin_allocates(pay2_lottery):
    r = run(pay2_lottery, (S(10),), coin=0.0)
    assert r.allocation[0] == {SINGLE_ITEM}
    assert run(pay2_lottery, (S(10),), coin=0.5).allocation[0] == frozenset()


def test_allocation_frequency_over_seeds(pay2_lottery):
    hits = sum(bool(run(pay2_lottery, (S(10),), seed).allocation[0]) for seed in range(1000))
    assert abs(hits / 1000 - 0.5) <= 0.05


def test_shape_mismatch(pay2_lottery):
    with pytest.raises(InputError):
        run(pay2_lottery, (S(1), S(2)), 0)


def test_replay_is_bit_identical():
    f = load_fixture("coverage_2x2")
    mech = f.build_mechanism()
    reps = f.instance.true_valuations
    first = run(mech, reps, 42)
    for _ in range(3):
        again = run(mech, reps, 42)
        assert again.allocation == first.allocation
        assert again.payments == first.payments
        assert np.array_equal(again.coin, first.coin)


def test_expected_payoff_examples(pay2_lottery):
    assert expected_payoff(pay2_lottery, (S(10),), (S(10),), 0) == 3.0
    sp = make_second_price(2)
    assert expected_payoff(sp, (S(5), S(3)), (S(5), S(3)), 0) == 2.0


def test_monte_carlo_lottery(pay2_lottery):
    est = expected_payoff(pay2_lottery, (S(10),), (S(10),), 0, MonteCarlo(10_000, 7))
    assert abs(est - 3) <= 0.2


def test_exact_on_streamed_without_closed_form_is_unsupported():
    from riskaudit.core import Mechanism, Streamed

    class Coinflip(Mechanism):
        name = "coinflip"
        n_players = 1
        items = (SINGLE_ITEM,)
        coin_model = Streamed(lambda rng: rng.random())

        def allocate(self, reports, coin):
            return (frozenset({SINGLE_ITEM}) if coin < 0.5 else frozenset(),)

        def pay(self, reports, coin, allocation):
            return (0.0,)

    with pytest.raises(UnsupportedMethodError):
        expected_payoff(Coinflip(), (S(1),), (S(1),), 0)
    assert abs(expected_payoff(Coinflip(), (S(1),), (S(1),), 0, MonteCarlo(4000, 1)) - 0.5) < 0.05


def test_monte_carlo_needs_samples():
    with pytest.raises(InputError):
        MonteCarlo(0)


def test_enumerable_must_sum_to_one():
    with pytest.raises(InputError):
        Enumerable(((0, 0.3), (1, 0.3)))


@pytest.mark.parametrize("name", ["lottery", "lottery_taxation", "lottery_steep",
                                  "second_price", "coverage_sym"])
def test_monte_carlo_converges_to_exact(name):
    f = load_fixture(name)
    mech = f.build_mechanism()
    n = 100_000 if f.instance.items == (SINGLE_ITEM,) and name.startswith("lottery") else 20_000
    for profile in f.type_space().profiles():
        for i in range(mech.n_players):
            exact = expected_payoff(mech, profile, profile, i, EXACT)
            xs = payoff_samples(mech, profile, profile[i], i, n, 5)
            sigma = xs.std()
            assert abs(xs.mean() - exact) <= 5 * sigma / np.sqrt(n) + 1e-12


def test_realizations_feasible():
    f = load_fixture("coverage_3x3")
    mech = f.build_mechanism()
    for seed in range(50):
        r = run(mech, f.instance.true_valuations, seed)  # run() asserts disjointness
        assert sum(len(b) for b in r.allocation) <= len(f.instance.items)


def test_instance_validation():
    with pytest.raises(InputError):
        Instance(1, ("item",), (S(1),), prior=(((S(1), 0.4), (S(2), 0.4)),))
