import itertools
from fractions import Fraction
from math import comb

import pytest
from hypothesis import given, settings, strategies as st

from ergoflow.errors import ValidationError
from ergoflow.spaces import (QuotientCylinder, SequenceSpec, constant, cylinder_measure, digits_measure,
                             divergent_dyadic, dyadic, is_lacunary, mixed, quotient_pushforward,
                             quotient_pushforward_check, toy2, validate_spec)

HALF = Fraction(1, 2)


def test_toy2_lacunary_and_partial_sums():
    report = validate_spec(toy2())
    assert report.lacunary == (True, True)
    assert report.partial_sums == (HALF, Fraction(9, 16))


@pytest.mark.parametrize("blocks", [
    ((1, HALF), (1, HALF)),          # lambda not decreasing
    ((2, HALF), (2, Fraction(1, 8))),  # l_1 != 1
    ((1, HALF), (1, Fraction(1))),    # lambda = 1
    ((1, Fraction(0)),),
])
def test_invariants(blocks):
    with pytest.raises(ValidationError):
        SequenceSpec(blocks)


def test_cylinder_measures():
    spec = toy2()
    assert digits_measure(spec, ()) == 1
    assert cylinder_measure(QuotientCylinder(spec, (1,))) == Fraction(4, 9)
    assert cylinder_measure(QuotientCylinder(spec, (0, 1))) == Fraction(4, 9) * Fraction(131072, 1185921)


def test_pushforward_toy2():
    rep = quotient_pushforward(toy2(), 1)
    assert rep.ok and rep.quotient == (Fraction(4, 9), Fraction(4, 9), Fraction(1, 9))
    assert quotient_pushforward_check(toy2(), 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.builds(Fraction, st.integers(1, 20), st.integers(21, 60)))
def test_hat_distribution_is_pushforward(l, lam):
    spec = constant(1, l, lam)
    dist = spec.hat_distribution(1)
    assert sum(dist) == 1
    assert quotient_pushforward_check(spec, 1)
    assert all(dist[i] == comb(2 * l, i) * lam ** i / (1 + lam) ** (2 * l) for i in range(2 * l + 1))


def test_presets_are_lacunary():
    assert is_lacunary(dyadic([1, 1, 2, 2]), 4)
    assert is_lacunary(mixed(), 4)
    assert validate_spec(divergent_dyadic(3)).all_lacunary
    assert not is_lacunary(constant(5), 3)


def test_full_log2_margin_fails_at_first_block():
    spec = SequenceSpec(toy2().blocks, epsilon0=type(toy2().epsilon0).log_inverse(HALF),
                        relations=toy2().relations)
    assert validate_spec(spec).lacunary == (False, True)


def test_digit_ranges():
    spec = toy2()
    spec.check_digits((2, 4))
    for bad in [(3,), (0, 5), (-1,)]:
        with pytest.raises(ValidationError):
            spec.check_digits(bad)


def test_brute_measure_of_class():
    spec = toy2()
    total = sum(digits_measure(spec, d) for d in itertools.product(range(3), range(5)))
    assert total == 1
