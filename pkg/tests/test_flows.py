import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ergoflow.errors import Boundary, ResidueMismatch, TimeOutOfRange, ValidationError
from ergoflow.flows import (FlowPoint, QuotientString, ceiling, class_members, cocycle_and_rn,
                            cocycle_form, flow_apply, orbit_order, predecessor, successor)
from ergoflow.numerics import LogLinearForm, Ordering, compare
from ergoflow.spaces import constant, dyadic, mixed, toy2

from flow_cases import check_laws

HALF = Fraction(1, 2)
TOY = toy2()


def log2(c):
    return LogLinearForm.term(1, HALF, -c)


def q(*digits, spec=TOY):
    return QuotientString(spec, digits)


def same(a, b, spec=TOY):
    return compare(a, b, spec.relations) == Ordering.EQUAL


def test_orbit_order_toy2():
    order = [z.digits for z in orbit_order(TOY, 2, 0)]
    assert order == [(0, 0), (2, 1), (1, 2), (0, 3), (2, 4)]
    assert len(list(class_members(TOY, 2, 0))) == 5


@pytest.mark.parametrize("method", ["order", "enumerate", "auto"])
def test_successor_ceilings(method):
    nxt, xi = successor(q(1, 2), method)
    assert nxt == q(2, 1) and same(xi, log2(4))
    nxt, xi = successor(q(2, 1), method)
    assert nxt == q(0, 0) and same(xi, log2(7))
    with pytest.raises(Boundary):
        successor(q(0, 0), method)
    with pytest.raises(Boundary):
        predecessor(q(2, 4), method)


@pytest.mark.parametrize("spec", [dyadic([1, 1, 2]), mixed()])
def test_order_walk_matches_enumeration(spec):
    depth = min(3, len(spec))
    for r in range(3):
        order = orbit_order(spec, depth, r)
        for a, b in zip(order, order[1:]):
            assert successor(b, "order")[0] == a
            assert successor(b, "enumerate")[0] == a
            assert predecessor(a, "order") == (b, ceiling(b, "order"))


def test_non_lacunary_ties_are_reported():
    spec = constant(3)
    with pytest.raises(ValidationError):
        successor(q(2, 2, 2, spec=spec), "enumerate")


def test_cocycle_and_rn():
    form, rn = cocycle_and_rn(q(1, 2), q(2, 1))
    assert same(form, log2(4)) and rn == Fraction(16, 3)
    form, rn = cocycle_and_rn(q(1, 2), q(1, 2))
    assert form.is_zero and rn == 1
    with pytest.raises(ResidueMismatch):
        cocycle_and_rn(q(0, 0), q(1, 0))


def test_flow_examples():
    p = FlowPoint(q(1, 2))
    image, rn = flow_apply(p, LogLinearForm.zero())
    assert image == p and rn == 1
    s = cocycle_form(q(1, 2), q(2, 1))
    image, rn = flow_apply(p, s)
    assert image.base == q(2, 1) and image.time.is_zero and rn == Fraction(16, 3)
    back, rn_back = flow_apply(image, -s)
    assert back == p and rn * rn_back == 1
    image, rn = flow_apply(FlowPoint(q(2, 1)), log2(7))
    assert image.base == q(0, 0) and image.time.is_zero and rn == 32


def test_flow_inside_fiber_and_semigroup():
    p = FlowPoint(q(1, 2))
    a, _ = flow_apply(p, log2(1))
    assert a.base == q(1, 2) and same(a.time, log2(1))
    b, _ = flow_apply(a, log2(3))
    c, _ = flow_apply(p, log2(4))
    assert b.base == c.base == q(2, 1) and b.time.is_zero


def test_time_out_of_range():
    with pytest.raises(TimeOutOfRange):
        flow_apply(FlowPoint(q(1, 2), log2(5)), LogLinearForm.zero())
    with pytest.raises(TimeOutOfRange):
        flow_apply(FlowPoint(q(1, 2), log2(-1)), LogLinearForm.zero())
    with pytest.raises(ValidationError):
        FlowPoint(q(1, 2), delta=1)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_flow_laws(seed):
    res = check_laws(random.Random(seed))
    assert res.additivity and res.chain_rule and res.compatibility
    assert res.roundtrip
