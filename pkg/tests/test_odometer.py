import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ergoflow.errors import EnumerationTooLarge, PrefixTooShort, ValidationError
from ergoflow.odometer import (AdicPrefix, BlockCoordinate, OdometerSpec, adic_coding_check, block_projection,
                               constant_ceiling_flow, cylinder_step, cylinder_step_inverse,
                               measure_preservation_check, odometer_step, odometer_step_inverse, project,
                               projection_pushforward_check, recurrence_stats, refinement_check,
                               refinement_indices, tower)

K2 = OdometerSpec(2, 2)


def pt(*digits, tail=None, k=2):
    return AdicPrefix(k, digits, tail)


def test_step_examples():
    assert odometer_step(pt(0, 1, 2, 0)).digits == (1, 2, 2, 0)
    assert odometer_step(pt(1, 2, 2, 2, tail=2)) == pt(0, 0, 0, 0, tail=0)
    assert odometer_step(pt(0, 2, 1)).digits == (1, 0, 2)


def test_prefix_too_short():
    with pytest.raises(PrefixTooShort):
        odometer_step(pt(0, 2, 2))
    with pytest.raises(PrefixTooShort):
        odometer_step_inverse(pt(0, 0, 0))
    assert odometer_step(pt(0, 2, 2, tail=0)) == pt(1, 0, 0, 1, tail=0)


@settings(max_examples=200)
@given(st.integers(2, 4), st.data())
def test_inverse_roundtrip(k, data):
    n = data.draw(st.integers(0, 6))
    digits = [data.draw(st.integers(0, k - 1))] + [data.draw(st.integers(0, k)) for _ in range(n)]
    tail = data.draw(st.sampled_from([0, k]))
    p = AdicPrefix(k, digits, tail)
    assert odometer_step_inverse(odometer_step(p)).extended(20).digits[:20] == p.extended(20).digits[:20]
    assert odometer_step(odometer_step_inverse(p)).extended(20).digits[:20] == p.extended(20).digits[:20]
    c = AdicPrefix(k, digits)
    assert cylinder_step_inverse(cylinder_step(c)) == c


@settings(max_examples=100)
@given(st.data())
def test_point_step_lies_in_cylinder_image(data):
    k = data.draw(st.integers(2, 3))
    n = data.draw(st.integers(0, 5))
    digits = [data.draw(st.integers(0, k - 1))] + [data.draw(st.integers(0, k)) for _ in range(n)]
    tail = data.draw(st.sampled_from([0, k]))
    image = odometer_step(AdicPrefix(k, digits, tail)).extended(n + 1)
    assert image.digits[: n + 1] == cylinder_step(AdicPrefix(k, digits)).digits


def test_towers():
    assert tower(K2, 0).cells == ((0,), (1,))
    assert tower(K2, 1).cells == ((0, 0), (1, 1), (0, 2), (1, 0), (0, 1), (1, 2))
    level1 = tower(K2, 1)
    assert {level1.cells[j] for j in refinement_indices(K2, 0, 0)} == {(0, 0), (0, 1), (0, 2)}
    for k in (2, 3):
        spec = OdometerSpec(2, k)
        for n in range(4):
            assert tower(spec, n).period == k * (k + 1) ** n
        assert all(refinement_check(spec, n) for n in range(3))


def test_tower_guard():
    with pytest.raises(EnumerationTooLarge):
        tower(OdometerSpec(2, 3), 12)


@pytest.mark.parametrize("k", [2, 3])
def test_adic_coding(k):
    spec = OdometerSpec(2, k)
    assert adic_coding_check(spec, 0)
    assert adic_coding_check(spec, 1)
    assert adic_coding_check(spec, 4)
    assert measure_preservation_check(spec, 5)


def test_block_masses():
    spec = OdometerSpec(2, 2)
    assert spec.r(1) == 8 and [spec.block_size(1, j) for j in range(3)] == [64, 8, 1]
    assert block_projection(spec, 1, BlockCoordinate(1, 0, 63)) == (0, Fraction(1, 3))
    assert block_projection(spec, 0, BlockCoordinate(0, 1, 0)) == (1, Fraction(1, 2))
    with pytest.raises(ValidationError):
        block_projection(spec, 1, BlockCoordinate(1, 1, 8))
    assert spec.space_size(1) == 8 + 64 + 1


def test_projection_pushforward_big_levels():
    for lam in (2, 3):
        for k in (2, 3):
            spec = OdometerSpec(lam, k)
            assert all(projection_pushforward_check(spec, n) for n in range(4))
    assert OdometerSpec(2, 2).r(2) == 2 ** 9


def test_project_indices():
    spec = OdometerSpec(2, 2)
    assert project(spec, [1, 64, 2 ** 18, 72]).digits == (1, 1, 1, 0)
    assert BlockCoordinate.from_index(spec, 1, 72) == BlockCoordinate(1, 2, 0)
    with pytest.raises(ValidationError):
        BlockCoordinate.from_index(spec, 1, 73)


def test_recurrence():
    rep = recurrence_stats(K2, 1000, 100, seed=5)
    assert rep.minimum >= 1
    assert abs(rep.frequency[0] - Fraction(1, 2)) < Fraction(1, 10)
    again = recurrence_stats(K2, 1000, 100, seed=5)
    assert again == rep
    assert recurrence_stats(K2, 10, 1, seed=1).horizon == 1


def test_identical_pair_hits_every_time():
    import numpy as np
    from ergoflow.odometer import hit_matrix
    z = np.array([[0, 1, 2, 0, 2]])
    assert hit_matrix(K2, z, z).sum() == 5


def test_constant_ceiling_flow():
    p = pt(0, 1, 2, 0, tail=0)
    assert constant_ceiling_flow(K2, p, 0, 1) == (odometer_step(p), 0)
    assert constant_ceiling_flow(K2, p, Fraction(3, 4), Fraction(1, 2)) == (odometer_step(p), Fraction(1, 4))
    assert constant_ceiling_flow(K2, p, 0, -1)[0] == odometer_step_inverse(p)
    with pytest.raises(ValidationError):
        constant_ceiling_flow(K2, p, 1, 0)


def test_flow_is_an_action():
    rng = random.Random(11)
    for _ in range(200):
        k = rng.choice([2, 3])
        spec = OdometerSpec(2, k)
        p = AdicPrefix(k, [rng.randrange(k)] + [rng.randrange(k + 1) for _ in range(4)], rng.choice([0, k]))
        t = Fraction(rng.randrange(8), 8)
        s1 = Fraction(rng.randrange(-40, 40), 8)
        s2 = Fraction(rng.randrange(-40, 40), 8)
        q1, t1 = constant_ceiling_flow(spec, p, t, s1)
        q2, t2 = constant_ceiling_flow(spec, q1, t1, s2)
        q3, t3 = constant_ceiling_flow(spec, p, t, s1 + s2)
        assert t2 == t3 and q2.extended(12).digits[:12] == q3.extended(12).digits[:12]


def test_spec_invariants():
    with pytest.raises(ValidationError):
        OdometerSpec(1, 2)
    with pytest.raises(ValidationError):
        AdicPrefix(2, (2,))
    with pytest.raises(ValidationError):
        AdicPrefix(2, (0, 3))
