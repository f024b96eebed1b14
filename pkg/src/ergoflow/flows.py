"""Mod-3 orbits on truncated quotient strings and the flow built under the ceiling.

Two depth-``m`` strings are in the same class when their digit sums agree
mod 3.  Along a class the log Radon-Nikodym cocycle is
``log delta(z', z) = sum((z'_i - z_i) log lam_i) = u(z) - u(z')`` with the
digit weight ``u(z) = sum(z_i * -log lam_i)``.  The first-return map ``T``
steps to the class member with the next smaller weight and the ceiling
``xi(z)`` is that weight gap.

The map is partial at every finite depth: stepping below the class minimum
or above the maximum raises :class:`Boundary` instead of wrapping around.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import prod
from typing import Iterator, Sequence

from .errors import Boundary, EnumerationTooLarge, ResidueMismatch, TimeOutOfRange, ValidationError
from .numerics import LogLinearForm, Ordering, compare
from .spaces import SequenceSpec, is_lacunary

ORBIT_ENUMERATION_LIMIT = 200_000
ZERO = LogLinearForm.zero()


@dataclass(frozen=True)
class QuotientString:
    spec: SequenceSpec
    digits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(self.digits))
        self.spec.check_digits(self.digits)

    @property
    def depth(self) -> int:
        return len(self.digits)

    @property
    def residue(self) -> int:
        return sum(self.digits) % 3

    def weight(self) -> LogLinearForm:
        """``u(z) = sum(z_i * -log lam_i)``, nonnegative."""
        return -self.spec.digit_form(self.digits)

    def padded(self, depth: int) -> QuotientString:
        return QuotientString(self.spec, self.digits + (0,) * (depth - len(self.digits)))


@dataclass(frozen=True)
class FlowPoint:
    """``(z, t)`` with ``t = time + delta * (fiber unit)``.

    The fiber unit is symbolic and smaller than every ceiling value, so
    ``delta`` only matters when ``time`` ties with a ceiling; it must lie
    in [0, 1).
    """

    base: QuotientString
    time: LogLinearForm = ZERO
    delta: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "delta", Fraction(self.delta))
        if not 0 <= self.delta < 1:
            raise ValidationError(f"fiber offset {self.delta} outside [0, 1)")


def _same_family(z: QuotientString, w: QuotientString) -> None:
    if z.spec != w.spec:
        raise ValidationError("strings belong to different specs")
    if z.depth != w.depth:
        raise ValidationError(f"depth mismatch: {z.depth} vs {w.depth}")


def cocycle_form(z: QuotientString, target: QuotientString) -> LogLinearForm:
    """``log delta(target, z)`` as an exact form."""
    _same_family(z, target)
    diff = [b - a for a, b in zip(z.digits, target.digits)]
    return z.spec.digit_form(diff)


def rn_ratio(z: QuotientString, target: QuotientString) -> Fraction:
    """``prod(nu_i(target_i) / nu_i(z_i))`` over the quotient marginals."""
    _same_family(z, target)
    spec = z.spec
    return prod((spec.hat_mass(i, b) / spec.hat_mass(i, a)
                 for i, (a, b) in enumerate(zip(z.digits, target.digits), start=1)),
                start=Fraction(1))


def cocycle_and_rn(z: QuotientString, target: QuotientString) -> tuple[LogLinearForm, Fraction]:
    _same_family(z, target)
    if z.residue != target.residue:
        raise ResidueMismatch(f"residues {z.residue} and {target.residue} differ")
    return cocycle_form(z, target), rn_ratio(z, target)


# ---------------------------------------------------------------------------
# first-return map


def _radices(spec: SequenceSpec, depth: int) -> list[int]:
    return [spec.radix(i) for i in range(1, depth + 1)]


def _colex_neighbour(digits: Sequence[int], radices: Sequence[int], step: int) -> tuple[int, ...] | None:
    """Next string in colex order (last coordinate most significant)."""
    out = list(digits)
    for i in range(len(out)):
        out[i] += step
        if 0 <= out[i] < radices[i]:
            return tuple(out)
        out[i] = radices[i] - 1 if step < 0 else 0
    return None


def _ordered_neighbour(z: QuotientString, step: int) -> QuotientString:
    # under lacunarity the weight order is colex order
    radices = _radices(z.spec, z.depth)
    digits = z.digits
    while True:
        digits = _colex_neighbour(digits, radices, step)
        if digits is None:
            raise Boundary(f"{z.digits} is extremal in its class at depth {z.depth}")
        if sum(digits) % 3 == z.residue:
            return QuotientString(z.spec, digits)


def class_members(spec: SequenceSpec, depth: int, residue: int) -> Iterator[tuple[int, ...]]:
    radices = _radices(spec, depth)
    total = prod(radices)
    if total > ORBIT_ENUMERATION_LIMIT:
        raise EnumerationTooLarge(f"{total} strings at depth {depth} exceed {ORBIT_ENUMERATION_LIMIT}")
    for digits in itertools.product(*(range(r) for r in radices)):
        if sum(digits) % 3 == residue:
            yield digits


def _enumerated_neighbour(z: QuotientString, step: int) -> QuotientString:
    spec, rel = z.spec, z.spec.relations
    wanted = Ordering.GREATER if step < 0 else Ordering.LESS
    best = best_gap = None
    tied = False
    for digits in class_members(spec, z.depth, z.residue):
        y = QuotientString(spec, digits)
        gap = cocycle_form(z, y)  # log delta(y, z) = u(z) - u(y)
        if compare(gap, ZERO, rel) != wanted:
            continue
        if best is None:
            best, best_gap = y, gap
            continue
        order = compare(gap, best_gap, rel)
        if order == Ordering.EQUAL:
            tied = True
        elif (order == Ordering.LESS) == (step < 0):
            best, best_gap, tied = y, gap, False
    if best is None:
        raise Boundary(f"{z.digits} is extremal in its class at depth {z.depth}")
    if tied:
        raise ValidationError(f"first-return target of {z.digits} is not unique; the sequence is not lacunary")
    return best


def _neighbour(z: QuotientString, step: int, method: str) -> QuotientString:
    if method == "auto":
        method = "order" if is_lacunary(z.spec, z.depth) else "enumerate"
    if method == "order":
        return _ordered_neighbour(z, step)
    if method == "enumerate":
        return _enumerated_neighbour(z, step)
    raise ValueError(f"unknown method {method!r}")


def successor(z: QuotientString, method: str = "auto") -> tuple[QuotientString, LogLinearForm]:
    """``(T(z), xi(z))``: the same-class string with the smallest positive cocycle.

    ``method="order"`` walks colex order, valid once the prefix is certified
    lacunary; ``"enumerate"`` scans the whole class with certified
    comparisons.  ``"auto"`` picks the first when lacunarity is certified.
    """
    nxt = _neighbour(z, -1, method)
    return nxt, cocycle_form(z, nxt)


def predecessor(z: QuotientString, method: str = "auto") -> tuple[QuotientString, LogLinearForm]:
    """``(T^-1(z), xi(T^-1(z)))``."""
    prev = _neighbour(z, +1, method)
    return prev, cocycle_form(prev, z)


def ceiling(z: QuotientString, method: str = "auto") -> LogLinearForm:
    return successor(z, method)[1]


def orbit_order(spec: SequenceSpec, depth: int, residue: int) -> list[QuotientString]:
    """Class members sorted by increasing weight, by certified comparison."""
    members = [QuotientString(spec, d) for d in class_members(spec, depth, residue)]

    def cmp(a: QuotientString, b: QuotientString) -> int:
        return int(compare(a.weight(), b.weight(), spec.relations))

    return sorted(members, key=functools.cmp_to_key(cmp))


# ---------------------------------------------------------------------------
# the flow


def flow_apply(p: FlowPoint, s: LogLinearForm, method: str = "auto") -> tuple[FlowPoint, Fraction]:
    """``F_s(p)`` and the Radon-Nikodym derivative of ``F_s`` at ``p``.

    The time coordinate absorbs ``s`` and each ceiling crossing applies
    ``T`` (or ``T^-1`` going backwards).  The derivative is the ratio of
    quotient marginals between the final and initial base strings.
    """
    z = p.base
    rel = z.spec.relations
    if compare(p.time, ZERO, rel) == Ordering.LESS:
        raise TimeOutOfRange(f"time {p.time!r} is negative")
    if p.time and compare(p.time, ceiling(z, method), rel) != Ordering.LESS:
        raise TimeOutOfRange(f"time {p.time!r} is not below the ceiling at {z.digits}")
    total = p.time + s
    while True:
        sign = compare(total, ZERO, rel)
        if sign == Ordering.LESS:
            z, xi = predecessor(z, method)
            total = total + xi
            continue
        if sign == Ordering.EQUAL:
            break
        nxt, xi = successor(z, method)
        # ties step forward: the fiber offset is nonnegative
        if compare(total, xi, rel) == Ordering.LESS:
            break
        total = total - xi
        z = nxt
    if not total.atoms(rel):
        total = ZERO
    return FlowPoint(z, total, p.delta), rn_ratio(p.base, z)
