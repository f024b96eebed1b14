"""Product Bernoulli spaces, their binomial quotient, and parameter sequences.

The bit space ``X`` carries ``2*l_n`` Bernoulli coordinates with odds
``lam_n`` in block ``n``.  Summing the bits of each block gives the quotient
space ``X^`` whose ``n``-th coordinate lives in ``{0, ..., 2*l_n}`` with the
binomial law ``C(2l, i) lam**i / (1 + lam)**(2l)``.  Everything dynamical is
done on the quotient; the bit space only appears in small enumerations.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import comb, prod
from typing import Sequence

from .errors import EnumerationTooLarge, ValidationError
from .numerics import (
    NO_RELATIONS,
    LogLinearForm,
    MultiplicativeRelations,
    Ordering,
    as_rational,
    compare,
)

BIT_ENUMERATION_LIMIT = 24


@dataclass(frozen=True)
class Epsilon0:
    """The lacunarity margin, ``scale * form``; must be positive."""

    scale: Fraction
    form: LogLinearForm

    def __post_init__(self):
        object.__setattr__(self, "scale", as_rational(self.scale))
        if self.scale <= 0:
            raise ValidationError("epsilon0 scale must be positive")

    @classmethod
    def log_inverse(cls, base, scale=1) -> Epsilon0:
        """``scale * log(1/base)``, stored on the reserved index 0."""
        return cls(as_rational(scale), LogLinearForm.term(0, as_rational(base), -1))


@dataclass(frozen=True)
class SequenceSpec:
    """Finite prefix of the block sequence ``(l_n, lam_n)``.

    With ``strict`` (the default) the prefix must satisfy ``l_1 = 1``,
    nondecreasing ``l`` and strictly decreasing ``lam``.  Relaxed specs are
    accepted by the purely combinatorial operations only.
    """

    blocks: tuple[tuple[int, Fraction], ...]
    epsilon0: Epsilon0 | None = None
    relations: MultiplicativeRelations = NO_RELATIONS
    strict: bool = True
    divergence_note: str | None = field(default=None, compare=False)

    def __post_init__(self):
        blocks = []
        for pos, block in enumerate(self.blocks, start=1):
            l, lam = block
            if isinstance(l, bool) or not isinstance(l, int) or l < 1:
                raise ValidationError(f"block {pos}: l must be a positive integer, got {l!r}")
            lam = as_rational(lam)
            if not 0 < lam < 1:
                raise ValidationError(f"block {pos}: lambda {lam} is not in (0, 1)")
            blocks.append((l, lam))
        if not blocks:
            raise ValidationError("a sequence spec needs at least one block")
        object.__setattr__(self, "blocks", tuple(blocks))
        if self.strict:
            if blocks[0][0] != 1:
                raise ValidationError(f"l_1 must equal 1, got {blocks[0][0]}")
            for n in range(1, len(blocks)):
                if blocks[n][0] < blocks[n - 1][0]:
                    raise ValidationError(f"l is not nondecreasing at block {n + 1}")
                if blocks[n][1] >= blocks[n - 1][1]:
                    raise ValidationError(f"lambda is not strictly decreasing at block {n + 1}")
        for index, _, _ in self.relations.declarations:
            if 1 <= index <= len(blocks):
                self.relations.rewrite(index, blocks[index - 1][1])

    def __len__(self) -> int:
        return len(self.blocks)

    def l(self, i: int) -> int:
        return self.blocks[i - 1][0]

    def lam(self, i: int) -> Fraction:
        return self.blocks[i - 1][1]

    def radix(self, i: int) -> int:
        """Number of quotient digits ``2*l_i + 1`` at coordinate ``i``."""
        return 2 * self.blocks[i - 1][0] + 1

    def log_lam(self, i: int, coeff: int = 1) -> LogLinearForm:
        return LogLinearForm.term(i, self.lam(i), coeff)

    def digit_form(self, digits: Sequence[int], start: int = 1) -> LogLinearForm:
        """``sum(d_i * log(lam_i))`` over coordinates ``start, start+1, ...``."""
        lams = [self.lam(start + k) for k in range(len(digits))]
        return LogLinearForm.from_digits(digits, lams, start)

    @cached_property
    def _mass_tables(self) -> tuple[tuple[Fraction, ...], ...]:
        tables = []
        for l, lam in self.blocks:
            norm = (1 + lam) ** (2 * l)
            tables.append(tuple(comb(2 * l, i) * lam ** i / norm for i in range(2 * l + 1)))
        return tuple(tables)

    def hat_mass(self, i: int, digit: int) -> Fraction:
        """Quotient marginal at coordinate ``i`` (1-based)."""
        return self._mass_tables[i - 1][digit]

    def hat_distribution(self, i: int) -> tuple[Fraction, ...]:
        return self._mass_tables[i - 1]

    def check_digits(self, digits: Sequence[int], start: int = 1) -> None:
        if start - 1 + len(digits) > len(self.blocks):
            raise ValidationError(
                f"{len(digits)} digits from coordinate {start} exceed the {len(self.blocks)} blocks")
        for k, d in enumerate(digits):
            i = start + k
            if isinstance(d, bool) or not isinstance(d, int) or not 0 <= d <= 2 * self.l(i):
                raise ValidationError(f"digit {d!r} at coordinate {i} is outside 0..{2 * self.l(i)}")

    def to_json(self) -> dict:
        out = {
            "kind": "sequence",
            "blocks": [[l, f"{lam.numerator}/{lam.denominator}"] for l, lam in self.blocks],
            "relations": [[i, f"{b.numerator}/{b.denominator}", e]
                          for i, b, e in self.relations.declarations],
            "strict": self.strict,
        }
        if self.epsilon0 is not None:
            eps = self.epsilon0
            out["epsilon0"] = {"scale": f"{eps.scale.numerator}/{eps.scale.denominator}",
                               **eps.form.to_json()}
        return out


@dataclass(frozen=True)
class QuotientCylinder:
    """``C(a_1, ..., a_n)``: points of the quotient space with fixed first digits."""

    spec: SequenceSpec
    digits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(self.digits))
        self.spec.check_digits(self.digits)

    @property
    def depth(self) -> int:
        return len(self.digits)


def cylinder_measure(c: QuotientCylinder) -> Fraction:
    spec = c.spec
    return prod((spec.hat_mass(i, d) for i, d in enumerate(c.digits, start=1)), start=Fraction(1))


def digits_measure(spec: SequenceSpec, digits: Sequence[int], start: int = 1) -> Fraction:
    return prod((spec.hat_mass(start + k, d) for k, d in enumerate(digits)), start=Fraction(1))


# ---------------------------------------------------------------------------
# lacunarity and divergence evidence


@dataclass(frozen=True)
class SpecReport:
    lacunary: tuple[bool, ...]
    partial_sums: tuple[Fraction, ...]
    divergence_note: str | None

    @property
    def all_lacunary(self) -> bool:
        return all(self.lacunary)


def lacunarity_margin(spec: SequenceSpec, n: int) -> LogLinearForm:
    """``-log lam_n + 2 * sum_{i<n} l_i log lam_i`` as an exact form."""
    form = spec.log_lam(n, -1)
    for i in range(1, n):
        form = form + spec.log_lam(i, 2 * spec.l(i))
    return form


def validate_spec(spec: SequenceSpec, prefix_length: int | None = None) -> SpecReport:
    """Certified lacunarity per block and exact partial sums of ``l_n lam_n``.

    Divergence of the full series cannot be decided from a prefix; the
    partial sums and the ``divergence_note`` are evidence only.
    """
    N = len(spec) if prefix_length is None else prefix_length
    if not 0 <= N <= len(spec):
        raise ValidationError(f"prefix length {N} outside 0..{len(spec)}")
    if spec.epsilon0 is None:
        raise ValidationError("spec has no epsilon0; lacunarity cannot be checked")
    eps = spec.epsilon0
    flags = []
    sums = []
    running = Fraction(0)
    for n in range(1, N + 1):
        margin = lacunarity_margin(spec, n)
        lhs = eps.scale.denominator * margin
        rhs = eps.scale.numerator * eps.form
        flags.append(compare(lhs, rhs, spec.relations) == Ordering.GREATER)
        running += spec.l(n) * spec.lam(n)
        sums.append(running)
    return SpecReport(tuple(flags), tuple(sums), spec.divergence_note)


_lacunary_cache: dict[tuple, bool] = {}


def is_lacunary(spec: SequenceSpec, depth: int) -> bool:
    """Whether the first ``depth`` blocks are certified lacunary (cached)."""
    if not spec.strict or spec.epsilon0 is None:
        return False
    key = (spec, depth)
    if key not in _lacunary_cache:
        _lacunary_cache[key] = validate_spec(spec, depth).all_lacunary
    return _lacunary_cache[key]


# ---------------------------------------------------------------------------
# bit-level pushforward


@dataclass(frozen=True)
class PushforwardReport:
    pushforward: tuple[Fraction, ...]
    quotient: tuple[Fraction, ...]
    fibers_are_classes: bool

    @property
    def ok(self) -> bool:
        return self.pushforward == self.quotient and self.fibers_are_classes


def quotient_pushforward(spec: SequenceSpec, n: int) -> PushforwardReport:
    """Enumerate ``{0,1}**(2 l_n)`` and push the Bernoulli product forward
    under the digit sum."""
    l, lam = spec.blocks[n - 1]
    bits = 2 * l
    if bits > BIT_ENUMERATION_LIMIT:
        raise EnumerationTooLarge(f"2*l_{n} = {bits} exceeds {BIT_ENUMERATION_LIMIT} bits")
    p0, p1 = 1 / (1 + lam), lam / (1 + lam)
    push = [Fraction(0)] * (bits + 1)
    by_mass: dict[Fraction, set[int]] = {}
    by_sum: dict[int, set[int]] = {}
    for code, x in enumerate(itertools.product((0, 1), repeat=bits)):
        s = sum(x)
        mass = p1 ** s * p0 ** (bits - s)
        push[s] += mass
        by_mass.setdefault(mass, set()).add(code)
        by_sum.setdefault(s, set()).add(code)
    same = sorted(map(sorted, by_mass.values())) == sorted(map(sorted, by_sum.values()))
    return PushforwardReport(tuple(push), spec.hat_distribution(n), same)


def quotient_pushforward_check(spec: SequenceSpec, n: int) -> bool:
    return quotient_pushforward(spec, n).ok


# ---------------------------------------------------------------------------
# preset families

HALF = Fraction(1, 2)


def toy2() -> SequenceSpec:
    """``(l, lam) = (1, 1/2), (2, 1/32)`` with ``lam_2 = (1/2)**5``."""
    return SequenceSpec(
        blocks=((1, HALF), (2, Fraction(1, 32))),
        epsilon0=Epsilon0.log_inverse(HALF, Fraction(1, 2)),
        relations=MultiplicativeRelations(((2, HALF, 5),)),
    )


def dyadic(ls: Sequence[int]) -> SequenceSpec:
    """Lacunary dyadic spec: ``lam_n = 2**-e_n`` with ``e_1 = 1`` and
    ``e_n = 2 * sum_{i<n} l_i e_i + 1``; every margin is exactly ``log 2``."""
    exps = []
    for n, l in enumerate(ls):
        exps.append(1 if n == 0 else 2 * sum(li * ei for li, ei in zip(ls, exps)) + 1)
    return SequenceSpec(
        blocks=tuple((l, HALF ** e) for l, e in zip(ls, exps)),
        epsilon0=Epsilon0.log_inverse(HALF, Fraction(1, 2)),
        relations=MultiplicativeRelations(tuple((n + 1, HALF, e) for n, e in enumerate(exps) if e > 1)),
    )


def mixed() -> SequenceSpec:
    """Lacunary spec whose logarithms are multiplicatively independent, so
    every comparison goes through interval refinement."""
    return SequenceSpec(
        blocks=((1, HALF), (1, Fraction(1, 10)), (2, Fraction(1, 1001)), (2, Fraction(1, 3 ** 36))),
        epsilon0=Epsilon0.log_inverse(HALF, Fraction(1, 2)),
    )


def constant(length: int, l: int = 1, lam=HALF) -> SequenceSpec:
    """Constant blocks; not lacunary, usable for combinatorics and certificates."""
    lam = as_rational(lam)
    return SequenceSpec(
        blocks=tuple((l, lam) for _ in range(length)),
        strict=False,
        divergence_note=f"l_n * lam_n = {l * lam} for all n; the series diverges",
    )


def divergent_dyadic(length: int) -> SequenceSpec:
    """Lacunary and divergent: ``lam_n = 2**-e_n``, ``l_n = 2**e_n`` for n >= 2.

    Digit ranges explode after two or three blocks, so this family is for
    measures and lacunarity reports, not for orbit enumeration.
    """
    ls, exps = [1], [1]
    for _ in range(1, length):
        e = 2 * sum(li * ei for li, ei in zip(ls, exps)) + 1
        exps.append(e)
        ls.append(2 ** e)
    return SequenceSpec(
        blocks=tuple((l, HALF ** e) for l, e in zip(ls, exps)),
        epsilon0=Epsilon0.log_inverse(HALF, Fraction(1, 2)),
        relations=MultiplicativeRelations(tuple((n + 1, HALF, e) for n, e in enumerate(exps) if e > 1)),
        divergence_note="l_n * lam_n = 1 for n >= 2; the series diverges",
    )


PRESETS = {
    "toy2": lambda length=None: toy2(),
    "mixed": lambda length=None: mixed(),
    "constant": lambda length=None: constant(length or 40),
    "dyadic": lambda length=None: dyadic([1, 1, 2, 2, 3][: length or 5]),
    "divergent": lambda length=None: divergent_dyadic(length or 3),
}
