"""Residue-class binomial sums and the defect quantities that drive the AT estimate.

For a coordinate range with block sizes ``l_i`` write ``A_{a,b}(p)`` for the
sum of ``prod C(l_i, j_i) C(l_i, k_i)`` over ``j + k = p`` with
``sum(j) = a`` and ``sum(k) = b`` mod 3.  Vandermonde's identity splits
``prod C(2 l_i, p_i)`` into the three residue pairings compatible with
``sum(p) mod 3``:

    sum(p) = 0:  A00 + 2 A12
    sum(p) = 1:  A22 + 2 A01
    sum(p) = 2:  A11 + 2 A02

Multiplying each conjugate pair ``(u + e v X)(u + conj(e) v X)`` first gives
the real factor ``u**2 - u v X + v**2 X**2`` with ``u = 1/(1+lam)``,
``v = lam/(1+lam)``.  The coefficient of ``X**p`` in the product of the
``l_i``-th powers is ``(A_diag - A_off)(p) * w(p)`` with
``w(p) = prod lam_i**p_i / (1+lam_i)**(2 l_i)``, so every defect reduces to a
Z/3-graded sum of absolute coefficients and is computed with one triple
convolution per coordinate.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, prod
from typing import Iterable, Mapping, Sequence

from .errors import EnumerationTooLarge, ValidationError
from .numerics import as_rational
from .spaces import SequenceSpec

PAIR_ENUMERATION_LIMIT = 10 ** 7

# name -> (residue class of j, residue class of k); the target residue of p is their sum
VARIANTS: dict[str, tuple[int, int]] = {
    "I0xI0": (0, 0),
    "I1xI1": (1, 1),
    "I2xI2": (2, 2),
    "I1xI2": (1, 2),
    "I0xI2": (0, 2),
    "I0xI1": (0, 1),
}

Blocks = Sequence[tuple[int, Fraction]]


def variant_residue(variant: str) -> int:
    a, b = _classes(variant)
    return (a + b) % 3


def _classes(variant: str) -> tuple[int, int]:
    try:
        return VARIANTS[variant]
    except KeyError:
        raise ValidationError(f"unknown defect variant {variant!r}; expected one of {sorted(VARIANTS)}")


def variants_with_class(s: int) -> list[str]:
    """The three variants whose pairing contains residue class ``s``."""
    return [name for name, (a, b) in VARIANTS.items() if s in (a, b)]


# ---------------------------------------------------------------------------
# sparse polynomials


class SparsePoly:
    """Polynomial in ``nvars`` variables with exact rational coefficients."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[tuple[int, ...], Fraction] | None = None):
        self.nvars = nvars
        clean = {}
        for exps, c in (terms or {}).items():
            exps = tuple(exps)
            if len(exps) != nvars or any(e < 0 for e in exps):
                raise ValidationError(f"bad exponent tuple {exps} for {nvars} variables")
            c = as_rational(c)
            if c:
                clean[exps] = clean.get(exps, Fraction(0)) + c
        self.terms = {e: c for e, c in clean.items() if c}

    @classmethod
    def one(cls, nvars: int) -> SparsePoly:
        return cls(nvars, {(0,) * nvars: Fraction(1)})

    @classmethod
    def univariate(cls, coeffs: Sequence[Fraction], var: int, nvars: int) -> SparsePoly:
        terms = {}
        for power, c in enumerate(coeffs):
            exps = [0] * nvars
            exps[var] = power
            terms[tuple(exps)] = c
        return cls(nvars, terms)

    def __add__(self, other: SparsePoly) -> SparsePoly:
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, Fraction(0)) + c
        return SparsePoly(self.nvars, terms)

    def __mul__(self, other: SparsePoly) -> SparsePoly:
        if self.nvars != other.nvars:
            raise ValidationError("variable count mismatch")
        terms: dict[tuple[int, ...], Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                terms[e] = terms.get(e, Fraction(0)) + c1 * c2
        return SparsePoly(self.nvars, terms)

    def __pow__(self, k: int) -> SparsePoly:
        out = SparsePoly.one(self.nvars)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, SparsePoly) and self.nvars == other.nvars and self.terms == other.terms

    def coefficient(self, exps: Sequence[int]) -> Fraction:
        return self.terms.get(tuple(exps), Fraction(0))

    def norm(self) -> Fraction:
        """Sum of absolute values of the coefficients."""
        return sum((abs(c) for c in self.terms.values()), Fraction(0))

    def __repr__(self) -> str:
        return f"SparsePoly({self.nvars}, {len(self.terms)} terms)"


# ---------------------------------------------------------------------------
# conjugate-pair factors


@lru_cache(maxsize=None)
def _integer_pair_power(l: int, lam: Fraction) -> tuple[tuple[int, ...], int]:
    """Numerators of ``(q^2 - q p X + p^2 X^2)**l`` and the denominator
    ``(p+q)**(2l)`` for ``lam = p/q``."""
    p, q = lam.numerator, lam.denominator
    base = (q * q, -p * q, p * p)
    coeffs = [1]
    for _ in range(l):
        nxt = [0] * (len(coeffs) + 2)
        for i, c in enumerate(coeffs):
            for j, b in enumerate(base):
                nxt[i + j] += c * b
        coeffs = nxt
    return tuple(coeffs), (p + q) ** (2 * l)


def conjugate_pair_power(l: int, lam) -> list[Fraction]:
    """Coefficients of ``(u**2 - u v X + v**2 X**2)**l``, lowest degree first."""
    if l < 1:
        raise ValidationError("l must be >= 1")
    lam = as_rational(lam)
    nums, den = _integer_pair_power(l, lam)
    return [Fraction(c, den) for c in nums]


def pair_factor_norm(l: int, lam) -> Fraction:
    """``(1 - lam/(1+lam)**2)**l``, the coefficient norm of the factor power."""
    lam = as_rational(lam)
    return (1 - lam / (1 + lam) ** 2) ** l


@dataclass(frozen=True)
class GradedCoefficients:
    """Per-coordinate sums of the factor-power coefficients by degree mod 3."""

    absolute: tuple[Fraction, Fraction, Fraction]
    signed: tuple[Fraction, Fraction, Fraction]

    @classmethod
    def of(cls, l: int, lam) -> GradedCoefficients:
        coeffs = conjugate_pair_power(l, lam)
        ab = [Fraction(0)] * 3
        sg = [Fraction(0)] * 3
        for degree, c in enumerate(coeffs):
            ab[degree % 3] += abs(c)
            sg[degree % 3] += c
        return cls(tuple(ab), tuple(sg))


@lru_cache(maxsize=None)
def _integer_abs_triple(l: int, lam: Fraction) -> tuple[tuple[int, int, int], int]:
    nums, den = _integer_pair_power(l, lam)
    triple = [0, 0, 0]
    for degree, c in enumerate(nums):
        triple[degree % 3] += abs(c)
    return tuple(triple), den


def _convolve3(x: Sequence[int], y: Sequence[int]) -> tuple[int, int, int]:
    return (x[0] * y[0] + x[1] * y[2] + x[2] * y[1],
            x[0] * y[1] + x[1] * y[0] + x[2] * y[2],
            x[0] * y[2] + x[1] * y[1] + x[2] * y[0])


def graded_abs_sums(blocks: Blocks) -> tuple[Fraction, Fraction, Fraction]:
    """``sum |coeff_p|`` of the product polynomial over ``p`` in each residue
    class of ``sum(p) mod 3``."""
    acc: tuple[int, int, int] = (1, 0, 0)
    den = 1
    for l, lam in blocks:
        triple, d = _integer_abs_triple(l, as_rational(lam))
        acc = _convolve3(acc, triple)
        den *= d
    return tuple(Fraction(v, den) for v in acc)


def conjugate_product(blocks: Blocks) -> SparsePoly:
    """Full expansion of the product of factor powers (small ranges only)."""
    r = len(blocks)
    out = SparsePoly.one(r)
    for var, (l, lam) in enumerate(blocks):
        out = out * SparsePoly.univariate(conjugate_pair_power(l, lam), var, r)
    return out


# ---------------------------------------------------------------------------
# residue-class tables


@dataclass(frozen=True)
class ResidueClassTable:
    ls: tuple[int, ...]
    p: tuple[int, ...]
    table: tuple[tuple[int, int, int], ...]

    @property
    def residue(self) -> int:
        return sum(self.p) % 3

    def __getitem__(self, ab: tuple[int, int]) -> int:
        a, b = ab
        return self.table[a][b]

    @property
    def total(self) -> int:
        return sum(map(sum, self.table))

    def is_symmetric(self) -> bool:
        return all(self.table[a][b] == self.table[b][a] for a in range(3) for b in range(3))


def _check_target(ls: Sequence[int], p: Sequence[int]) -> None:
    if len(ls) != len(p):
        raise ValidationError("l-range and exponent tuple differ in length")
    for l, pi in zip(ls, p):
        if l < 1 or not 0 <= pi <= 2 * l:
            raise ValidationError(f"exponent {pi} outside 0..{2 * l}")


def class_sums(ls: Sequence[int], p: Sequence[int]) -> ResidueClassTable:
    """Brute-force ``A_{a,b}(p)`` by enumerating all ``j`` with ``k = p - j``."""
    ls, p = tuple(ls), tuple(p)
    _check_target(ls, p)
    size = prod((l + 1) ** 2 for l in ls)
    if size > PAIR_ENUMERATION_LIMIT:
        raise EnumerationTooLarge(f"{size} index pairs exceed {PAIR_ENUMERATION_LIMIT}")
    table = [[0] * 3 for _ in range(3)]
    for j in itertools.product(*(range(l + 1) for l in ls)):
        k = tuple(pi - ji for pi, ji in zip(p, j))
        if any(not 0 <= ki <= l for ki, l in zip(k, ls)):
            continue
        weight = prod(comb(l, ji) * comb(l, ki) for l, ji, ki in zip(ls, j, k))
        table[sum(j) % 3][sum(k) % 3] += weight
    return ResidueClassTable(ls, p, tuple(map(tuple, table)))


def class_sums_graded(ls: Sequence[int], p: Sequence[int]) -> ResidueClassTable:
    """Same table from per-coordinate graded sums; ``b`` is forced by ``a``."""
    ls, p = tuple(ls), tuple(p)
    _check_target(ls, p)
    acc = (1, 0, 0)
    for l, pi in zip(ls, p):
        h = [0, 0, 0]
        for j in range(max(0, pi - l), min(l, pi) + 1):
            h[j % 3] += comb(l, j) * comb(l, pi - j)
        acc = _convolve3(acc, h)
    r = sum(p) % 3
    table = [[0] * 3 for _ in range(3)]
    for a in range(3):
        table[a][(r - a) % 3] = acc[a]
    return ResidueClassTable(ls, p, tuple(map(tuple, table)))


SPLIT_PAIRS = {0: ((0, 0), (1, 2)), 1: ((2, 2), (0, 1)), 2: ((1, 1), (0, 2))}


def split_identity_sides(ls: Sequence[int], p: Sequence[int]) -> tuple[int, int]:
    """``(A_diag + 2 A_off, prod C(2 l_i, p_i))`` for the pairing of ``sum(p) mod 3``."""
    t = class_sums(ls, p)
    diag, off = SPLIT_PAIRS[t.residue]
    lhs = t[diag] + 2 * t[off]
    rhs = prod(comb(2 * l, pi) for l, pi in zip(ls, p))
    return lhs, rhs


def vandermonde_split_check(ls: Sequence[int], p: Sequence[int]) -> bool:
    lhs, rhs = split_identity_sides(ls, p)
    return lhs == rhs


# ---------------------------------------------------------------------------
# defects


def defect_bound(blocks: Blocks) -> Fraction:
    """``2 * prod (1 - lam_i/(1+lam_i)**2)**l_i``."""
    return 2 * prod((pair_factor_norm(l, lam) for l, lam in blocks), start=Fraction(1))


def defect_blocks(blocks: Blocks, variant: str) -> Fraction:
    """Exact defect over the given coordinate blocks via graded convolution.

    Same-class variants equal twice the graded absolute sum at their target
    residue, mixed-class variants equal it once.
    """
    a, b = _classes(variant)
    if not blocks:
        return Fraction(0)
    sums = graded_abs_sums(blocks)
    factor = 2 if a == b else 1
    return factor * sums[(a + b) % 3]


def defect_brute(blocks: Blocks, variant: str) -> Fraction:
    """Defect straight from its definition: enumerate every ``(j, k)`` pair,
    accumulate class sums per ``p``, then sum
    ``|3 A_variant(p) - prod C(2l, p)| * w(p)`` over ``p`` with the target
    residue."""
    a, b = _classes(variant)
    if not blocks:
        return Fraction(0)
    ls = [l for l, _ in blocks]
    lams = [as_rational(lam) for _, lam in blocks]
    size = prod((l + 1) ** 2 for l in ls)
    if size > PAIR_ENUMERATION_LIMIT:
        raise EnumerationTooLarge(f"{size} index pairs exceed {PAIR_ENUMERATION_LIMIT}")
    ranges = [range(l + 1) for l in ls]
    acc: dict[tuple[int, ...], int] = {}
    for j in itertools.product(*ranges):
        if sum(j) % 3 != a:
            continue
        wj = prod(comb(l, x) for l, x in zip(ls, j))
        for k in itertools.product(*ranges):
            if sum(k) % 3 != b:
                continue
            pk = tuple(x + y for x, y in zip(j, k))
            acc[pk] = acc.get(pk, 0) + wj * prod(comb(l, y) for l, y in zip(ls, k))
    target = (a + b) % 3
    total = Fraction(0)
    for p in itertools.product(*(range(2 * l + 1) for l in ls)):
        if sum(p) % 3 != target:
            continue
        v = prod(comb(2 * l, x) for l, x in zip(ls, p))
        w = prod((lam ** x / (1 + lam) ** (2 * l) for l, lam, x in zip(ls, lams, p)), start=Fraction(1))
        total += abs(3 * acc.get(p, 0) - v) * w
    return total


def _range_blocks(spec: SequenceSpec, n: int, m: int) -> tuple[tuple[int, Fraction], ...]:
    if not 0 <= n <= m <= len(spec):
        raise ValidationError(f"need 0 <= n <= m <= {len(spec)}, got n={n}, m={m}")
    return spec.blocks[n:m]


def defect(spec: SequenceSpec, n: int, m: int, variant: str) -> tuple[Fraction, Fraction]:
    """Exact defect over coordinates ``n+1..m`` and its bound."""
    blocks = _range_blocks(spec, n, m)
    return defect_blocks(blocks, variant), defect_bound(blocks)


def defect_table(spec: SequenceSpec, n: int, m_max: int,
                 variants: Iterable[str] = tuple(VARIANTS)) -> list[tuple[int, str, Fraction, Fraction]]:
    """Rows ``(m, variant, value, bound)`` for ``m = n+1..m_max``, one
    incremental convolution pass."""
    blocks = _range_blocks(spec, n, m_max)
    variants = list(variants)
    for v in variants:
        _classes(v)
    rows = []
    acc, den = (1, 0, 0), 1
    bound = Fraction(2)
    for offset, (l, lam) in enumerate(blocks, start=1):
        triple, d = _integer_abs_triple(l, lam)
        acc = _convolve3(acc, triple)
        den *= d
        bound *= pair_factor_norm(l, lam)
        for v in variants:
            a, b = VARIANTS[v]
            value = (2 if a == b else 1) * Fraction(acc[(a + b) % 3], den)
            rows.append((n + offset, v, value, bound))
    return rows
