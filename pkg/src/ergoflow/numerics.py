"""Exact rationals and certified arithmetic on integer combinations of logarithms.

A :class:`LogLinearForm` is a finite sum ``sum(c_i * log(lam_i))`` with integer
``c_i`` and rational ``lam_i`` in (0, 1).  Forms are never compared by floating
point.  Equality is syntactic after rewriting declared power relations
``lam_i = base ** exponent``; strict order is certified by outward-rounded
rational intervals around the logarithms.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
from functools import lru_cache
from math import ceil, floor, prod
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import Undecided, ValidationError

Rational = Fraction
Interval = tuple[Fraction, Fraction]

DEFAULT_MAX_PRECISION = 256
# extra bits tried when an interval straddles a dyadic grid point
_REFINE_CAP = 4096


class Ordering(IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


def default_max_precision() -> int:
    """Comparison precision in bits; ``ERGOFLOW_PRECISION`` overrides the default."""
    raw = os.environ.get("ERGOFLOW_PRECISION")
    if raw is None or not raw.strip():
        return DEFAULT_MAX_PRECISION
    value = int(raw)
    if value < 1:
        raise ValidationError(f"ERGOFLOW_PRECISION must be positive, got {raw!r}")
    return value


def as_rational(value) -> Fraction:
    """Exact conversion from int, Fraction, or a ``"p/q"`` / decimal string.

    Floats are rejected: a binary float almost never denotes the rational the
    caller had in mind.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


def rational_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# logarithm kernel


@lru_cache(maxsize=4096)
def _atanh_scaled(a: int, b: int, w: int) -> tuple[int, int]:
    """Integers ``lo, hi`` with ``lo <= 2**w * atanh(a/b) <= hi``.

    Requires ``0 <= a/b <= 1/3``.  Each series term is floored, so the lower
    sum is a lower bound and every term contributes at most one ulp of slack
    to the upper bound.  Once a term floors to zero the remaining tail is at
    most ``9/8`` of that term (ratio ``y**2 <= 1/9``), i.e. below two ulps.
    """
    if a == 0:
        return 0, 0
    assert 0 < 3 * a <= b
    lo = hi = 0
    num, den = a, b
    a2, b2 = a * a, b * b
    j = 0
    while True:
        t_num = num << w
        t_den = den * (2 * j + 1)
        term = t_num // t_den
        if term == 0:
            hi += 2
            return lo, hi
        lo += term
        hi += term + 1
        num *= a2
        den *= b2
        j += 1


@lru_cache(maxsize=4096)
def log_interval(q: Fraction, bits: int) -> Interval:
    """Certified enclosure of ``log(q)`` with width at most ``2**-bits``.

    Argument reduction ``q = 2**e * m`` with ``m`` in [1, 2) followed by
    ``log m = 2 atanh((m-1)/(m+1))`` and ``log 2 = 2 atanh(1/3)``.
    """
    q = Fraction(q)
    if q <= 0:
        raise ValueError(f"logarithm of non-positive rational {q}")
    if q == 1:
        return Fraction(0), Fraction(0)
    e = q.numerator.bit_length() - q.denominator.bit_length()
    m = q / (Fraction(2) ** e)
    if m < 1:
        e -= 1
        m *= 2
    y = (m - 1) / (m + 1)
    w = bits + abs(e).bit_length() + 12
    target = Fraction(1, 1 << bits)
    while True:
        l2_lo, l2_hi = _atanh_scaled(1, 3, w)
        y_lo, y_hi = _atanh_scaled(y.numerator, y.denominator, w)
        if e >= 0:
            lo = 2 * (e * l2_lo + y_lo)
            hi = 2 * (e * l2_hi + y_hi)
        else:
            lo = 2 * (e * l2_hi + y_lo)
            hi = 2 * (e * l2_lo + y_hi)
        scale = 1 << w
        lo_q, hi_q = Fraction(lo, scale), Fraction(hi, scale)
        if hi_q - lo_q <= target:
            return lo_q, hi_q
        w += 16


# ---------------------------------------------------------------------------
# forms


class LogLinearForm:
    """Immutable integer combination ``sum(c_i * log(lam_i))``.

    ``coeffs`` maps a coordinate index to an integer coefficient, ``basis``
    maps every index with a nonzero coefficient to its rational ``lam_i`` in
    (0, 1).  Zero coefficients are dropped, as are basis entries no longer
    referenced.
    """

    __slots__ = ("_coeffs", "_basis", "_hash")

    def __init__(self, coeffs: Mapping[int, int] | None = None,
                 basis: Mapping[int, Fraction] | None = None):
        coeffs = dict(coeffs or {})
        basis = dict(basis or {})
        clean: dict[int, int] = {}
        used: dict[int, Fraction] = {}
        for index in sorted(coeffs):
            c = coeffs[index]
            if isinstance(c, bool) or not isinstance(c, int):
                raise TypeError(f"coefficient for index {index} must be an int, got {c!r}")
            if c == 0:
                continue
            if index not in basis:
                raise ValidationError(f"index {index} has no basis entry")
            lam = as_rational(basis[index])
            if not 0 < lam < 1:
                raise ValidationError(f"basis value {lam} for index {index} is not in (0, 1)")
            clean[int(index)] = c
            used[int(index)] = lam
        self._coeffs = MappingProxyType(clean)
        self._basis = MappingProxyType(used)
        self._hash = hash((tuple(clean.items()), tuple(used.items())))

    @classmethod
    def zero(cls) -> LogLinearForm:
        return cls()

    @classmethod
    def term(cls, index: int, lam, coeff: int = 1) -> LogLinearForm:
        return cls({index: coeff}, {index: as_rational(lam)})

    @classmethod
    def from_digits(cls, digits: Iterable[int], lambdas: Iterable[Fraction],
                    start: int = 1) -> LogLinearForm:
        """``sum(d_i * log(lam_i))`` with indices numbered from ``start``."""
        coeffs, basis = {}, {}
        for offset, (d, lam) in enumerate(zip(digits, lambdas)):
            coeffs[start + offset] = d
            basis[start + offset] = lam
        return cls(coeffs, basis)

    @property
    def coefficients(self) -> Mapping[int, int]:
        return self._coeffs

    @property
    def basis(self) -> Mapping[int, Fraction]:
        return self._basis

    def is_zero(self) -> bool:
        return not self._coeffs

    def __bool__(self) -> bool:
        return bool(self._coeffs)

    def _merged_basis(self, other: LogLinearForm) -> dict[int, Fraction]:
        basis = dict(self._basis)
        for index, lam in other._basis.items():
            if basis.setdefault(index, lam) != lam:
                raise ValidationError(
                    f"index {index} has conflicting basis values {basis[index]} and {lam}")
        return basis

    def __add__(self, other: LogLinearForm) -> LogLinearForm:
        if not isinstance(other, LogLinearForm):
            return NotImplemented
        coeffs = dict(self._coeffs)
        for index, c in other._coeffs.items():
            coeffs[index] = coeffs.get(index, 0) + c
        return LogLinearForm(coeffs, self._merged_basis(other))

    def __neg__(self) -> LogLinearForm:
        return LogLinearForm({i: -c for i, c in self._coeffs.items()}, self._basis)

    def __sub__(self, other: LogLinearForm) -> LogLinearForm:
        if not isinstance(other, LogLinearForm):
            return NotImplemented
        return self + (-other)

    def __mul__(self, k: int) -> LogLinearForm:
        if isinstance(k, bool) or not isinstance(k, int):
            return NotImplemented
        return LogLinearForm({i: k * c for i, c in self._coeffs.items()}, self._basis)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, LogLinearForm):
            return NotImplemented
        return self._coeffs == other._coeffs and self._basis == other._basis

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        if not self._coeffs:
            return "LogLinearForm(0)"
        parts = [f"{c}*log({self._basis[i]})" for i, c in self._coeffs.items()]
        return "LogLinearForm(" + " + ".join(parts) + ")"

    def atoms(self, relations: MultiplicativeRelations | None = None) -> dict[Fraction, int]:
        """Coefficients over distinct rational atoms after relation rewriting.

        Indices sharing a basis value merge, so the result depends only on
        the numeric value up to declared relations.
        """
        relations = relations or NO_RELATIONS
        out: dict[Fraction, int] = {}
        for index, c in self._coeffs.items():
            base, exponent = relations.rewrite(index, self._basis[index])
            out[base] = out.get(base, 0) + c * exponent
        return {b: c for b, c in sorted(out.items()) if c}

    def to_json(self) -> dict:
        return {
            "coefficients": {str(i): c for i, c in self._coeffs.items()},
            "basis": {str(i): rational_str(lam) for i, lam in self._basis.items()},
        }


@dataclass(frozen=True)
class MultiplicativeRelations:
    """Declared identities ``lam_index = base ** exponent``."""

    declarations: tuple[tuple[int, Fraction, int], ...] = ()

    def __post_init__(self):
        seen = set()
        normalized = []
        for index, base, exponent in self.declarations:
            base = as_rational(base)
            if not 0 < base < 1:
                raise ValidationError(f"relation base {base} for index {index} is not in (0, 1)")
            if isinstance(exponent, bool) or not isinstance(exponent, int) or exponent < 1:
                raise ValidationError(f"relation exponent for index {index} must be a positive int")
            if index in seen:
                raise ValidationError(f"index {index} declared more than once")
            seen.add(index)
            normalized.append((int(index), base, exponent))
        object.__setattr__(self, "declarations", tuple(normalized))
        object.__setattr__(self, "_table", {i: (b, e) for i, b, e in normalized})

    def rewrite(self, index: int, lam: Fraction) -> tuple[Fraction, int]:
        entry = self._table.get(index)
        if entry is None:
            return lam, 1
        base, exponent = entry
        if base ** exponent != lam:
            raise ValidationError(
                f"declared relation lam_{index} = ({base})^{exponent} does not match basis value {lam}")
        return entry

    def __contains__(self, index: int) -> bool:
        return index in self._table


NO_RELATIONS = MultiplicativeRelations()


# ---------------------------------------------------------------------------
# certified evaluation


def _atoms_interval(atoms: Mapping[Fraction, int], bits: int) -> Interval:
    total = sum(abs(c) for c in atoms.values())
    inner = bits + total.bit_length() + 1
    lo = hi = Fraction(0)
    for base, c in atoms.items():
        l_lo, l_hi = log_interval(base, inner)
        if c > 0:
            lo += c * l_lo
            hi += c * l_hi
        else:
            lo += c * l_hi
            hi += c * l_lo
    return lo, hi


def _is_exact_zero(atoms: Mapping[Fraction, int]) -> bool:
    return prod((base ** c for base, c in atoms.items()), start=Fraction(1)) == 1


def _cell_interval(atoms: Mapping[Fraction, int], precision: int) -> Interval:
    """Dyadic cell of width ``2**-(precision+1)`` containing the value.

    Nonzero values are logarithms of rationals other than 1, hence
    irrational, so refinement eventually isolates them inside one cell.
    Cells at successive precisions are nested by construction.
    """
    scale = 1 << (precision + 1)
    half = Fraction(1, scale)
    if not atoms:
        return -half, half
    inner = precision + 8
    zero_checked = False
    while True:
        lo, hi = _atoms_interval(atoms, inner)
        f_lo, c_hi = floor(lo * scale), ceil(hi * scale)
        if c_hi - f_lo == 1:
            return Fraction(f_lo, scale), Fraction(c_hi, scale)
        if not zero_checked:
            zero_checked = True
            if _is_exact_zero(atoms):
                return -half, half
        if inner > precision + _REFINE_CAP:
            # two adjacent cells: still width 2**-precision
            return Fraction(f_lo, scale), Fraction(c_hi, scale)
        inner = 2 * inner


def eval_interval(form: LogLinearForm, precision: int) -> Interval:
    """Rational interval of width at most ``2**-precision`` containing ``form``."""
    if precision < 1:
        raise ValueError("precision must be >= 1")
    return _cell_interval(form.atoms(), precision)


def compare(a: LogLinearForm, b: LogLinearForm,
            relations: MultiplicativeRelations | None = None,
            max_precision: int | None = None) -> Ordering:
    """Certified ordering of two forms.

    ``EQUAL`` only when the rewritten coefficient vectors coincide.  Raises
    :class:`Undecided` when refinement up to ``max_precision`` bits cannot
    separate forms whose vectors differ.
    """
    if max_precision is None:
        max_precision = default_max_precision()
    atoms = (a - b).atoms(relations)
    if not atoms:
        return Ordering.EQUAL
    if len(atoms) == 1:
        # c * log(base) with log(base) < 0
        (c,) = atoms.values()
        return Ordering.LESS if c > 0 else Ordering.GREATER
    precision = min(16, max_precision)
    while True:
        lo, hi = _cell_interval(atoms, precision)
        if lo > 0:
            return Ordering.GREATER
        if hi < 0:
            return Ordering.LESS
        if precision >= max_precision:
            raise Undecided(
                f"could not separate {a!r} and {b!r} within {max_precision} bits; "
                "is a multiplicative relation undeclared?")
        precision = min(2 * precision, max_precision)


def sign(form: LogLinearForm, relations: MultiplicativeRelations | None = None,
         max_precision: int | None = None) -> int:
    return int(compare(form, LogLinearForm.zero(), relations, max_precision))
