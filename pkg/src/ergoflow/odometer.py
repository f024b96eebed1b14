"""The product odometer ``S`` on ``Z = Z_0 x Z_1 x ...`` and its block model.

``Z_0 = {0..k-1}`` and ``Z_n = {0..k}`` for ``n >= 1``, each with the
uniform measure.  ``S`` lowers the first digit by one (mod ``k``) and adds
one with carry to the remaining ``(k+1)``-ary digits; the all-``k`` tail
rolls over to the all-zero tail.  Cylinders ``C(z_0, ..., z_n)`` are
permuted cyclically by ``S`` with period ``k (k+1)**n``.

The block spaces ``X_n`` have ``r_n + r_n**2 + ... + r_n**k + 1`` points,
``r_n = lam**((k+1)**n)``, and are never enumerated: a point is a block
index plus an offset inside the block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import EnumerationTooLarge, PrefixTooShort, ValidationError

TOWER_ENUMERATION_LIMIT = 10 ** 6


@dataclass(frozen=True)
class OdometerSpec:
    lam: int
    k: int

    def __post_init__(self):
        for name in ("lam", "k"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 2:
                raise ValidationError(f"{name} must be an integer >= 2, got {value!r}")

    def r(self, n: int) -> int:
        if n < 1:
            raise ValidationError("r_n is defined for n >= 1")
        return self.lam ** ((self.k + 1) ** n)

    def radix(self, n: int) -> int:
        return self.k if n == 0 else self.k + 1

    def block_count(self, n: int) -> int:
        return self.radix(n)

    def block_size(self, n: int, j: int) -> int:
        if not 0 <= j < self.radix(n):
            raise ValidationError(f"block {j} out of range at level {n}")
        return 1 if n == 0 else self.r(n) ** (self.k - j)

    def block_start(self, n: int, j: int) -> int:
        return sum(self.block_size(n, i) for i in range(j))

    def space_size(self, n: int) -> int:
        """``|X_n|``: ``k`` at level 0, ``k_n + 1`` above."""
        return self.block_start(n, self.radix(n))

    def point_mass(self, n: int, j: int) -> Fraction:
        """``nu_n`` of a single point of block ``j``."""
        if n == 0:
            return Fraction(1, self.k)
        return Fraction(1, (self.k + 1) * self.block_size(n, j))

    def period(self, n: int) -> int:
        return self.k * (self.k + 1) ** n

    def to_json(self) -> dict:
        return {"kind": "odometer", "lambda": self.lam, "k": self.k}


# ---------------------------------------------------------------------------
# points and cylinders of Z


@dataclass(frozen=True)
class AdicPrefix:
    """Digits ``z_0..z_N`` of a point or cylinder of ``Z``.

    ``tail`` is ``None`` for the cylinder (unknown continuation), ``0`` for
    the point continuing with zeros and ``k`` for the point continuing
    with ``k``s.
    """

    k: int
    digits: tuple[int, ...]
    tail: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(self.digits))
        if not self.digits:
            raise ValidationError("prefix needs at least the digit z_0")
        if not 0 <= self.digits[0] < self.k:
            raise ValidationError(f"z_0 = {self.digits[0]} outside 0..{self.k - 1}")
        for i, d in enumerate(self.digits[1:], start=1):
            if not 0 <= d <= self.k:
                raise ValidationError(f"z_{i} = {d} outside 0..{self.k}")
        if self.tail not in (None, 0, self.k):
            raise ValidationError(f"tail must be None, 0 or k, got {self.tail!r}")

    @property
    def length(self) -> int:
        return len(self.digits)

    def measure(self) -> Fraction:
        """``mu(C(z_0..z_N)) = (1/k) (1/(k+1))**N``."""
        return Fraction(1, self.k * (self.k + 1) ** (len(self.digits) - 1))

    def extended(self, length: int) -> AdicPrefix:
        if length <= len(self.digits):
            return self
        if self.tail is None:
            raise PrefixTooShort(f"cannot extend {self.digits} without a known tail")
        return AdicPrefix(self.k, self.digits + (self.tail,) * (length - len(self.digits)), self.tail)


def _forward_digits(k: int, digits: Sequence[int]) -> tuple[tuple[int, ...], bool]:
    """One step on a finite prefix; the flag is False when every digit past
    ``z_0`` equals ``k`` (the carry left the prefix)."""
    out = list(digits)
    out[0] = (out[0] - 1) % k
    for n in range(1, len(out)):
        if out[n] < k:
            out[n] += 1
            return tuple(out), True
        out[n] = 0
    return tuple(out), False


def _backward_digits(k: int, digits: Sequence[int]) -> tuple[tuple[int, ...], bool]:
    out = list(digits)
    out[0] = (out[0] + 1) % k
    for n in range(1, len(out)):
        if out[n] > 0:
            out[n] -= 1
            return tuple(out), True
        out[n] = k
    return tuple(out), False


def cylinder_step(p: AdicPrefix) -> AdicPrefix:
    """``S(C(z))`` as a cylinder of the same length."""
    digits, _ = _forward_digits(p.k, p.digits)
    return AdicPrefix(p.k, digits)


def cylinder_step_inverse(p: AdicPrefix) -> AdicPrefix:
    digits, _ = _backward_digits(p.k, p.digits)
    return AdicPrefix(p.k, digits)


def odometer_step(p: AdicPrefix) -> AdicPrefix:
    """``S`` on a point.  ``N(z)`` must be visible in the digits or the tail.

    ``S(a, k, k, ...) = (a - 1, 0, 0, ...)`` is the rollover point.
    """
    k = p.k
    digits, carried = _forward_digits(k, p.digits)
    if carried:
        return AdicPrefix(k, digits, p.tail)
    if p.tail is None:
        raise PrefixTooShort(f"N(z) is not determined by {p.digits}")
    if p.tail == k:
        return AdicPrefix(k, digits, 0)
    # tail of zeros: the carry lands on the first tail digit
    return AdicPrefix(k, digits + (1,), 0)


def odometer_step_inverse(p: AdicPrefix) -> AdicPrefix:
    k = p.k
    digits, borrowed = _backward_digits(k, p.digits)
    if borrowed:
        return AdicPrefix(k, digits, p.tail)
    if p.tail is None:
        raise PrefixTooShort(f"first nonzero digit past z_0 is not determined by {p.digits}")
    if p.tail == 0:
        return AdicPrefix(k, digits, k)
    return AdicPrefix(k, digits + (k - 1,), k)


def iterate(p: AdicPrefix, times: int, cylinder: bool = False) -> AdicPrefix:
    step = (cylinder_step if times >= 0 else cylinder_step_inverse) if cylinder else \
        (odometer_step if times >= 0 else odometer_step_inverse)
    for _ in range(abs(times)):
        p = step(p)
    return p


# ---------------------------------------------------------------------------
# towers and the adic coding


@dataclass(frozen=True)
class TowerLevel:
    n: int
    cells: tuple[tuple[int, ...], ...]  # cells[j] = digits of A_n^j

    @property
    def period(self) -> int:
        return len(self.cells)

    def index(self) -> dict[tuple[int, ...], int]:
        return {c: j for j, c in enumerate(self.cells)}


def tower(spec: OdometerSpec, n: int) -> TowerLevel:
    """``A_n^j = S^j(A_n^0)`` until the orbit returns to ``A_n^0``."""
    if n < 0:
        raise ValidationError("tower level must be >= 0")
    size = spec.period(n)
    if size > TOWER_ENUMERATION_LIMIT:
        raise EnumerationTooLarge(f"{size} cells at level {n} exceed {TOWER_ENUMERATION_LIMIT}")
    start = AdicPrefix(spec.k, (0,) * (n + 1))
    cells = [start.digits]
    p = cylinder_step(start)
    while p.digits != start.digits:
        cells.append(p.digits)
        if len(cells) > size:
            raise AssertionError("orbit of A_n^0 is longer than the number of cylinders")
        p = cylinder_step(p)
    return TowerLevel(n, tuple(cells))


def refinement_indices(spec: OdometerSpec, n: int, i: int) -> list[int]:
    """Indices ``i + j k (k+1)**n``, ``j = 0..k``, of the level ``n+1`` cells inside ``A_n^i``."""
    step = spec.period(n)
    return [i + j * step for j in range(spec.k + 1)]


def refinement_check(spec: OdometerSpec, n: int) -> bool:
    lower, upper = tower(spec, n), tower(spec, n + 1)
    for i, cell in enumerate(lower.cells):
        children = {upper.cells[j] for j in refinement_indices(spec, n, i)}
        expected = {cell + (d,) for d in range(spec.radix(n + 1))}
        if children != expected:
            return False
    return True


def adic_successor(radices: Sequence[int], digits: Sequence[int]) -> tuple[int, ...]:
    out = list(digits)
    for i, r in enumerate(radices):
        out[i] += 1
        if out[i] < r:
            return tuple(out)
        out[i] = 0
    return tuple(out)


def adic_digits(radices: Sequence[int], value: int) -> tuple[int, ...]:
    out = []
    for r in radices:
        value, d = divmod(value, r)
        out.append(d)
    return tuple(out)


def adic_coding_check(spec: OdometerSpec, n_max: int) -> bool:
    """Tower index coding conjugates ``S`` to the ``(k, k+1, k+1, ...)``-adic successor.

    At each level the tower must exhaust all cylinders, ``S`` must move
    index ``i`` to ``i + 1`` read as mixed-radix digits, and the code of a
    level ``n+1`` cell must truncate to the code of its parent.
    """
    previous: dict[tuple[int, ...], tuple[int, ...]] | None = None
    for n in range(n_max + 1):
        level = tower(spec, n)
        radices = [spec.k] + [spec.k + 1] * n
        if level.period != math.prod(radices) or len(set(level.cells)) != level.period:
            return False
        code = {cell: adic_digits(radices, j) for j, cell in enumerate(level.cells)}
        for cell, digits in code.items():
            image = cylinder_step(AdicPrefix(spec.k, cell)).digits
            if code[image] != adic_successor(radices, digits):
                return False
            if previous is not None and previous[cell[:-1]] != digits[:-1]:
                return False
        previous = code
    return True


def measure_preservation_check(spec: OdometerSpec, max_length: int) -> bool:
    """``S`` permutes the cylinders of each length and keeps their measure."""
    for length in range(1, max_length + 1):
        count = spec.period(length - 1)
        if count > TOWER_ENUMERATION_LIMIT:
            raise EnumerationTooLarge(f"{count} cylinders of length {length}")
        cells = [AdicPrefix(spec.k, adic_digits([spec.k] + [spec.k + 1] * (length - 1), i))
                 for i in range(count)]
        images = set()
        for c in cells:
            image = cylinder_step(c)
            if image.measure() != c.measure() or cylinder_step_inverse(image) != c:
                return False
            images.add(image.digits)
        if len(images) != count:
            return False
    return True


# ---------------------------------------------------------------------------
# block spaces X_n and the projection


@dataclass(frozen=True)
class BlockCoordinate:
    n: int
    block: int
    offset: int

    def validate(self, spec: OdometerSpec) -> None:
        if self.n < 0:
            raise ValidationError("level must be >= 0")
        size = spec.block_size(self.n, self.block)
        if not 0 <= self.offset < size:
            raise ValidationError(f"offset {self.offset} outside block of size {size}")

    def index(self, spec: OdometerSpec) -> int:
        """Position of the point in ``X_n``."""
        self.validate(spec)
        return spec.block_start(self.n, self.block) + self.offset

    @classmethod
    def from_index(cls, spec: OdometerSpec, n: int, i: int) -> BlockCoordinate:
        start = 0
        for j in range(spec.radix(n)):
            size = spec.block_size(n, j)
            if i < start + size:
                if i < 0:
                    break
                return cls(n, j, i - start)
            start += size
        raise ValidationError(f"index {i} outside X_{n}")


def block_projection(spec: OdometerSpec, n: int, x: BlockCoordinate) -> tuple[int, Fraction]:
    """``(pi(x)_n, nu_n(I_n^j))`` from the block size and point mass."""
    if x.n != n:
        raise ValidationError(f"coordinate at level {x.n} given for level {n}")
    x.validate(spec)
    return x.block, spec.block_size(n, x.block) * spec.point_mass(n, x.block)


def projection_pushforward_check(spec: OdometerSpec, n: int) -> bool:
    """Every block of ``X_n`` carries exactly the ``mu_n`` mass of its digit."""
    target = Fraction(1, spec.radix(n))
    total = Fraction(0)
    for j in range(spec.radix(n)):
        _, mass = block_projection(spec, n, BlockCoordinate(n, j, 0))
        if mass != target:
            return False
        total += mass
    return total == 1


def project(spec: OdometerSpec, xs: Sequence[int]) -> AdicPrefix:
    """``pi`` on a prefix of points given by their positions in ``X_0, X_1, ...``."""
    return AdicPrefix(spec.k, tuple(BlockCoordinate.from_index(spec, n, x).block for n, x in enumerate(xs)))


# ---------------------------------------------------------------------------
# recurrence and the flow under the constant ceiling


@dataclass(frozen=True)
class RecurrenceReport:
    k: int
    samples: int
    horizon: int
    seed: int
    hits: tuple[int, ...]              # per sample pair
    frequency: tuple[Fraction, ...]    # per n = 1..horizon

    @property
    def mean(self) -> Fraction:
        return Fraction(sum(self.hits), self.samples)

    @property
    def minimum(self) -> int:
        return min(self.hits)


def sample_digits(spec: OdometerSpec, rng: np.random.Generator, samples: int, length: int) -> np.ndarray:
    radices = np.array([spec.radix(n) for n in range(length)])
    return rng.integers(0, radices, size=(samples, length))


def hit_matrix(spec: OdometerSpec, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``hits[s, n-1]`` is true when ``sum_{i<n} (z_i - w_i) = 0 (mod k)``."""
    return np.cumsum(z - w, axis=1) % spec.k == 0


def recurrence_stats(spec: OdometerSpec, samples: int, horizon: int, seed: int) -> RecurrenceReport:
    if samples < 1 or horizon < 1:
        raise ValidationError("samples and horizon must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    z = sample_digits(spec, rng, samples, horizon)
    w = sample_digits(spec, rng, samples, horizon)
    hits = hit_matrix(spec, z, w)
    per_sample = tuple(int(x) for x in hits.sum(axis=1))
    per_n = tuple(Fraction(int(x), samples) for x in hits.sum(axis=0))
    return RecurrenceReport(spec.k, samples, horizon, seed, per_sample, per_n)


def constant_ceiling_flow(spec: OdometerSpec, p: AdicPrefix, t, s, cylinder: bool = False) -> tuple[AdicPrefix, Fraction]:
    """Flow under the constant ceiling ``log lam``; ``t`` and ``s`` are in units of ``log lam``."""
    t, s = Fraction(t), Fraction(s)
    if p.k != spec.k:
        raise ValidationError("prefix and spec disagree on k")
    if not 0 <= t < 1:
        raise ValidationError(f"time {t} outside [0, 1) ceiling units")
    total = t + s
    steps = math.floor(total)
    return iterate(p, steps, cylinder), total - steps
