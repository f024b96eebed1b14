"""Explicit approximate-transitivity certificates for the flow under the ceiling.

The approximating function is

    f = sum_{j} prod_{i>n} C(l_i, j_i) / C(2 l_i, j_i) * 1[C(0_n, j) x [0, delta)]

with ``0 <= j_i <= l_i``.  For a target cylinder ``C(a)`` of depth ``n`` the
moves are indexed by ``k`` with ``sum(k) = -sum(a) mod 3``; move ``k`` pushes
``C(0_n, j)`` onto ``C(a, j + k)`` along the flow for time
``s(a) + s(k) = sum(a_i log lam_i) + sum(k_i log lam_i)`` (the full cocycle).
Weighted by ``3 prod C(2l, a) lam**a * prod C(l, k) lam**k`` the transported
copies of ``f`` reproduce ``1[C(a)]`` up to an L1 error that equals
``nu(C(a))`` times the sum of the three defects whose pairing contains
``s``.

All L1 norms are in units of the fiber length ``delta``, which is never
given a numeric value.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, prod
from types import MappingProxyType
from typing import Iterator, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import DepthExceeded, EnumerationTooLarge, InfeasibleModel, ValidationError
from .flows import FlowPoint, QuotientString, cocycle_form, flow_apply, rn_ratio
from .numerics import LogLinearForm, Ordering, compare
from .residues import defect_blocks, defect_bound, variants_with_class
from .spaces import SequenceSpec, digits_measure, is_lacunary

TERM_ENUMERATION_LIMIT = 10 ** 6

Digits = tuple[int, ...]


class StepFunction:
    """Nonnegative combination of cylinder indicators times the fiber ``[0, delta)``.

    Keys are digit tuples ``(a_1, ..., a_d)`` naming ``C(a_1, ..., a_d)``.
    Overlapping cylinders are refined to a common depth and merged.
    """

    __slots__ = ("spec", "terms")

    def __init__(self, spec: SequenceSpec, terms: Mapping[Sequence[int], Fraction] | None = None):
        self.spec = spec
        clean: dict[Digits, Fraction] = {}
        for digits, c in (terms or {}).items():
            digits = tuple(digits)
            c = Fraction(c)
            if c < 0:
                raise ValidationError(f"negative coefficient {c} on cylinder {digits}")
            spec.check_digits(digits)
            if c:
                clean[digits] = clean.get(digits, Fraction(0)) + c
        if _has_overlap(clean):
            depth = max(map(len, clean))
            clean = _refine_terms(spec, clean, depth)
        self.terms = MappingProxyType(dict(sorted(clean.items())))

    @classmethod
    def indicator(cls, spec: SequenceSpec, digits: Sequence[int], coeff=1) -> StepFunction:
        return cls(spec, {tuple(digits): Fraction(coeff)})

    @property
    def depth(self) -> int:
        return max(map(len, self.terms), default=0)

    def refine(self, depth: int) -> StepFunction:
        if depth < self.depth:
            raise ValidationError(f"cannot refine depth {self.depth} to shallower depth {depth}")
        return StepFunction(self.spec, _refine_terms(self.spec, self.terms, depth))

    def l1_norm(self) -> Fraction:
        return sum((c * digits_measure(self.spec, d) for d, c in self.terms.items()), Fraction(0))

    def __add__(self, other: StepFunction) -> StepFunction:
        depth = max(self.depth, other.depth)
        terms = dict(self.refine(depth).terms)
        for d, c in other.refine(depth).terms.items():
            terms[d] = terms.get(d, Fraction(0)) + c
        return StepFunction(self.spec, terms)

    def scaled(self, k) -> StepFunction:
        return StepFunction(self.spec, {d: Fraction(k) * c for d, c in self.terms.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepFunction) or self.spec != other.spec:
            return NotImplemented
        depth = max(self.depth, other.depth)
        return self.refine(depth).terms == other.refine(depth).terms

    def __repr__(self) -> str:
        return f"StepFunction({len(self.terms)} cylinders, depth {self.depth})"


def _has_overlap(terms: Mapping[Digits, Fraction]) -> bool:
    depths = {len(d) for d in terms}
    if len(depths) <= 1:
        return False
    keys = set(terms)
    for d in terms:
        for cut in range(len(d)):
            if d[:cut] in keys:
                return True
    return False


def _extensions(spec: SequenceSpec, digits: Digits, depth: int) -> Iterator[Digits]:
    tails = [range(spec.radix(i)) for i in range(len(digits) + 1, depth + 1)]
    for tail in itertools.product(*tails):
        yield digits + tail


def _refine_terms(spec: SequenceSpec, terms: Mapping[Digits, Fraction], depth: int) -> dict[Digits, Fraction]:
    out: dict[Digits, Fraction] = {}
    for digits, c in terms.items():
        for ext in _extensions(spec, digits, depth):
            out[ext] = out.get(ext, Fraction(0)) + c
    return out


def _signed_l1(spec: SequenceSpec, plus: Mapping[Digits, Fraction], minus: Mapping[Digits, Fraction]) -> Fraction:
    depth = max(max(map(len, plus), default=0), max(map(len, minus), default=0))
    p = _refine_terms(spec, plus, depth)
    q = _refine_terms(spec, minus, depth)
    total = Fraction(0)
    for d in set(p) | set(q):
        total += abs(p.get(d, Fraction(0)) - q.get(d, Fraction(0))) * digits_measure(spec, d)
    return total


def l1_distance(f: StepFunction, g: StepFunction) -> Fraction:
    return _signed_l1(f.spec, f.terms, g.terms)


# ---------------------------------------------------------------------------
# the approximating function and its moves


def _f_coefficient(ls: Sequence[int], j: Sequence[int]) -> Fraction:
    return prod((Fraction(comb(l, x), comb(2 * l, x)) for l, x in zip(ls, j)), start=Fraction(1))


def iter_f_terms(spec: SequenceSpec, n: int, m: int) -> Iterator[tuple[Digits, Fraction]]:
    """Terms of ``f`` one at a time: ``(cylinder digits, coefficient)``."""
    if not 0 <= n <= m <= len(spec):
        raise ValidationError(f"need 0 <= n <= m <= {len(spec)}, got n={n}, m={m}")
    ls = [spec.l(i) for i in range(n + 1, m + 1)]
    head = (0,) * n
    for j in itertools.product(*(range(l + 1) for l in ls)):
        yield head + j, _f_coefficient(ls, j)


def build_f(spec: SequenceSpec, n: int, m: int) -> StepFunction:
    size = prod(spec.l(i) + 1 for i in range(n + 1, m + 1))
    if size > TERM_ENUMERATION_LIMIT:
        raise EnumerationTooLarge(f"f has {size} terms; use iter_f_terms")
    return StepFunction(spec, dict(iter_f_terms(spec, n, m)))


@dataclass(frozen=True)
class Move:
    """One transported copy: ``weight * (f o F_{-time}) * dmu F_{-time} / dmu``.

    ``shift`` is the digit displacement ``(a, k)`` the move applies to a
    depth-``m`` cylinder; ``tail_time`` is ``s(k)`` alone, kept to compare
    with the shorter flow time ``s(k)``.
    """

    time: LogLinearForm
    weight: Fraction
    shift: Digits
    tail_time: LogLinearForm


@dataclass(frozen=True)
class MoveFamily:
    a: Digits
    m: int
    moves: tuple[Move, ...]

    @property
    def total_weight(self) -> Fraction:
        return sum((mv.weight for mv in self.moves), Fraction(0))

    def __len__(self) -> int:
        return len(self.moves)


def residue_class_of_moves(a: Sequence[int]) -> int:
    return (-sum(a)) % 3


def approx_moves(spec: SequenceSpec, a: Sequence[int], m: int) -> MoveFamily:
    a = tuple(a)
    n = len(a)
    if not n < m <= len(spec):
        raise ValidationError(f"need len(a) < m <= {len(spec)}, got n={n}, m={m}")
    spec.check_digits(a)
    s = residue_class_of_moves(a)
    head = prod((comb(2 * spec.l(i), ai) * spec.lam(i) ** ai for i, ai in enumerate(a, start=1)),
                start=Fraction(1))
    head_time = spec.digit_form(a)
    ls = [spec.l(i) for i in range(n + 1, m + 1)]
    lams = [spec.lam(i) for i in range(n + 1, m + 1)]
    moves = []
    for k in itertools.product(*(range(l + 1) for l in ls)):
        if sum(k) % 3 != s:
            continue
        weight = 3 * head * prod((comb(l, x) * lam ** x for l, lam, x in zip(ls, lams, k)), start=Fraction(1))
        tail = spec.digit_form(k, start=n + 1)
        moves.append(Move(head_time + tail, weight, a + k, tail))
    return MoveFamily(a, m, tuple(moves))


# ---------------------------------------------------------------------------
# direct transport (oracle route)


def _transport_term(spec: SequenceSpec, digits: Digits, move: Move, mode: str) -> tuple[Digits, Fraction]:
    """Image cylinder of ``C(digits)`` under ``F_time`` and the factor
    ``dmu F_{-time}/dmu`` on it."""
    z = QuotientString(spec, digits)
    if mode == "flow":
        image, rn_forward = flow_apply(FlowPoint(z), move.time)
        if image.time:
            raise ValidationError(f"move does not land at equal time from {digits}")
        return image.base.digits, 1 / rn_forward
    if len(move.shift) != len(digits):
        raise ValidationError("move shift and cylinder depth differ")
    target = tuple(x + y for x, y in zip(digits, move.shift))
    spec.check_digits(target)
    w = QuotientString(spec, target)
    if compare(cocycle_form(z, w), move.time, spec.relations) != Ordering.EQUAL:
        raise ValidationError(f"move time does not match the cocycle from {digits} to {target}")
    return target, rn_ratio(w, z)


def apply_moves(spec: SequenceSpec, f: StepFunction, moves: Sequence[Move], mode: str = "auto") -> StepFunction:
    """``sum(weight * f o F_{-time} * dmu F_{-time}/dmu)`` as a step function.

    ``mode="flow"`` walks the first-return map for every cylinder (lacunary
    specs only); ``"cylinder"`` translates digits and checks the cocycle.
    """
    if mode == "auto":
        mode = "flow" if is_lacunary(spec, f.depth) else "cylinder"
    out: dict[Digits, Fraction] = {}
    for move in moves:
        if move.weight == 0:
            continue
        for digits, c in f.terms.items():
            target, factor = _transport_term(spec, digits, move, mode)
            out[target] = out.get(target, Fraction(0)) + move.weight * c * factor
    return StepFunction(spec, out)


def transport_error(spec: SequenceSpec, f: StepFunction, moves: Sequence[Move],
                    target: StepFunction, mode: str = "auto") -> Fraction:
    return l1_distance(apply_moves(spec, f, moves, mode), target)


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class CylinderCertificate:
    a: Digits
    n: int
    m: int
    error: Fraction          # delta units
    bound: Fraction          # bound on error / nu(C(a))
    measure: Fraction        # nu(C(a))
    passed: bool

    @property
    def relative_error(self) -> Fraction:
        return self.error / self.measure


def certify_cylinder(spec: SequenceSpec, a: Sequence[int], n: int | None = None, m: int = 0,
                     oracle: bool = False, mode: str = "auto") -> CylinderCertificate:
    """Exact L1 error of the explicit approximation of ``1[C(a) x [0, delta)]``.

    The closed form uses the graded defects.  With ``oracle=True`` the
    error is also computed by transporting ``f`` cylinder by cylinder and
    the two must agree exactly.
    """
    a = tuple(a)
    if n is None:
        n = len(a)
    if n != len(a):
        raise ValidationError(f"n={n} but a has {len(a)} digits")
    if not n < m <= len(spec):
        raise ValidationError(f"need n < m <= {len(spec)}, got n={n}, m={m}")
    spec.check_digits(a)
    blocks = spec.blocks[n:m]
    s = residue_class_of_moves(a)
    relative = sum((defect_blocks(blocks, v) for v in variants_with_class(s)), Fraction(0))
    measure = digits_measure(spec, a)
    error = relative * measure
    bound = defect_bound(blocks)
    if oracle:
        direct = transport_error(spec, build_f(spec, n, m), approx_moves(spec, a, m).moves,
                                 StepFunction.indicator(spec, a), mode)
        if direct != error:
            raise AssertionError(f"closed form {error} != direct transport {direct} for a={a}, m={m}")
    return CylinderCertificate(a, n, m, error, bound, measure, relative <= bound)


@dataclass(frozen=True)
class TargetCertificate:
    target: StepFunction
    norm: Fraction
    error: Fraction
    moves: tuple[tuple[Fraction, MoveFamily], ...]  # (target coefficient, family) per cylinder
    passed: bool


@dataclass(frozen=True)
class FamilyCertificate:
    n: int
    m: int
    epsilon: Fraction
    bound: Fraction
    targets: tuple[TargetCertificate, ...]
    f_terms: int = field(default=0)

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.targets)


def choose_depth(spec: SequenceSpec, n: int, epsilon: Fraction, max_depth: int | None = None) -> int:
    """Smallest ``m > n`` whose defect bound is at most ``epsilon``."""
    limit = len(spec) if max_depth is None else min(max_depth, len(spec))
    bound = Fraction(2)
    for m in range(n + 1, limit + 1):
        l, lam = spec.blocks[m - 1]
        bound *= (1 - lam / (1 + lam) ** 2) ** l
        if bound <= epsilon:
            return m
    raise DepthExceeded(f"defect bound stays above {epsilon} up to depth {limit}")


def certify_family(spec: SequenceSpec, targets: Sequence[StepFunction], epsilon,
                   max_depth: int | None = None, with_moves: bool = True) -> FamilyCertificate:
    """Approximate every target within ``epsilon * ||target||`` by one ``f``."""
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    if not targets:
        raise ValidationError("no targets")
    n = max(t.depth for t in targets)
    m = choose_depth(spec, n, epsilon, max_depth)
    certs = []
    for target in targets:
        refined = target.refine(n)
        error = Fraction(0)
        families = []
        for a, c in refined.terms.items():
            error += c * certify_cylinder(spec, a, n, m).error
            if with_moves:
                families.append((c, approx_moves(spec, a, m)))
        norm = refined.l1_norm()
        certs.append(TargetCertificate(target, norm, error, tuple(families), error <= epsilon * norm))
    f_terms = prod(spec.l(i) + 1 for i in range(n + 1, m + 1))
    return FamilyCertificate(n, m, epsilon, defect_bound(spec.blocks[n:m]), tuple(certs), f_terms)


# ---------------------------------------------------------------------------
# best nonnegative coefficients (LP refinement, not part of the explicit construction)


@dataclass(frozen=True)
class OptimizationResult:
    weights: tuple[tuple[Fraction, ...], ...]
    errors: tuple[Fraction, ...]


def _weighted_error(spec, basis_terms, target_terms, weights, cells) -> Fraction:
    total = Fraction(0)
    for d in cells:
        approx = sum((w * b.get(d, Fraction(0)) for w, b in zip(weights, basis_terms)), Fraction(0))
        total += abs(target_terms.get(d, Fraction(0)) - approx) * digits_measure(spec, d)
    return total


def optimize_coefficients(basis: Sequence[StepFunction], targets: Sequence[StepFunction],
                          reference: Sequence[Sequence[Fraction]] | None = None) -> OptimizationResult:
    """Nonnegative weights minimizing the L1 error of ``sum(w_i * basis_i)``.

    Solved as a linear program over the common refinement; the error is
    then recomputed exactly for the returned weights.  When ``reference``
    weights are supplied (one row per target) the better of the two is
    returned, so the result never exceeds the reference error.
    """
    if not basis:
        raise InfeasibleModel("empty basis")
    spec = basis[0].spec
    depth = max([b.depth for b in basis] + [t.depth for t in targets])
    basis_terms = [dict(b.refine(depth).terms) for b in basis]
    all_weights, all_errors = [], []
    for row, target in enumerate(targets):
        target_terms = dict(target.refine(depth).terms)
        cells = sorted(set(target_terms).union(*basis_terms))
        if not target_terms:
            weights = tuple(Fraction(0) for _ in basis)
            all_weights.append(weights)
            all_errors.append(_weighted_error(spec, basis_terms, target_terms, weights, cells))
            continue
        weights = _solve_l1_lp(spec, basis_terms, target_terms, cells)
        error = _weighted_error(spec, basis_terms, target_terms, weights, cells)
        if reference is not None:
            ref = tuple(Fraction(w) for w in reference[row])
            ref_error = _weighted_error(spec, basis_terms, target_terms, ref, cells)
            if ref_error < error:
                weights, error = ref, ref_error
        all_weights.append(weights)
        all_errors.append(error)
    return OptimizationResult(tuple(all_weights), tuple(all_errors))


def _solve_l1_lp(spec, basis_terms, target_terms, cells) -> tuple[Fraction, ...]:
    # variables: weights w (k of them) then slack e per cell; minimize sum mu_c e_c
    k, c = len(basis_terms), len(cells)
    mu = np.array([float(digits_measure(spec, d)) for d in cells])
    B = np.array([[float(b.get(d, 0)) for b in basis_terms] for d in cells])
    t = np.array([float(target_terms.get(d, 0)) for d in cells])
    scale = mu.max() if c else 1.0
    cost = np.concatenate([np.zeros(k), mu / scale])
    eye = np.eye(c)
    a_ub = np.block([[B, -eye], [-B, -eye]])
    b_ub = np.concatenate([t, -t])
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=[(0, None)] * (k + c), method="highs")
    if not res.success:
        raise InfeasibleModel(f"linear program failed: {res.message}")
    return tuple(Fraction(max(0.0, float(x))) for x in res.x[:k])
