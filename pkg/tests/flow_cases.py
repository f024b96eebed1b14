"""Random flow instances shared by the flow tests and the acceptance run."""
import random
from dataclasses import dataclass
from fractions import Fraction
from math import comb, prod

from ergoflow.errors import Boundary
from ergoflow.flows import FlowPoint, QuotientString, cocycle_form, flow_apply, rn_ratio
from ergoflow.numerics import LogLinearForm
from ergoflow.spaces import dyadic, toy2

SPECS = [toy2(), dyadic([1, 1, 2]), dyadic([1, 1, 2, 2]), dyadic([1, 1, 1, 2])]


def random_string(rng: random.Random, spec, depth: int, residue: int | None = None) -> QuotientString:
    while True:
        digits = tuple(rng.randrange(spec.radix(i)) for i in range(1, depth + 1))
        if residue is None or sum(digits) % 3 == residue:
            return QuotientString(spec, digits)


def random_time(rng: random.Random, spec, depth: int) -> LogLinearForm:
    s = LogLinearForm.zero()
    for _ in range(rng.randrange(1, 3)):
        i = rng.randrange(1, depth + 1)
        s = s + spec.log_lam(i, rng.randrange(-3, 4))
    return s


@dataclass
class LawResult:
    additivity: bool
    chain_rule: bool
    roundtrip: bool
    compatibility: bool
    random_time: bool  # False when the random time ran off the finite orbit


def check_laws(rng: random.Random) -> LawResult:
    spec = rng.choice(SPECS)
    depth = rng.randrange(1, min(4, len(spec)) + 1)
    x = random_string(rng, spec, depth)
    y = random_string(rng, spec, depth, x.residue)
    z = random_string(rng, spec, depth, x.residue)

    additivity = cocycle_form(x, z) == cocycle_form(x, y) + cocycle_form(y, z)
    chain = rn_ratio(x, z) == rn_ratio(x, y) * rn_ratio(y, z)

    # RN = binomial ratio * exp(cocycle), exp of the cocycle being prod lam**(y-x)
    binom = prod((Fraction(comb(2 * spec.l(i), b), comb(2 * spec.l(i), a))
                  for i, (a, b) in enumerate(zip(x.digits, y.digits), start=1)), start=Fraction(1))
    lam_power = prod((spec.lam(i) ** (b - a) for i, (a, b) in enumerate(zip(x.digits, y.digits), start=1)),
                     start=Fraction(1))
    compat = rn_ratio(x, y) == binom * lam_power

    used_random = rng.random() < 0.5
    s = random_time(rng, spec, depth) if used_random else cocycle_form(x, y)
    try:
        image, rn = flow_apply(FlowPoint(x), s)
    except Boundary:
        # the orbit is finite at this depth; the cocycle to y always stays inside it
        used_random = False
        s = cocycle_form(x, y)
        image, rn = flow_apply(FlowPoint(x), s)
    if not used_random:
        roundtrip_target = image.base == y and image.time.is_zero
    else:
        roundtrip_target = True
    back, rn_back = flow_apply(image, -s)
    roundtrip = roundtrip_target and back.base == x and not back.time and rn * rn_back == 1
    return LawResult(additivity, chain, roundtrip, compat, used_random)
