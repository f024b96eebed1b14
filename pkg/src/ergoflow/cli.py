"""Command line driver: one JSON config per run, deterministic CSV/JSON reports.

Exit status is 0 when every check passes, 1 when a check fails and 2 on
configuration or runtime errors.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import itertools
import json
import sys
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

from . import certify as cert
from . import flows, odometer, residues, spaces
from .errors import ErgoflowError, ParseError, ValidationError
from .numerics import LogLinearForm, MultiplicativeRelations, rational_str

COMMANDS = ("identities", "defects", "certify", "flow", "odometer", "recurrence")
ODOMETER_COMMANDS = ("odometer", "recurrence")
FORMATS = ("csv", "json")
DECIMAL_DIGITS = 20
SECTIONS = ("spec", "command", "params", "output")


def decimal_str(q: Fraction, digits: int = DECIMAL_DIGITS) -> str:
    with localcontext() as ctx:
        ctx.prec = digits
        return str(Decimal(q.numerator) / Decimal(q.denominator))


def canonical_hash(obj: Any) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    spec: spaces.SequenceSpec | odometer.OdometerSpec
    command: str
    params: dict = field(default_factory=dict)
    out_dir: Path | None = None
    fmt: str = "csv"
    seed: int = 0
    max_depth: int = 64

    def spec_json(self) -> dict:
        return self.spec.to_json()

    def canonical(self) -> dict:
        return {"spec": self.spec_json(), "command": self.command,
                "params": _jsonable(self.params), "format": self.fmt,
                "seed": self.seed, "max_depth": self.max_depth}


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return rational_str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _rational(value, where: str) -> Fraction:
    if isinstance(value, bool):
        raise ParseError(f"{where}: expected a rational, got a boolean")
    if isinstance(value, Decimal):
        return Fraction(value)
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ParseError(f"{where}: cannot read {value!r} as a rational") from None
    raise ParseError(f"{where}: expected a rational, got {type(value).__name__}")


def _int(value, where: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ValidationError(f"{where}: must be >= {minimum}, got {value}")
    return value


def _digits(value, where: str) -> tuple[int, ...]:
    if not isinstance(value, list):
        raise ParseError(f"{where}: expected a list of digits")
    return tuple(_int(d, f"{where}[{i}]") for i, d in enumerate(value))


def _sequence_spec(section: dict, length_hint: int | None) -> spaces.SequenceSpec:
    if "preset" in section:
        name = section["preset"]
        if name not in spaces.PRESETS:
            raise ValidationError(f"spec.preset: unknown preset {name!r}; choose from {sorted(spaces.PRESETS)}")
        length = section.get("length", length_hint)
        if length is not None:
            length = _int(length, "spec.length", 1)
        return spaces.PRESETS[name](length)
    if "blocks" not in section:
        raise ParseError("spec: needs either 'preset' or 'blocks'")
    blocks = []
    for i, block in enumerate(section["blocks"]):
        if not isinstance(block, list) or len(block) != 2:
            raise ParseError(f"spec.blocks[{i}]: expected [l, lambda]")
        blocks.append((_int(block[0], f"spec.blocks[{i}][0]"), _rational(block[1], f"spec.blocks[{i}][1]")))
    eps = None
    if "epsilon0" in section:
        e = section["epsilon0"]
        if not isinstance(e, dict) or "base" not in e:
            raise ParseError("spec.epsilon0: expected {'base': ..., 'scale': ...}")
        eps = spaces.Epsilon0.log_inverse(_rational(e["base"], "spec.epsilon0.base"),
                                          _rational(e.get("scale", 1), "spec.epsilon0.scale"))
    rels = []
    for i, r in enumerate(section.get("relations", [])):
        if not isinstance(r, list) or len(r) != 3:
            raise ParseError(f"spec.relations[{i}]: expected [index, base, exponent]")
        rels.append((_int(r[0], f"spec.relations[{i}][0]"), _rational(r[1], f"spec.relations[{i}][1]"),
                     _int(r[2], f"spec.relations[{i}][2]")))
    strict = section.get("strict", True)
    if not isinstance(strict, bool):
        raise ParseError("spec.strict: expected true or false")
    return spaces.SequenceSpec(tuple(blocks), eps, MultiplicativeRelations(tuple(rels)), strict)


def _odometer_spec(section: dict) -> odometer.OdometerSpec:
    try:
        return odometer.OdometerSpec(_int(section["lambda"], "spec.lambda"), _int(section["k"], "spec.k"))
    except KeyError as e:
        raise ParseError(f"spec.{e.args[0]}: missing") from None


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Read a JSON config.  ``overrides`` holds command line values that
    take precedence (``command``, ``seed``, ``max_depth``, ``format``,
    ``out``, ``preset``, ``length`` and any ``params`` keys under ``params``)."""
    try:
        raw = json.loads(text, parse_float=Decimal) if text.strip() else {}
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno} column {e.colno}: {e.msg}") from None
    if not isinstance(raw, dict):
        raise ParseError("line 1 column 1: the config must be a JSON object")
    for key in raw:
        if key not in SECTIONS:
            raise ParseError(f"unknown section {key!r}; expected one of {list(SECTIONS)}")
    overrides = overrides or {}
    command = overrides.get("command") or raw.get("command")
    if command not in COMMANDS:
        raise ValidationError(f"command: expected one of {list(COMMANDS)}, got {command!r}")
    params = raw.get("params", {})
    output = raw.get("output", {})
    spec_section = raw.get("spec", {})
    for name, section in (("params", params), ("output", output), ("spec", spec_section)):
        if not isinstance(section, dict):
            raise ParseError(f"{name}: expected an object")
    spec_section = dict(spec_section)
    params = {**params, **overrides.get("params", {})}
    if overrides.get("preset"):
        spec_section = {"preset": overrides["preset"]}
    if overrides.get("length") is not None:
        spec_section["length"] = overrides["length"]

    if command in ODOMETER_COMMANDS:
        if not spec_section:
            spec_section = {"kind": "odometer", "lambda": 2, "k": 2}
        if spec_section.get("kind") != "odometer":
            raise ValidationError(f"{command} needs an odometer spec (kind: odometer)")
        spec = _odometer_spec(spec_section)
    else:
        if spec_section.get("kind", "sequence") != "sequence":
            raise ValidationError(f"{command} needs a sequence spec")
        if not spec_section:
            spec_section = {"preset": "constant"}
        hint = None
        if "m" in params:
            hint = _int(params["m"], "params.m", 1)
        spec = _sequence_spec(spec_section, hint)

    fmt = overrides.get("format") or output.get("format", "csv")
    if fmt not in FORMATS:
        raise ValidationError(f"output.format: expected csv or json, got {fmt!r}")
    out = overrides.get("out") or output.get("dir")
    seed = overrides["seed"] if overrides.get("seed") is not None else params.get("seed", 0)
    seed = _int(seed, "seed", 0)
    if seed >= 2 ** 64:
        raise ValidationError("seed must fit in 64 bits")
    max_depth = overrides["max_depth"] if overrides.get("max_depth") is not None else params.get("max_depth", 64)
    max_depth = _int(max_depth, "max_depth", 1)
    return RunConfig(spec, command, params, Path(out) if out else None, fmt, seed, max_depth)


# ---------------------------------------------------------------------------
# reports


@dataclass
class Report:
    columns: list[str]
    rows: list[list]
    checks: dict[str, bool] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _cell(value) -> str:
    if isinstance(value, Fraction):
        return rational_str(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return " ".join(map(str, value))
    return str(value)


def render_csv(report: Report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(report.columns)
    for row in report.rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def render_json(report: Report, config: RunConfig) -> str:
    doc = {
        "command": config.command,
        "spec": config.spec_json(),
        "spec_hash": canonical_hash(config.spec_json()),
        "config_hash": canonical_hash(config.canonical()),
        "checks": report.checks,
        "passed": report.passed,
        "summary": _jsonable(report.summary),
        "columns": report.columns,
        "rows": [[_jsonable(list(v)) if isinstance(v, tuple) else _jsonable(v) for v in row]
                 for row in report.rows],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# commands


def _guard(value: int, name: str, config: RunConfig) -> int:
    if value > config.max_depth:
        raise ValidationError(f"{name}={value} exceeds max depth {config.max_depth}")
    return value


def cmd_identities(config: RunConfig) -> Report:
    p = config.params
    max_range = _guard(_int(p.get("max_range", 3), "params.max_range", 1), "max_range", config)
    max_l = _int(p.get("max_l", 3), "params.max_l", 1)
    rows, ok = [], True
    for r in range(1, max_range + 1):
        for ls in itertools.product(range(1, max_l + 1), repeat=r):
            for target in itertools.product(*(range(2 * l + 1) for l in ls)):
                lhs, rhs = residues.split_identity_sides(ls, target)
                graded = residues.class_sums_graded(ls, target) == residues.class_sums(ls, target)
                passed = lhs == rhs and graded
                ok &= passed
                rows.append([ls, target, sum(target) % 3, lhs, rhs, passed])
    return Report(["l", "p", "residue", "split_sum", "binomial", "pass"], rows,
                  {"split_identities": ok}, {"cases": len(rows)})


def cmd_defects(config: RunConfig) -> Report:
    p = config.params
    spec = config.spec
    n = _int(p.get("n", 0), "params.n", 0)
    m = _guard(_int(p.get("m", min(22, len(spec))), "params.m", 1), "m", config)
    if m <= n:
        raise ValidationError(f"need m > n, got n={n}, m={m}")
    variants = p.get("variants", list(residues.VARIANTS))
    if not isinstance(variants, list) or not all(v in residues.VARIANTS for v in variants):
        raise ValidationError(f"params.variants: expected a list drawn from {list(residues.VARIANTS)}")
    table = residues.defect_table(spec, n, m, variants)
    rows, dominated = [], True
    for mm, variant, value, bound in table:
        ok = value <= bound
        dominated &= ok
        rows.append([mm - n, mm, variant, value, decimal_str(value), bound, decimal_str(bound), ok])
    return Report(["range_length", "m", "variant", "value", "value_decimal", "bound", "bound_decimal",
                   "dominated"], rows, {"bound_dominated": dominated},
                  {"n": n, "m": m, "positive": all(r[3] > 0 for r in rows)})


def _targets(p: dict) -> list[tuple[int, ...]]:
    raw = p.get("a", [[0]])
    if raw and all(isinstance(x, int) and not isinstance(x, bool) for x in raw):
        raw = [raw]
    if not isinstance(raw, list) or not raw:
        raise ParseError("params.a: expected a digit list or a list of digit lists")
    return [_digits(a, f"params.a[{i}]") for i, a in enumerate(raw)]


def cmd_certify(config: RunConfig) -> Report:
    p = config.params
    spec = config.spec
    targets = _targets(p)
    oracle = bool(p.get("oracle", False))
    rows, checks, summary = [], {}, {}
    if "epsilon" in p:
        eps = _rational(p["epsilon"], "params.epsilon")
        fam = cert.certify_family(spec, [cert.StepFunction.indicator(spec, a) for a in targets], eps,
                                  config.max_depth, with_moves=False)
        for a, t in zip(targets, fam.targets):
            rows.append([a, fam.n, fam.m, t.error, decimal_str(t.error), t.error / t.norm, fam.bound, t.passed])
        checks["family"] = fam.passed
        summary = {"n": fam.n, "m": fam.m, "epsilon": eps, "bound": fam.bound, "f_terms": fam.f_terms}
    else:
        depths = {len(a) for a in targets}
        if len(depths) != 1:
            raise ValidationError("all targets must share one depth n")
        n = depths.pop()
        m = _guard(_int(p.get("m", n + 1), "params.m", 1), "m", config)
        if m <= n:
            raise ValidationError(f"need m > n, got n={n}, m={m}")
        for a in targets:
            c = cert.certify_cylinder(spec, a, n, m, oracle=oracle)
            rows.append([a, n, m, c.error, decimal_str(c.error), c.relative_error, c.bound, c.passed])
        checks["cylinders"] = all(r[-1] for r in rows)
        summary = {"n": n, "m": m, "oracle": oracle}
    return Report(["a", "n", "m", "error", "error_decimal", "relative_error", "bound", "pass"],
                  rows, checks, summary)


def _form(spec: spaces.SequenceSpec, raw, where: str) -> LogLinearForm:
    """``{"i": c, ...}`` meaning ``sum c * log lam_i``."""
    if not isinstance(raw, dict):
        raise ParseError(f"{where}: expected an object mapping coordinate to integer coefficient")
    form = LogLinearForm.zero()
    for key, c in sorted(raw.items()):
        try:
            i = int(key)
        except ValueError:
            raise ParseError(f"{where}.{key}: coordinate must be an integer") from None
        if not 1 <= i <= len(spec):
            raise ValidationError(f"{where}.{key}: coordinate outside 1..{len(spec)}")
        form = form + spec.log_lam(i, _int(c, f"{where}.{key}"))
    return form


def form_str(form: LogLinearForm, relations: MultiplicativeRelations) -> str:
    """Reduced atoms, e.g. ``-7*log(1/2)``; ``0`` for the zero form."""
    atoms = form.atoms(relations)
    if not atoms:
        return "0"
    return " + ".join(f"{c}*log({rational_str(b)})" for b, c in atoms.items())


def cmd_flow(config: RunConfig) -> Report:
    p = config.params
    spec = config.spec
    method = p.get("method", "auto")
    rows, checks = [], {}
    if "z" in p:
        z = flows.QuotientString(spec, _digits(p["z"], "params.z"))
        _guard(z.depth, "depth", config)
        s = _form(spec, p.get("s", {}), "params.s")
        image, rn = flows.flow_apply(flows.FlowPoint(z), s, method)
        back, rn_back = flows.flow_apply(image, -s, method)
        checks["roundtrip"] = back.base == z and not back.time and rn * rn_back == 1
        rel = spec.relations
        rows.append(["apply", z.digits, form_str(s, rel), image.base.digits, form_str(image.time, rel), rn])
    else:
        depth = _guard(_int(p.get("depth", min(2, len(spec))), "params.depth", 1), "depth", config)
        residue = _int(p.get("residue", 0), "params.residue", 0) % 3
        order = flows.orbit_order(spec, depth, residue)
        consistent = True
        for z in order:
            try:
                nxt, xi = flows.successor(z, method)
            except ErgoflowError:
                nxt, xi = None, None
            if nxt is not None and spaces.is_lacunary(spec, depth):
                consistent &= nxt == flows.successor(z, "enumerate")[0]
            rows.append(["orbit", z.digits, "", nxt.digits if nxt else "",
                         form_str(xi, spec.relations) if xi is not None else "",
                         flows.rn_ratio(z, nxt) if nxt else ""])
        checks["successor_consistent"] = consistent
    return Report(["kind", "z", "s", "image", "time_or_ceiling", "rn"], rows, checks)


def _odo(config: RunConfig) -> odometer.OdometerSpec:
    return config.spec  # type: ignore[return-value]


def cmd_odometer(config: RunConfig) -> Report:
    p = config.params
    spec = _odo(config)
    n_max = _guard(_int(p.get("n_max", 3), "params.n_max", 0), "n_max", config)
    length = _guard(_int(p.get("measure_length", 4), "params.measure_length", 1), "measure_length", config)
    proj = _int(p.get("projection_levels", 2), "params.projection_levels", 0)
    rows = []
    for n in range(n_max + 1):
        level = odometer.tower(spec, n)
        for j, cell in enumerate(level.cells):
            rows.append([n, j, cell, odometer.AdicPrefix(spec.k, cell).measure()])
    checks = {
        "tower_period": all(odometer.tower(spec, n).period == spec.period(n) for n in range(n_max + 1)),
        "refinement": all(odometer.refinement_check(spec, n) for n in range(n_max)),
        "adic_coding": odometer.adic_coding_check(spec, n_max),
        "measure_preserving": odometer.measure_preservation_check(spec, length),
        "projection": all(odometer.projection_pushforward_check(spec, n) for n in range(proj + 1)),
    }
    return Report(["n", "index", "cell", "measure"], rows, checks, {"n_max": n_max})


def cmd_recurrence(config: RunConfig) -> Report:
    p = config.params
    spec = _odo(config)
    samples = _int(p.get("samples", 2000), "params.samples", 1)
    horizon = _int(p.get("N", 200), "params.N", 1)
    rep = odometer.recurrence_stats(spec, samples, horizon, config.seed)
    rows = [[n, f, decimal_str(f)] for n, f in enumerate(rep.frequency, start=1)]
    checks = {}
    if "min_hits" in p:
        checks["min_hits"] = rep.minimum >= _int(p["min_hits"], "params.min_hits", 0)
    if "tolerance" in p:
        tol = _rational(p["tolerance"], "params.tolerance")
        checks["first_frequency"] = abs(rep.frequency[0] - Fraction(1, spec.k)) <= tol
    summary = {"samples": samples, "N": horizon, "seed": config.seed, "mean": rep.mean,
               "mean_decimal": decimal_str(rep.mean), "min": rep.minimum}
    return Report(["n", "frequency", "frequency_decimal"], rows, checks, summary)


DISPATCH: dict[str, Callable[[RunConfig], Report]] = {
    "identities": cmd_identities,
    "defects": cmd_defects,
    "certify": cmd_certify,
    "flow": cmd_flow,
    "odometer": cmd_odometer,
    "recurrence": cmd_recurrence,
}


@dataclass
class RunResult:
    status: int
    report: Report | None
    text: str
    error: str | None = None


def run_suite(config: RunConfig) -> RunResult:
    """Run the configured command and write its report (to ``out_dir`` if set)."""
    try:
        report = DISPATCH[config.command](config)
    except (ErgoflowError, ValueError, ArithmeticError, TypeError) as e:
        # TypeError here means a parameter of the wrong shape slipped through
        return RunResult(2, None, "", f"{type(e).__name__}: {e}")
    text = render_csv(report) if config.fmt == "csv" else render_json(report, config)
    if config.out_dir is not None:
        try:
            config.out_dir.mkdir(parents=True, exist_ok=True)
            (config.out_dir / f"{config.command}.{config.fmt}").write_text(text)
        except OSError as e:
            return RunResult(2, report, text, f"cannot write report: {e}")
    return RunResult(0 if report.passed else 1, report, text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergoflow", description=__doc__.splitlines()[0])
    parser.add_argument("command", nargs="?", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="JSON config with spec/command/params/output")
    parser.add_argument("--out", type=Path, help="directory for the report file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--max-depth", type=int, dest="max_depth")
    parser.add_argument("--format", choices=FORMATS)
    parser.add_argument("--preset", choices=sorted(spaces.PRESETS))
    parser.add_argument("--length", type=int, help="prefix length for presets that take one")
    parser.add_argument("--n", type=int)
    parser.add_argument("--m", type=int)
    parser.add_argument("--eps", help="target accuracy for certify, as p/q")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    params = {k: v for k, v in (("n", args.n), ("m", args.m), ("epsilon", args.eps)) if v is not None}
    overrides = {"command": args.command, "seed": args.seed, "max_depth": args.max_depth,
                 "format": args.format, "out": args.out, "preset": args.preset,
                 "length": args.length, "params": params}
    try:
        text = args.config.read_text() if args.config else ""
        config = parse_config(text, overrides)
    except (ErgoflowError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    result = run_suite(config)
    if result.error:
        print(f"error: {result.error}", file=sys.stderr)
        return result.status
    if config.out_dir is None:
        sys.stdout.write(result.text)
    else:
        for name, ok in result.report.checks.items():
            print(f"{name}: {'pass' if ok else 'FAIL'}")
    return result.status


if __name__ == "__main__":
    sys.exit(main())
