import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ergoflow.cli import canonical_hash, decimal_str, main, parse_config, run_suite
from ergoflow.errors import ParseError, ValidationError

TOY_CONFIG = {"spec": {"blocks": [[1, "1/2"], [2, "1/32"]], "epsilon0": {"base": "1/2", "scale": "1/2"},
                       "relations": [[2, "1/2", 5]]},
              "command": "flow", "params": {"depth": 2}}


def test_minimal_sequence_config():
    cfg = parse_config(json.dumps(TOY_CONFIG))
    assert len(cfg.spec) == 2 and cfg.command == "flow"


def test_decimal_lambda_is_exact():
    cfg = parse_config('{"command": "defects", "spec": {"blocks": [[1, "0.5"], [1, 0.25]]}}')
    assert cfg.spec.lam(1) == Fraction(1, 2) and cfg.spec.lam(2) == Fraction(1, 4)


def test_invariant_breach():
    with pytest.raises(ValidationError):
        parse_config('{"command": "defects", "spec": {"blocks": [[2, "1/2"]]}}')


def test_parse_error_has_position():
    with pytest.raises(ParseError, match="line 2 column"):
        parse_config('{"command": "defects",\n "spec": [}')
    with pytest.raises(ParseError, match="unknown section"):
        parse_config('{"command": "defects", "extra": 1}')


def test_identities_exit_zero(capsys):
    assert main(["identities"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("l,p,residue,split_sum,binomial,pass") and "false" not in out


def test_defects_table(tmp_path):
    assert main(["defects", "--preset", "constant", "--m", "30", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "defects.csv").read_text().splitlines()
    header = rows[0].split(",")
    assert header[:4] == ["range_length", "m", "variant", "value"]
    body = [r.split(",") for r in rows[1:]]
    assert len(body) == 30 * 6
    for r in body:
        value, bound = Fraction(r[3]), Fraction(r[5])
        assert 0 < value <= bound and r[-1] == "true"


def test_impossible_guard_exits_two(tmp_path):
    assert main(["defects", "--n", "5", "--m", "3"]) == 2
    assert main(["certify", "--m", "500", "--max-depth", "10"]) == 2


def test_failed_check_exits_one(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "recurrence", "spec": {"kind": "odometer", "lambda": 2, "k": 2},
                               "params": {"samples": 5, "N": 3, "min_hits": 4}}))
    assert main(["--config", str(cfg), "--seed", "1"]) == 1


def test_certify_json(tmp_path):
    assert main(["certify", "--preset", "constant", "--m", "23", "--format", "json", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "certify.json").read_text())
    assert doc["passed"] and len(doc["spec_hash"]) == 64 and len(doc["config_hash"]) == 64
    error = Fraction(doc["rows"][0][3])
    assert error > 0


def test_certify_epsilon(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "certify", "spec": {"preset": "constant", "length": 40},
                               "params": {"a": [[0], [1]], "epsilon": "1/10"}}))
    assert main(["--config", str(cfg), "--format", "json", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "certify.json").read_text())
    assert doc["summary"]["m"] == 13


def test_flow_apply(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({**TOY_CONFIG, "params": {"z": [2, 1], "s": {"1": -7}}}))
    assert main(["--config", str(cfg)]) == 0
    assert "apply,2 1,-7*log(1/2),0 0,0,32/1" in capsys.readouterr().out


@pytest.mark.parametrize("command", ["identities", "defects", "certify", "flow", "odometer", "recurrence"])
def test_deterministic_output(tmp_path, command):
    for fmt in ("csv", "json"):
        args = [command, "--format", fmt, "--seed", "9"]
        if command == "flow":
            args += ["--preset", "toy2"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        name = f"{command}.{fmt}"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_helpers():
    assert decimal_str(Fraction(1, 3), 5) == "0.33333"
    assert canonical_hash({"b": 1, "a": 2}) == canonical_hash({"a": 2, "b": 1})


junk = st.one_of(st.none(), st.booleans(), st.integers(-5, 50), st.text(max_size=5),
                 st.lists(st.integers(-2, 5), max_size=3), st.just("1/2"), st.just("0.5"))


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(["defects", "certify", "odometer", "recurrence", "nonsense"]),
       st.dictionaries(st.sampled_from(["n", "m", "a", "samples", "N", "n_max", "epsilon", "variants"]),
                       junk, max_size=3))
def test_exit_code_contract(command, params):
    try:
        cfg = parse_config(json.dumps({"command": command, "params": params}, default=str))
    except (ParseError, ValidationError):
        return
    for key in ("samples", "N", "n_max"):
        if isinstance(params.get(key), int) and params[key] > 10:
            return  # keep the run small
    status = run_suite(cfg).status
    assert status in (0, 1, 2)
