import json

import pytest
from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

from nfforge.cli import (
    EXIT_HYPOTHESIS,
    EXIT_OK,
    EXIT_PARSE,
    ParseError,
    main,
    parse_system,
    parse_system_data,
    run_pipeline,
    serialize_system,
)
from nfforge.integrability import IntegrabilityWarning
from nfforge.spectrum import Case
from oracles import FIXTURES

VALID = ["hyperbolic2d", "elliptic2d", "hyperbolic3d", "weak3d", "weak2d"]
NEGATIVE = {"obstruction": EXIT_HYPOTHESIS, "violating_integral": EXIT_HYPOTHESIS,
            "nonsemisimple": EXIT_HYPOTHESIS, "bad_rational": EXIT_PARSE}


def fixture(name):
    return str(FIXTURES / f"{name}.json")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


def base(**extra):
    data = {"dimension": 2, "order": 3, "linear_part": [["1", "0"], ["0", "-1"]],
            "higher_order": [[], []], "first_integrals": [[{"exponents": [1, 1], "coeff_re": "1"}]]}
    data.update(extra)
    return data


# ---------------------------------------------------------------- parsing


def test_parse_hyperbolic_fixture():
    system, _ = parse_system(fixture("hyperbolic2d"))
    rep = run_pipeline("classify", system)
    assert rep.data["classification"]["case"] == Case.STRONG_HYPERBOLIC.value


def test_parse_rejects_zero_denominator():
    with pytest.raises(ParseError):
        parse_system(fixture("bad_rational"))


def test_parse_warns_on_violating_integral():
    with pytest.warns(IntegrabilityWarning):
        system, _ = parse_system(fixture("violating_integral"))
    assert not system.integrable


@pytest.mark.parametrize("patch", [
    {"linear_part": [["1", "0"]]},
    {"linear_part": [[1.5, 0], [0, -1]]},
    {"higher_order": [[{"exponents": [1, 0], "coeff_re": "1"}], []]},
    {"higher_order": [[{"exponents": [2, 0, 1], "coeff_re": "1"}], []]},
    {"higher_order": [[{"exponents": [3, 1], "coeff_re": "1"}], []]},
    {"dimension": 0},
])
def test_parse_errors(patch):
    with pytest.raises(ParseError):
        parse_system_data(base(**patch))


def test_parse_lowest_terms_on_output():
    system, _ = parse_system_data(base(linear_part=[["2/2", "0"], ["0", "-4/4"]]))
    assert serialize_system(system)["linear_part"] == [["1", "0"], ["0", "-1"]]


@pytest.mark.parametrize("name", VALID)
def test_round_trip_fixtures(name):
    system, numeric = parse_system(fixture(name))
    again, numeric2 = parse_system_data(json.loads(json.dumps(serialize_system(system, numeric))))
    assert again.X == system.X and again.first_integrals == system.first_integrals
    assert numeric2 == numeric


fractions = st.builds(lambda p, q: mpq(p, q), st.integers(-50, 50), st.integers(1, 50))


@given(st.lists(st.tuples(st.sampled_from([(2, 0), (1, 1), (0, 2), (2, 1), (0, 3)]), st.integers(0, 1),
                          fractions), max_size=6))
def test_round_trip_random_terms(terms):
    higher = [[], []]
    for e, comp, c in terms:
        higher[comp].append({"exponents": list(e), "coeff_re": str(c)})
    system, _ = parse_system_data(base(higher_order=higher, first_integrals=[]))
    again, _ = parse_system_data(json.loads(json.dumps(serialize_system(system))))
    assert again.X == system.X


# ---------------------------------------------------------------- commands


def test_classify_weak3d(capsys):
    code, out = run(capsys, "classify", fixture("weak3d"))
    assert code == EXIT_OK
    assert out["classification"]["case"] == "WeakHyperbolic" and out["classification"]["k"] == 1


def test_invariants_command(capsys):
    code, out = run(capsys, "invariants", fixture("hyperbolic2d"))
    assert code == EXIT_OK and out["invariants"]["hilbert_basis"] == [[1, 1]]


def test_normalize_command(capsys):
    code, out = run(capsys, "normalize", "--order", "5", fixture("elliptic2d"))
    assert code == EXIT_OK
    nf = out["normal_form"]
    assert nf["residual_order"] == 5 and nf["exact_check"]["ok"]


def test_nonsemisimple_diagnostic(capsys):
    code, out = run(capsys, "normalize", fixture("nonsemisimple"))
    assert code == EXIT_HYPOTHESIS and "semisimple" in out["diagnostic"]


def test_obstruction_reported(capsys):
    code, out = run(capsys, "normalize", fixture("obstruction"))
    assert code == EXIT_HYPOTHESIS and out["obstruction"]["degree"] == 3


def test_elliptic_report_period_pass(capsys):
    code, out = run(capsys, "report", fixture("elliptic2d"))
    assert code == EXIT_OK
    assert out["scans"]["period"]["passed"] and out["verdict"] == "PASS"


def test_verify_with_radii(capsys):
    code, out = run(capsys, "verify", "--radii", "0.1,0.03,0.01", "--seed", "3", fixture("hyperbolic3d"))
    assert code == EXIT_OK
    assert out["scans"]["conjugacy"]["radii"] == [0.1, 0.03, 0.01]


def test_bad_arguments_exit_2(capsys):
    assert main(["verify", "--radii", "0.1", fixture("hyperbolic2d")]) == EXIT_PARSE
    assert main(["frobnicate", fixture("hyperbolic2d")]) == EXIT_PARSE
    capsys.readouterr()


@pytest.mark.parametrize("name", VALID)
def test_exit_codes_valid(capsys, name):
    code, out = run(capsys, "report", fixture(name))
    assert code == EXIT_OK, out.get("diagnostic")


@pytest.mark.parametrize("name, expected", sorted(NEGATIVE.items()))
def test_exit_codes_negative(capsys, name, expected):
    code, out = run(capsys, "report", fixture(name))
    assert code == expected and out["exit_code"] == expected


def test_missing_file(capsys):
    code, out = run(capsys, "classify", "/nonexistent/system.json")
    assert code == EXIT_PARSE and "parse error" in out["error"]


def test_report_writes_sidecars(tmp_path, capsys):
    code = main(["report", fixture("weak2d"), "--out", str(tmp_path)])
    stdout = capsys.readouterr().out
    assert code == EXIT_OK
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["report.json", "scan_conjugacy.csv", "scan_locus.csv"]
    assert (tmp_path / "report.json").read_text() == stdout
    assert (tmp_path / "scan_locus.csv").read_text().startswith("y,x,field_norm\n")


def test_report_is_deterministic(capsys):
    main(["report", fixture("hyperbolic3d")])
    first = capsys.readouterr().out
    main(["report", fixture("hyperbolic3d")])
    assert capsys.readouterr().out == first
