import json

import pytest
from flint import fmpq

from acaf import fields
from acaf.cli import (
    InputError,
    ProblemSpec,
    emit_report,
    load_problem,
    load_report,
    main,
    parse_problem,
    run_command,
)
from acaf.report import Check, Report


def test_empty_document_defaults():
    spec = parse_problem("")
    assert spec == ProblemSpec()
    assert (spec.n, spec.degree, spec.seed, spec.mode) == (6, 4, 0, "exact")


@pytest.mark.parametrize(
    "doc,field",
    [
        ("n: 7", "n"),
        ("n: 2", "n"),
        ("degree: -1", "degree"),
        ("mode: fast", "mode"),
        ("colour: red", "colour"),
        ("gamma: [[[0, 1], 1]]", "gamma"),
        ("gamma: [[[0, 1, 9], 1]]", "gamma"),
        ("gamma: [[[0, 1, 2], 0.5]]", "gamma"),
        ("theta: [[[0, 1], 1]]", "theta"),
    ],
)
def test_rejected_documents(doc, field):
    with pytest.raises(InputError) as err:
        parse_problem(doc)
    assert err.value.field == field
    assert err.value.line == 1


def test_yaml_error_has_line():
    with pytest.raises(InputError) as err:
        parse_problem("n: 6\nseed: [1,\n")
    assert err.value.line is not None


def test_sparse_gamma_densified():
    doc = "n: 4\ngamma:\n  - [[0, 1, 2], 3/2]\n  - [[1, 0, 2], [[[1, 0, 0, 0], 2], [[0, 0, 0, 0], -1]]]\n"
    spec = parse_problem(doc)
    G = spec.dense("gamma")
    x = fields.coords(4)
    want = fields.zeros(4, (4, 4, 4))
    want[0, 1, 2] = fields.const(4, fmpq(3, 2))
    want[1, 0, 2] = x[0] * 2 - 1
    assert fields.is_zero(G - want)
    assert not spec.connection().torsion_free


def test_empty_gamma_is_flat():
    assert fields.is_zero(parse_problem("gamma: []").connection().gamma)


def test_load_problem_from_file(tmp_path):
    p = tmp_path / "prob.yaml"
    p.write_text("n: 8\nseed: 3\n")
    spec = load_problem(p)
    assert spec.n == 8 and spec.seed == 3


def test_eigenvalue_table():
    rep = run_command("eigenvalues", ProblemSpec())
    table = "\n".join(rep.data["table"])
    assert "k=0 slot r: -6" in table and "k=1 slot r: -10" in table
    assert rep["top slot eigenvalue k=2 = -(k+1)(n-k)"].passed


def test_nabla0_flat():
    rep = run_command("nabla0", parse_problem("gamma: []"))
    assert rep.passed


def test_cohomology_verb():
    assert run_command("cohomology", ProblemSpec()).passed


def test_curvature_needs_n6():
    with pytest.raises(InputError):
        run_command("curvature", ProblemSpec(n=4))


def test_empty_report_formats():
    rep = Report("empty")
    assert emit_report(rep, "text").startswith("empty: PASS")
    d = json.loads(emit_report(rep, "json", "selftest"))
    assert d["checks"] == [] and d["schema_version"] == 1


def test_json_roundtrip():
    rep = Report("r")
    rep.add(Check("a", True, "0"))
    rep.add(Check("b", False, "1 nonzero", "why", required=False))
    back = load_report(emit_report(rep, "json", "x"))
    assert [(c.name, c.passed, c.required) for c in back.checks] == [("a", True, True), ("b", False, False)]
    assert back.passed


def test_load_report_rejects_schema():
    with pytest.raises(InputError):
        load_report(json.dumps({"schema_version": 99}))


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("n: 5\n")
    assert main(["nabla0", str(bad)]) == 2
    assert "line 1" in capsys.readouterr().err
    assert main(["nabla0", "--flat"]) == 0
    assert main(["curvature", "--n", "4"]) == 2
    assert main(["nabla0", "--mode", "float"]) == 2
    assert main(["nabla0", "--criteria", "1"]) == 2
    assert main(["eigenvalues"]) == 1


def test_json_output_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["cohomology", "--format", "json", "--out", str(a)]) == 0
    assert main(["cohomology", "--format", "json", "--out", str(b)]) == 0
    assert a.read_text() == b.read_text()
    assert json.loads(a.read_text())["verb"] == "cohomology"


def test_bgg_verify_flat():
    rep = run_command("bgg-verify", parse_problem("n: 6\ngamma: []\n"), samples=1)
    assert rep.passed
