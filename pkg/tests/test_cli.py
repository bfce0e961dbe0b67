"""The command line: payload output, text rendering, argument literals,
and the exit code contract."""

import json

import pytest

import vdmslice as v
from vdmslice import cli


def corpus(name: str) -> str:
    return str(v.corpus_path(name))


def run_main(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ---------------- slice ----------------

def test_slice_json_payload_schema(capsys):
    code, out, err = run_main(
        capsys,
        "slice",
        corpus("memberbook_bad.vdmsl"),
        "--operation",
        "register",
        "--criterion",
        "post:1",
    )
    assert code == 0
    assert err == ""
    payload = json.loads(out)
    assert payload["operation"] == "register"
    assert payload["criterion"] == {"kind": "post", "detail": "1"}
    assert payload["mode"] == "weak"
    assert payload["file"].endswith("memberbook_bad.vdmsl")
    assert payload["slice"], "the slice must not be empty"
    for entry in payload["slice"] + payload["criterionNodes"]:
        assert set(entry) == {"nodeId", "kind", "start", "end"}
        assert set(entry["start"]) == {"line", "column"}
        assert entry["start"]["line"] >= 1 and entry["start"]["column"] >= 1


def test_slice_output_is_byte_stable(capsys):
    argv = (
        "slice",
        corpus("twoops.vdmsl"),
        "--operation",
        "op2",
        "--criterion",
        "result",
        "--mode",
        "strong",
    )
    first = run_main(capsys, *argv)
    second = run_main(capsys, *argv)
    assert first == second
    assert first[0] == 0
    assert first[1].endswith("\n")


def test_text_rendering_matches_the_json_line_sets(capsys):
    argv = (
        "slice",
        corpus("memberbook_fixed.vdmsl"),
        "--operation",
        "register",
        "--criterion",
        "state:EmailBook",
    )
    _, json_out, _ = run_main(capsys, *argv)
    code, text_out, _ = run_main(capsys, *argv, "--format", "text")
    assert code == 0
    payload = json.loads(json_out)

    def line_set(entries):
        lines = set()
        for e in entries:
            lines.update(range(e["start"]["line"], e["end"]["line"] + 1))
        return lines

    marked = {"*": set(), ">": set()}
    source_lines = text_out.splitlines()
    assert len(source_lines) == len(
        v.corpus_path("memberbook_fixed.vdmsl").read_text().splitlines()
    )
    for line in source_lines:
        number, marker = int(line[:4]), line[5]
        assert line[4] == " " and line[6] == " "
        if marker in marked:
            marked[marker].add(number)
    criterion_lines = line_set(payload["criterionNodes"])
    assert marked[">"] == criterion_lines
    assert marked["*"] == line_set(payload["slice"]) - criterion_lines


def test_slice_modes_change_the_flag_not_the_schema(capsys):
    argv = (
        "slice",
        corpus("valuesem.vdmsl"),
        "--operation",
        "snippet",
        "--criterion",
        "result",
    )
    _, weak_out, _ = run_main(capsys, *argv, "--mode", "weak")
    code, strong_out, _ = run_main(capsys, *argv, "--mode", "strong")
    assert code == 0
    weak, strong = json.loads(weak_out), json.loads(strong_out)
    assert weak["mode"] == "weak" and strong["mode"] == "strong"
    strong_ids = {e["nodeId"] for e in strong["slice"]}
    weak_ids = {e["nodeId"] for e in weak["slice"]}
    assert strong_ids <= weak_ids


# ---------------- run ----------------

def test_run_prints_the_outcome(capsys):
    code, out, err = run_main(
        capsys, "run", corpus("twoops.vdmsl"), "--operation", "op2"
    )
    assert code == 0
    assert out == "returned 12\n"


def test_run_with_literal_arguments(capsys, tmp_path):
    source = """
operations
    o : seq of nat * set of nat * map nat to nat ==> nat
    o(s, xs, m) ==
        return m(1) + len s + card xs;
"""
    path = tmp_path / "args.vdmsl"
    path.write_text(source)
    code, out, _ = run_main(
        capsys,
        "run",
        str(path),
        "--operation",
        "o",
        "--arg",
        "[6, 6]",
        "--arg",
        "{7, 8, 9}",
        "--arg",
        "{1 |-> 40}",
    )
    assert code == 0
    assert out == "returned 45\n"


def test_run_reports_assertion_violations(capsys):
    code, out, _ = run_main(
        capsys,
        "run",
        corpus("memberbook_bad.vdmsl"),
        "--operation",
        "register",
        "--arg",
        '"bob"',
        "--arg",
        '"b@x"',
    )
    assert code == cli.EXIT_ASSERTION
    assert out == "assertion violation: postcondition conjunct 1\n"


def test_run_can_disable_assertions(capsys):
    code, out, _ = run_main(
        capsys,
        "run",
        corpus("memberbook_bad.vdmsl"),
        "--operation",
        "register",
        "--arg",
        '"bob"',
        "--arg",
        '"b@x"',
        "--no-assertions",
    )
    assert code == 0
    assert out == "returned 2\n"


def test_run_reports_runtime_errors(capsys, tmp_path):
    path = tmp_path / "crash.vdmsl"
    path.write_text(
        """
operations
    o : nat ==> nat
    o(p) == return 1 div p;
"""
    )
    code, out, _ = run_main(
        capsys, "run", str(path), "--operation", "o", "--arg", "0"
    )
    assert code == cli.EXIT_RUNTIME
    assert out.startswith("runtime error:")


def test_run_honours_the_step_limit(capsys, tmp_path):
    path = tmp_path / "spin.vdmsl"
    path.write_text(
        """
operations
    o : () ==> ()
    o() == while true do skip;
"""
    )
    code, out, _ = run_main(
        capsys, "run", str(path), "--operation", "o", "--max-steps", "100"
    )
    assert code == cli.EXIT_RUNTIME
    assert "step" in out


def test_quote_and_record_arguments(capsys, tmp_path):
    path = tmp_path / "mixed.vdmsl"
    path.write_text(
        """
operations
    o : Mode * (nat * nat) ==> nat
    o(q, pair) ==
        (if q = <ON> and pair = mk_(20, 2) then
            return 22
        else
            return 0);
"""
    )
    code, out, _ = run_main(
        capsys,
        "run",
        str(path),
        "--operation",
        "o",
        "--arg",
        "<ON>",
        "--arg",
        "mk_(20, 2)",
    )
    assert (code, out) == (0, "returned 22\n")


# ---------------- check ----------------

def test_check_agreement_exits_zero(capsys):
    code, out, _ = run_main(
        capsys,
        "check",
        corpus("memberbook_fixed.vdmsl"),
        "--operation",
        "register",
        "--criterion",
        "post:1",
        "--trials",
        "15",
        "--seed",
        "11",
    )
    assert code == 0
    assert "agreement" in out
    assert "compared" in out


def test_check_disagreement_exits_one(capsys, monkeypatch):
    report = v.CheckReport(
        criterion=v.parse_criterion("op2", "result"),
        mode="weak",
        trials=5,
        executed=5,
        skipped=0,
        failures=("trial 3: returned 1 /= returned 2",),
    )
    monkeypatch.setattr(cli, "check_criterion", lambda *a, **k: report)
    code, out, _ = run_main(
        capsys,
        "check",
        corpus("twoops.vdmsl"),
        "--operation",
        "op2",
        "--criterion",
        "result",
    )
    assert code == cli.EXIT_SOURCE
    assert "disagreement" in out
    assert "trial 3" in out


# ---------------- failure exits ----------------

def test_source_errors_exit_one_with_positions(capsys, tmp_path):
    path = tmp_path / "broken.vdmsl"
    path.write_text("operations\n    o : nat ==>\n")
    code, out, err = run_main(
        capsys, "slice", str(path), "--operation", "o", "--criterion", "result"
    )
    assert code == cli.EXIT_SOURCE
    assert out == ""
    assert err.startswith(f"{path}:")
    first = err.splitlines()[0]
    prefix = first[len(str(path)) + 1 :]
    line, column = prefix.split(":")[:2]
    assert line.isdigit() and column.isdigit()


def test_binding_errors_exit_one(capsys, tmp_path):
    path = tmp_path / "unbound.vdmsl"
    path.write_text(
        """
operations
    o : () ==> nat
    o() == return mystery;
"""
    )
    code, _, err = run_main(
        capsys, "slice", str(path), "--operation", "o", "--criterion", "result"
    )
    assert code == cli.EXIT_SOURCE
    assert "mystery" in err


def test_missing_file_exits_one(capsys, tmp_path):
    code, _, err = run_main(
        capsys,
        "slice",
        str(tmp_path / "nope.vdmsl"),
        "--operation",
        "o",
        "--criterion",
        "result",
    )
    assert code == cli.EXIT_SOURCE
    assert err.startswith("error:")


def test_bad_criteria_exit_two(capsys):
    for criterion in ("post:9", "state:ghost", "banana"):
        code, _, err = run_main(
            capsys,
            "slice",
            corpus("twoops.vdmsl"),
            "--operation",
            "op2",
            "--criterion",
            criterion,
        )
        assert code == cli.EXIT_CRITERION, criterion
        assert err.startswith("error:")
    code, _, _ = run_main(
        capsys,
        "slice",
        corpus("twoops.vdmsl"),
        "--operation",
        "ghost",
        "--criterion",
        "result",
    )
    assert code == cli.EXIT_CRITERION
    code, _, _ = run_main(
        capsys, "run", corpus("twoops.vdmsl"), "--operation", "ghost"
    )
    assert code == cli.EXIT_CRITERION


def test_usage_errors_exit_sixty_four(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["slice", corpus("twoops.vdmsl")])  # no --operation
    assert info.value.code == cli.EXIT_USAGE
    capsys.readouterr()
    with pytest.raises(SystemExit) as info:
        cli.main(["dance"])
    assert info.value.code == cli.EXIT_USAGE
    capsys.readouterr()
    with pytest.raises(SystemExit) as info:
        cli.main(
            [
                "slice",
                corpus("twoops.vdmsl"),
                "--operation",
                "op2",
                "--criterion",
                "result",
                "--mode",
                "sideways",
            ]
        )
    assert info.value.code == cli.EXIT_USAGE
    capsys.readouterr()


def test_non_literal_arguments_exit_sixty_four(capsys):
    code, _, err = run_main(
        capsys,
        "run",
        corpus("twoops.vdmsl"),
        "--operation",
        "op1",
        "--arg",
        "1 + 1",
    )
    assert code == cli.EXIT_USAGE
    assert "bad argument" in err
    code, _, err = run_main(
        capsys, "run", corpus("twoops.vdmsl"), "--operation", "op1", "--arg", "(("
    )
    assert code == cli.EXIT_USAGE
