import json
import subprocess
import sys
from pathlib import Path

import pytest

from hgmp.cli import main

REPO = Path(__file__).resolve().parent.parent
CORPUS = REPO / "corpus"


def write(tmp_path, text, name="prog.hgmp"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


### compile

def test_compile_prints_residual(tmp_path, capsys):
    path = write(tmp_path, r"(\x.x) $((\x.x) astInt(7))")
    code, out, err = run_cli(capsys, "compile", path)
    assert code == 0
    assert out.strip() == r"(\x. x) 7"
    assert err == ""


def test_compile_typed_prints_type_comment(tmp_path, capsys):
    path = write(tmp_path, "$(astInt(1)) + 2")
    code, out, err = run_cli(capsys, "compile", "--mode", "typed", path)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "1 + 2"
    assert lines[1] == "-- : Int"


def test_compile_quote(tmp_path, capsys):
    path = write(tmp_path, "[| 2 + $([| 3 + 4 |]) |]")
    code, out, _ = run_cli(capsys, "compile", path)
    assert code == 0
    assert out.strip() == "astAdd(astInt(2), astAdd(astInt(3), astInt(4)))"


def test_compile_typed_failure_names_residual(tmp_path, capsys):
    path = write(tmp_path, '2 + $(astLam(astStr("x"), astVar("x")))')
    code, out, err = run_cli(capsys, "compile", "--mode", "typed", path)
    assert code == 1
    assert out == ""
    assert "error[type]" in err
    assert r"\x. x" in err


### run

def test_run_value(tmp_path, capsys):
    path = write(tmp_path, r"(\x.x)(eval((\x.x) astInt(7)))")
    code, out, err = run_cli(capsys, "run", path)
    assert (code, out.strip(), err) == (0, "7", "")


def test_run_error_goes_to_stderr(tmp_path, capsys):
    path = write(tmp_path, r"2 + (\x.x)")
    code, out, err = run_cli(capsys, "run", path)
    assert code == 1
    assert out == ""
    assert "Stuck" in err and "rt" in err


def test_run_parse_error(tmp_path, capsys):
    path = write(tmp_path, "1 +")
    code, out, err = run_cli(capsys, "run", path)
    assert code == 1
    assert out == ""
    assert "parse error" in err


def test_run_trace_json(tmp_path, capsys):
    path = write(tmp_path, "lift(2 + 3)")
    code, out, err = run_cli(capsys, "run", "--trace", "json", path)
    assert code == 0
    doc = json.loads(out)
    assert doc["value"]["ctor"] == "ast"
    assert [s["stage"] for s in doc["stages"]] == ["ct", "rt"]
    assert err == ""


def test_run_trace_text_on_stderr(tmp_path, capsys):
    path = write(tmp_path, "1 + 2")
    code, out, err = run_cli(capsys, "run", "--trace", "text", path)
    assert code == 0
    assert out.strip() == "3"
    assert "Add" in err and "=rt=>" in err


### step

def test_step_each_relation(tmp_path, capsys):
    cases = [
        ("ul", "x", 'astVar("x")'),
        ("dl", 'astVar("x")', "x"),
        ("ct", "[| 2 + 3 |]", "astAdd(astInt(2), astInt(3))"),
        ("rt", "lift(2 + 3)", "astInt(5)"),
    ]
    for relation, src, expected in cases:
        path = write(tmp_path, src, f"{relation}.hgmp")
        code, out, err = run_cli(capsys, "step", "--relation", relation, path)
        assert (code, out.strip()) == (0, expected), relation


def test_step_stuck_names_relation(tmp_path, capsys):
    path = write(tmp_path, r"\x.x")
    code, out, err = run_cli(capsys, "step", "--relation", "dl", path)
    assert code == 1
    assert out == ""
    assert "error[dl]" in err and "Stuck" in err


### typecheck

def test_typecheck(tmp_path, capsys):
    path = write(tmp_path, "astInt(3)")
    code, out, err = run_cli(capsys, "typecheck", path)
    assert (code, out.strip()) == (0, "Code")
    path = write(tmp_path, r"\x. x + 1", "f.hgmp")
    code, out, err = run_cli(capsys, "typecheck", path)
    assert (code, out.strip()) == (0, "Int -> Int")


def test_typecheck_failure(tmp_path, capsys):
    path = write(tmp_path, r"2 + (\x.x)")
    code, out, err = run_cli(capsys, "typecheck", path)
    assert code == 1
    assert "error[type]" in err


### configuration

def test_fuel_flag(tmp_path, capsys):
    path = write(tmp_path, r"(\x. x x) (\x. x x)")
    code, out, err = run_cli(capsys, "run", "--fuel", "1000", path)
    assert code == 1
    assert "FuelExhausted" in err


def test_fuel_env_override(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("HGMP_FUEL", "2")
    path = write(tmp_path, "1 + 2 + 3")
    code, out, err = run_cli(capsys, "run", path)
    assert code == 1
    assert "FuelExhausted" in err
    monkeypatch.setenv("HGMP_FUEL", "50")
    code, out, err = run_cli(capsys, "run", path)
    assert (code, out.strip()) == (0, "6")


def test_bad_fuel_is_usage_error(tmp_path, capsys):
    path = write(tmp_path, "1")
    code, out, err = run_cli(capsys, "run", "--fuel", "0", path)
    assert code == 2


def test_unknown_command_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_missing_file(tmp_path, capsys):
    code, out, err = run_cli(capsys, "run", str(tmp_path / "nope.hgmp"))
    assert code == 1
    assert err


### repl

def repl_session(monkeypatch, capsys, lines):
    feed = iter(lines)

    def fake_input(prompt=""):
        try:
            return next(feed)
        except StopIteration:
            raise EOFError

    monkeypatch.setattr("builtins.input", fake_input)
    code = main(["repl"])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_repl_pipeline_and_directives(monkeypatch, capsys):
    code, out, err = repl_session(monkeypatch, capsys, [
        "lift(2+3)",
        ":t astInt(3)",
        ":ul [| x |]",
        ":dl astVar(\"x\")",
        ":fuel 900",
        ":mode typed",
        "eval{Int}(astInt(3)) + 1",
        ":quit",
    ])
    assert code == 0
    assert "astInt(5)" in out
    assert "Code" in out
    assert 'astPromote(#var, astStr("x"))' in out
    assert "\nx\n" in out or out.endswith("x\n")
    assert "4" in out
    assert err == ""


def test_repl_survives_errors(monkeypatch, capsys):
    code, out, err = repl_session(monkeypatch, capsys, [
        "1 +",            # parse error
        "2 + (\\x.x)",    # stuck
        ":mode sideways",  # bad directive
        "40 + 2",
    ])
    assert code == 0
    assert "42" in out
    assert "parse error" in err
    assert "Stuck" in err


def test_repl_load(monkeypatch, capsys, tmp_path):
    path = write(tmp_path, "1 + 1")
    code, out, err = repl_session(monkeypatch, capsys, [f":load {path}"])
    assert code == 0
    assert "2" in out


def test_repl_trace(monkeypatch, capsys):
    code, out, err = repl_session(monkeypatch, capsys, [
        ":trace on", "1 + 1", ":trace off", "2 + 2"])
    assert code == 0
    assert "=rt=>" in err


### corpus

def test_repo_corpus_passes(capsys):
    code, out, err = run_cli(capsys, "corpus", str(CORPUS))
    assert code == 0, err
    assert "corpus cases passed" in out
    assert "FAIL" not in err


def test_corpus_reports_failures(tmp_path, capsys):
    write(tmp_path, "-- modes: untyped\n1 + 1\n", "bad.hgmp")
    (tmp_path / "bad.expected").write_text("3\n")
    code, out, err = run_cli(capsys, "corpus", str(tmp_path))
    assert code == 1
    assert "FAIL" in err
    assert "0/1" in out


def test_corpus_missing_expected(tmp_path, capsys):
    write(tmp_path, "-- modes: untyped\n1\n", "orphan.hgmp")
    code, out, err = run_cli(capsys, "corpus", str(tmp_path))
    assert code == 1
    assert "no .expected" in err


### the installed entry point works end to end

def test_console_script(tmp_path):
    path = write(tmp_path, "lift(2 + 3)")
    proc = subprocess.run(
        [sys.executable, "-m", "hgmp.cli", "run", path],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "astInt(5)"


def test_repl_help(monkeypatch, capsys):
    code, out, err = repl_session(monkeypatch, capsys, [":help", ":quit"])
    assert code == 0
    assert ":mode" in out and ":load" in out


def test_corpus_empty_directory(tmp_path, capsys):
    code, out, err = run_cli(capsys, "corpus", str(tmp_path))
    assert code == 1
    assert "no .hgmp files" in err


def test_corpus_missing_golden(tmp_path, capsys):
    (tmp_path / "c.hgmp").write_text(
        "-- modes: untyped\n-- golden: ct\n1 + 1\n")
    (tmp_path / "c.expected").write_text("2\n")
    code, out, err = run_cli(capsys, "corpus", str(tmp_path))
    assert code == 1
    assert "missing golden" in err


def test_corpus_golden_mismatch(tmp_path, capsys):
    import json as _json
    (tmp_path / "golden").mkdir()
    (tmp_path / "c.hgmp").write_text(
        "-- modes: untyped\n-- golden: ct\n1 + 1\n")
    (tmp_path / "c.expected").write_text("2\n")
    (tmp_path / "golden" / "c.json").write_text(
        _json.dumps({"relation": "ct", "derivation": {"rule": "nope"}}))
    code, out, err = run_cli(capsys, "corpus", str(tmp_path))
    assert code == 1
    assert "derivation differs" in err
