"""Command-line front door: compile, run, step, typecheck, repl, corpus.

Exit codes: 0 success, 1 semantic/type/parse error, 2 usage error.
Results go to stdout; every diagnostic goes to stderr. With --trace json
stdout carries a single JSON document instead.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import typecheck
from .parser import MODES, ParseError, parse_term
from .reduction import (
    DEFAULT_FUEL, Derivation, EvalError, derivation_to_json, eval_ct,
    eval_dl, eval_rt, eval_ul, render_derivation, run_pipeline, term_to_json,
)
from .syntax import Term, alpha_eq, pretty, pretty_type
from .typecheck import EMPTY_ENV, TypeErrorDetail

# Big-step recursion tracks term depth; fuel is the real budget, this just
# keeps CPython out of the way at desk scale.
_RECURSION_LIMIT = 20_000

_STEPPERS = {
    "ct": lambda m, mode, fuel: eval_ct(m, mode, fuel, trace=True),
    "dl": lambda m, mode, fuel: eval_dl(m, fuel, trace=True),
    "ul": lambda m, mode, fuel: eval_ul(m, mode, fuel, trace=True),
    "rt": lambda m, mode, fuel: eval_rt(m, mode, fuel, trace=True),
}


def _json_dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _emit_trace(args, stages: list[tuple[str, Derivation]], payload: dict):
    """Text traces go to stderr; json replaces stdout entirely."""
    if args.trace == "text":
        for name, deriv in stages:
            print(f"-- {name} --", file=sys.stderr)
            print(render_derivation(deriv), file=sys.stderr)
    elif args.trace == "json":
        payload["stages"] = [
            {"stage": name, "derivation": derivation_to_json(d)}
            for name, d in stages
        ]
        print(_json_dump(payload))
        return True
    return False


def _read_term(args) -> Term:
    with open(args.file, encoding="utf-8") as handle:
        return parse_term(handle.read(), args.mode)


def cmd_compile(args) -> int:
    term = _read_term(args)
    trace = args.trace != "none"
    result = eval_ct(term, args.mode, args.fuel, trace=trace)
    residual, deriv = result if trace else (result, None)
    residual_type = None
    if args.mode == "typed":
        residual_type = typecheck.infer(EMPTY_ENV, residual,
                                        phase="residual check")
    payload = {"residual": term_to_json(residual)}
    if residual_type is not None:
        payload["residualType"] = pretty_type(residual_type)
    if trace and _emit_trace(args, [("ct", deriv)], payload):
        return 0
    print(pretty(residual))
    if residual_type is not None:
        print(f"-- : {pretty_type(residual_type)}")
    return 0


def cmd_run(args) -> int:
    term = _read_term(args)
    trace = args.trace != "none"
    result = run_pipeline(term, args.mode, args.fuel, trace=trace)
    payload = {"value": term_to_json(result.value),
               "residual": term_to_json(result.residual)}
    if result.residual_type is not None:
        payload["residualType"] = pretty_type(result.residual_type)
    if trace and _emit_trace(args, list(result.stages), payload):
        return 0
    print(pretty(result.value))
    return 0


def cmd_step(args) -> int:
    term = _read_term(args)
    out, deriv = _STEPPERS[args.relation](term, args.mode, args.fuel)
    if args.trace == "json":
        print(_json_dump({"out": term_to_json(out),
                          "derivation": derivation_to_json(deriv)}))
        return 0
    if args.trace == "text":
        print(render_derivation(deriv), file=sys.stderr)
    print(pretty(out))
    return 0


def cmd_typecheck(args) -> int:
    term = _read_term(args)
    ty = typecheck.infer(EMPTY_ENV, term, phase="residual check")
    print(pretty_type(ty))
    return 0


### repl

_REPL_HELP = """directives:
  :mode typed|untyped   switch pipeline mode
  :fuel N               set the rule budget
  :trace on|off         print text derivations to stderr
  :ct E  :dl E  :ul E  :rt E   apply one relation to E
  :t E                  infer E's type
  :load FILE            run FILE through the pipeline
  :quit                 leave"""


def repl(args) -> int:
    mode = args.mode
    fuel = args.fuel
    tracing = False

    def show_error(exc):
        print(exc, file=sys.stderr)

    while True:
        try:
            line = input("hgmp> ")
        except EOFError:
            print()
            return 0
        line = line.strip()
        if not line:
            continue
        try:
            if line.startswith(":"):
                head, _, rest = line.partition(" ")
                rest = rest.strip()
                if head == ":quit":
                    return 0
                if head == ":help":
                    print(_REPL_HELP)
                elif head == ":mode":
                    if rest not in MODES:
                        raise ValueError(f"mode must be one of {MODES}")
                    mode = rest
                elif head == ":fuel":
                    fuel = int(rest)
                    if fuel < 1:
                        raise ValueError("fuel must be at least 1")
                elif head == ":trace":
                    if rest not in ("on", "off"):
                        raise ValueError(":trace takes on or off")
                    tracing = rest == "on"
                elif head in (":ct", ":dl", ":ul", ":rt"):
                    term = parse_term(rest, mode)
                    out, deriv = _STEPPERS[head[1:]](term, mode, fuel)
                    if tracing:
                        print(render_derivation(deriv), file=sys.stderr)
                    print(pretty(out))
                elif head == ":t":
                    term = parse_term(rest, mode)
                    print(pretty_type(typecheck.infer(EMPTY_ENV, term)))
                elif head == ":load":
                    with open(rest, encoding="utf-8") as handle:
                        term = parse_term(handle.read(), mode)
                    _repl_run(term, mode, fuel, tracing)
                else:
                    raise ValueError(f"unknown directive {head} (:help lists them)")
            else:
                _repl_run(parse_term(line, mode), mode, fuel, tracing)
        except (ParseError, EvalError, TypeErrorDetail, ValueError,
                OSError) as exc:
            show_error(exc)


def _repl_run(term: Term, mode: str, fuel: int, tracing: bool):
    result = run_pipeline(term, mode, fuel, trace=tracing)
    if tracing:
        for name, deriv in result.stages:
            print(f"-- {name} --", file=sys.stderr)
            print(render_derivation(deriv), file=sys.stderr)
    print(pretty(result.value))


### corpus runner

def _corpus_directives(text: str) -> dict:
    """Leading `-- key: value` comment lines configure a corpus case."""
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line.startswith("--"):
            if line:
                break
            continue
        body = line[2:].strip()
        if ":" in body:
            key, _, value = body.partition(":")
            key = key.strip()
            if key in ("modes", "relation", "compare", "golden"):
                out[key] = value.strip()
    return out


def _expected_for(path: str, mode: str) -> str | None:
    for candidate in (f"{path}.{mode}.expected", f"{path}.expected"):
        if os.path.exists(candidate):
            with open(candidate, encoding="utf-8") as handle:
                return handle.read().strip()
    return None


def _run_case(base: str, text: str, directives: dict, mode: str,
              fuel: int, golden_dir: str) -> list[str]:
    """Returns a list of failure messages; empty means the case passed."""
    name = os.path.basename(base)
    failures = []
    expected = _expected_for(base, mode)
    if expected is None:
        return [f"{name} [{mode}]: no .expected file"]
    relation = directives.get("relation")
    compare = directives.get("compare", "value")
    golden = directives.get("golden")

    outcome_term = None
    outcome_error = None
    stages = None
    try:
        term = parse_term(text, mode)
        if relation:
            out, deriv = _STEPPERS[relation](term, mode, fuel)
            outcome_term = out
            stages = ((relation, deriv),)
        else:
            result = run_pipeline(term, mode, fuel, trace=True)
            outcome_term = (result.residual if compare == "residual"
                            else result.value)
            stages = result.stages
    except ParseError as exc:
        outcome_error = ("parse", str(exc))
    except EvalError as exc:
        phase = "type" if exc.kind == EvalError.TYPE else exc.phase
        outcome_error = (phase, str(exc))

    if expected.startswith("error:"):
        want_phase = expected[len("error:"):].strip()
        if outcome_error is None:
            failures.append(
                f"{name} [{mode}]: expected error:{want_phase}, got "
                f"{pretty(outcome_term)}")
        elif outcome_error[0] != want_phase:
            failures.append(
                f"{name} [{mode}]: expected error:{want_phase}, got "
                f"error:{outcome_error[0]} ({outcome_error[1]})")
    elif outcome_error is not None:
        failures.append(f"{name} [{mode}]: expected a value, got "
                        f"error:{outcome_error[0]} ({outcome_error[1]})")
    else:
        want = parse_term(expected, mode)
        if not alpha_eq(want, outcome_term):
            failures.append(
                f"{name} [{mode}]: expected {pretty(want)}, got "
                f"{pretty(outcome_term)}")

    if golden and mode == "untyped" and not failures:
        golden_path = os.path.join(golden_dir, name + ".json")
        if not os.path.exists(golden_path):
            failures.append(f"{name} [{mode}]: missing golden {golden_path}")
        else:
            with open(golden_path, encoding="utf-8") as handle:
                want_deriv = json.load(handle)
            got = {stage: deriv for stage, deriv in stages}.get(golden)
            if got is None:
                failures.append(
                    f"{name} [{mode}]: no {golden} derivation recorded")
            elif derivation_to_json(got) != want_deriv["derivation"]:
                failures.append(f"{name} [{mode}]: derivation differs "
                                f"from golden {golden_path}")
    return failures


def cmd_corpus(args) -> int:
    directory = args.file
    if not os.path.isdir(directory):
        print(f"not a directory: {directory}", file=sys.stderr)
        return 2
    golden_dir = os.path.join(directory, "golden")
    cases = sorted(f for f in os.listdir(directory) if f.endswith(".hgmp"))
    if not cases:
        print(f"no .hgmp files under {directory}", file=sys.stderr)
        return 1
    total = 0
    failures: list[str] = []
    for filename in cases:
        path = os.path.join(directory, filename)
        base = path[:-len(".hgmp")]
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
        directives = _corpus_directives(text)
        modes = directives.get("modes", "untyped").split()
        for mode in modes:
            total += 1
            failures.extend(
                _run_case(base, text, directives, mode, args.fuel, golden_dir))
    for failure in failures:
        print(f"FAIL {failure}", file=sys.stderr)
    print(f"{total - len(failures)}/{total} corpus cases passed")
    return 0 if not failures else 1


### entry point

def _build_argparser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="hgmp",
        description="compile and run staged meta-programs")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, file_meta="FILE"):
        p.add_argument("--mode", choices=MODES, default="untyped")
        p.add_argument("--fuel", type=int, default=None,
                       help=f"rule budget (default {DEFAULT_FUEL}, "
                            "or HGMP_FUEL)")
        p.add_argument("--trace", choices=("none", "text", "json"),
                       default="none")
        if file_meta:
            p.add_argument("file", metavar=file_meta)

    common(sub.add_parser("compile", help="run the compile-time relation"))
    common(sub.add_parser("run", help="compile, check (typed), execute"))
    step = sub.add_parser("step", help="apply a single relation")
    step.add_argument("--relation", choices=("ct", "dl", "ul", "rt"),
                      required=True)
    common(step)
    common(sub.add_parser("typecheck", help="infer a term's type"))
    common(sub.add_parser("repl", help="interactive session"), file_meta=None)
    common(sub.add_parser("corpus", help="run a corpus directory"),
           file_meta="DIR")
    return top


_COMMANDS = {
    "compile": cmd_compile,
    "run": cmd_run,
    "step": cmd_step,
    "typecheck": cmd_typecheck,
    "repl": repl,
    "corpus": cmd_corpus,
}


def main(argv: list[str] | None = None) -> int:
    sys.setrecursionlimit(_RECURSION_LIMIT)
    parser = _build_argparser()
    args = parser.parse_args(argv)
    if args.fuel is None:
        env = os.environ.get("HGMP_FUEL")
        try:
            args.fuel = int(env) if env else DEFAULT_FUEL
        except ValueError:
            print(f"HGMP_FUEL is not an integer: {env!r}", file=sys.stderr)
            return 2
    if args.fuel < 1:
        print("fuel must be at least 1", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args)
    except ParseError as exc:
        print(exc, file=sys.stderr)
        return 1
    except TypeErrorDetail as exc:
        print(exc, file=sys.stderr)
        return 1
    except EvalError as exc:
        print(exc, file=sys.stderr)
        return 1
    except OSError as exc:
        print(exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
