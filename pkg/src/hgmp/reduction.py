"""The four big-step relations and the two-phase pipeline.

ct compiles: it sweeps a term, expanding quotes (via ul) and executing
splices (whose results are converted down via dl), and leaves everything
else alone. dl turns an AST value into the program it denotes. ul turns
ordinary syntax into its AST representation. rt is call-by-value
execution extended with AST values, eval, lift and promoted ASTs.

Every rule application burns one unit from a shared fuel budget, so
divergence surfaces as a distinct FuelExhausted outcome rather than a
hang. Each run also (optionally) records a derivation tree whose rule
names follow the conventional bracketed names for these relations.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

from .syntax import (
    App, AstCtor, BinOp, BoolLit, DownML, Eval, If, IntLit, Lam, LetDown,
    Lift, Rec, StrLit, Tag, TagLit, Term, TypeExpr, UpML, Var,
    free_vars, mk_ast, pretty, pretty_type, subst,
)
from . import typecheck
from .typecheck import CODE, EMPTY_ENV, TypeErrorDetail

DEFAULT_FUEL = 100_000

RELATIONS = ("ct", "dl", "ul", "rt")

_OPNAME = {"add": "Add", "sub": "Sub", "mul": "Mul", "eq": "Eq"}


@dataclass(frozen=True)
class Derivation:
    """One rule application: premises in left-to-right rule order."""

    rule: str
    relation: str  # ct | dl | ul | rt | type
    term_in: Term
    term_out: object  # Term, or TypeExpr for relation "type"
    premises: tuple["Derivation", ...] = ()


class EvalError(Exception):
    STUCK = "Stuck"
    FUEL = "FuelExhausted"
    TYPE = "TypeError"

    def __init__(self, kind: str, phase: str, offending: Term | None,
                 message: str, detail: TypeErrorDetail | None = None):
        super().__init__(message)
        self.kind = kind
        self.phase = phase
        self.offending = offending
        self.message = message
        self.detail = detail

    def __str__(self):
        s = f"error[{self.phase}]: {self.kind}: {self.message}"
        if self.offending is not None:
            s += f"\n  at: {pretty(self.offending)}"
        return s


class _Run:
    """Per-run state: fuel budget, pipeline mode, trace switch."""

    __slots__ = ("remaining", "typed", "trace")

    def __init__(self, fuel: int, typed: bool, trace: bool):
        if fuel < 1:
            raise ValueError("fuel must be at least 1")
        self.remaining = fuel
        self.typed = typed
        self.trace = trace

    def spend(self, phase: str, term: Term):
        self.remaining -= 1
        if self.remaining < 0:
            raise EvalError(EvalError.FUEL, phase, term,
                            "rule application budget exhausted")


def _stuck(phase: str, term: Term, message: str):
    raise EvalError(EvalError.STUCK, phase, term, message)


def _type_error(term: Term, err: TypeErrorDetail):
    raise EvalError(EvalError.TYPE, "type", term, str(err), detail=err)


def _d(run: _Run, rule: str, relation: str, term_in: Term, term_out,
       *premises) -> Optional[Derivation]:
    if not run.trace:
        return None
    return Derivation(rule, relation, term_in, term_out, tuple(premises))


def _type_premise(run: _Run, term: Term, ty: TypeExpr) -> Optional[Derivation]:
    if not run.trace:
        return None
    return Derivation("Type", "type", term, ty)


### compile time

def _ct(m: Term, run: _Run):
    run.spend("ct", m)
    match m:
        case Var():
            return m, _d(run, "Var ct", "ct", m, m)
        case IntLit() | StrLit() | BoolLit():
            return m, _d(run, "Const ct", "ct", m, m)
        case TagLit():
            return m, _d(run, "Tag ct", "ct", m, m)
        case App(fn, arg):
            a, d1 = _ct(fn, run)
            b, d2 = _ct(arg, run)
            out = App(a, b)
            return out, _d(run, "App ct", "ct", m, out, d1, d2)
        case Lam(param, body, annot):
            a, d1 = _ct(body, run)
            out = Lam(param, a, annot)
            return out, _d(run, "Lam ct", "ct", m, out, d1)
        case Rec(self_name, param, body, annot):
            a, d1 = _ct(body, run)
            out = Rec(self_name, param, a, annot)
            return out, _d(run, "Rec ct", "ct", m, out, d1)
        case BinOp(op, lhs, rhs):
            a, d1 = _ct(lhs, run)
            b, d2 = _ct(rhs, run)
            out = BinOp(op, a, b)
            return out, _d(run, f"{_OPNAME[op]} ct", "ct", m, out, d1, d2)
        case If(cond, then, orelse):
            a, d1 = _ct(cond, run)
            b, d2 = _ct(then, run)
            c, d3 = _ct(orelse, run)
            out = If(a, b, c)
            return out, _d(run, "If ct", "ct", m, out, d1, d2, d3)
        case AstCtor(tag, args):
            pairs = [_ct(a, run) for a in args]
            out = AstCtor(tag, tuple(p[0] for p in pairs))
            rule = "Promote ct" if tag.name == "promote" else "Ast_c ct"
            return out, _d(run, rule, "ct", m, out, *(p[1] for p in pairs))
        case Eval(body, annot):
            a, d1 = _ct(body, run)
            out = Eval(a, annot)
            return out, _d(run, "Eval ct", "ct", m, out, d1)
        case Lift(body):
            a, d1 = _ct(body, run)
            out = Lift(a)
            return out, _d(run, "Lift ct", "ct", m, out, d1)
        case UpML(body):
            a, d1 = _ul(body, run)
            return a, _d(run, "UpML ct", "ct", m, a, d1)
        case DownML(body):
            a, d1 = _ct(body, run)
            premises = [d1]
            if run.typed:
                try:
                    typecheck.check(EMPTY_ENV, a, CODE, phase="downML check")
                except TypeErrorDetail as err:
                    _type_error(a, err)
                premises.append(_type_premise(run, a, CODE))
            b, d2 = _rt(a, run)
            premises.append(d2)
            c, d3 = _dl(b, run)
            premises.append(d3)
            return c, _d(run, "DownML ct", "ct", m, c, *premises)
        case LetDown(name, bound, body):
            a, d1 = _ct(bound, run)
            premises = [d1]
            if run.typed:
                try:
                    bound_ty = typecheck.infer(EMPTY_ENV, a,
                                               phase="letdown check")
                except TypeErrorDetail as err:
                    _type_error(a, err)
                premises.append(_type_premise(run, a, bound_ty))
            b, d2 = _rt(a, run)
            premises.append(d2)
            c, d3 = _ct(subst(body, b, name), run)
            premises.append(d3)
            return c, _d(run, "Let ct", "ct", m, c, *premises)
    raise TypeError(f"not a Term: {m!r}")


### down one meta-level

def _dl(m: Term, run: _Run):
    run.spend("dl", m)
    if isinstance(m, TagLit):
        return m, _d(run, "Tag dl", "dl", m, m)
    if not isinstance(m, AstCtor):
        _stuck("dl", m, "term is not an AST value")
    tag, args = m.tag, m.args
    name, count = tag.name, len(m.args)
    if name == "var" and count == 1 and isinstance(args[0], StrLit):
        out = Var(args[0].value)
        return out, _d(run, "Var dl", "dl", m, out)
    if name == "int" and count == 1 and isinstance(args[0], IntLit):
        return args[0], _d(run, "Int dl", "dl", m, args[0])
    if name == "string" and count == 1 and isinstance(args[0], StrLit):
        return args[0], _d(run, "String dl", "dl", m, args[0])
    if name == "bool" and count == 1 and isinstance(args[0], BoolLit):
        return args[0], _d(run, "Bool dl", "dl", m, args[0])
    if name == "app" and count == 2:
        a, d1 = _dl(args[0], run)
        b, d2 = _dl(args[1], run)
        out = App(a, b)
        return out, _d(run, "App dl", "dl", m, out, d1, d2)
    if name in _OPNAME and count == 2:
        a, d1 = _dl(args[0], run)
        b, d2 = _dl(args[1], run)
        out = BinOp(name, a, b)
        return out, _d(run, f"{_OPNAME[name]} dl", "dl", m, out, d1, d2)
    if name == "if" and count == 3:
        a, d1 = _dl(args[0], run)
        b, d2 = _dl(args[1], run)
        c, d3 = _dl(args[2], run)
        out = If(a, b, c)
        return out, _d(run, "If dl", "dl", m, out, d1, d2, d3)
    if name == "lam" and count == 2:
        s, d1 = _dl(args[0], run)
        if not isinstance(s, StrLit):
            _stuck("dl", m, "astLam binder did not reduce to a string")
        b, d2 = _dl(args[1], run)
        out = Lam(s.value, b)
        return out, _d(run, "Lam dl", "dl", m, out, d1, d2)
    if name == "rec" and count == 3:
        g, d1 = _dl(args[0], run)
        x, d2 = _dl(args[1], run)
        if not (isinstance(g, StrLit) and isinstance(x, StrLit)):
            _stuck("dl", m, "astRec binders did not reduce to strings")
        b, d3 = _dl(args[2], run)
        out = Rec(g.value, x.value, b)
        return out, _d(run, "Rec dl", "dl", m, out, d1, d2, d3)
    if name == "eval" and count == 1:
        a, d1 = _dl(args[0], run)
        out = Eval(a, tag.eval_annot)
        return out, _d(run, "Eval dl", "dl", m, out, d1)
    if name == "lift" and count == 1:
        a, d1 = _dl(args[0], run)
        out = Lift(a)
        return out, _d(run, "Lift dl", "dl", m, out, d1)
    if name == "promote" and count >= 1:
        head, d0 = _dl(args[0], run)
        if not isinstance(head, TagLit):
            _stuck("dl", m, "astPromote head did not reduce to a tag")
        if head.tag.name != "promote":
            # Children move down with it; the rebuilt constructor is not
            # arity-checked here -- a later stage (dl again, or a type
            # check) owns rejecting a malformed result.
            pairs = [_dl(a, run) for a in args[1:]]
            out = AstCtor(head.tag, tuple(p[0] for p in pairs))
            return out, _d(run, "Promote dl 1", "dl", m, out, d0,
                           *(p[1] for p in pairs))
        if count >= 2:
            inner, d1 = _dl(args[1], run)
            if isinstance(inner, TagLit):
                pairs = [_dl(a, run) for a in args[2:]]
                out = AstCtor(tag, (inner,) + tuple(p[0] for p in pairs))
                return out, _d(run, "Promote dl 2", "dl", m, out, d0, d1,
                               *(p[1] for p in pairs))
        _stuck("dl", m, "promoted astPromote needs a tag in second position")
    _stuck("dl", m,
           f"no down-level rule for ast constructor {name} "
           f"with {count} argument(s)")


### up one meta-level

def _ul(m: Term, run: _Run):
    run.spend("ul", m)
    match m:
        case Var(name):
            out = mk_ast("var", StrLit(name))
            return out, _d(run, "Var ul", "ul", m, out)
        case StrLit():
            out = mk_ast("string", m)
            return out, _d(run, "String ul", "ul", m, out)
        case IntLit():
            out = mk_ast("int", m)
            return out, _d(run, "Int ul", "ul", m, out)
        case BoolLit():
            out = mk_ast("bool", m)
            return out, _d(run, "Bool ul", "ul", m, out)
        case TagLit():
            return m, _d(run, "Tag ul", "ul", m, m)
        case App(fn, arg):
            a, d1 = _ul(fn, run)
            b, d2 = _ul(arg, run)
            out = mk_ast("app", a, b)
            return out, _d(run, "App ul", "ul", m, out, d1, d2)
        case Lam(param, body):
            a, d1 = _ul(body, run)
            out = mk_ast("lam", mk_ast("string", StrLit(param)), a)
            return out, _d(run, "Lam ul", "ul", m, out, d1)
        case Rec(self_name, param, body):
            a, d1 = _ul(body, run)
            out = mk_ast("rec", mk_ast("string", StrLit(self_name)),
                         mk_ast("string", StrLit(param)), a)
            return out, _d(run, "Rec ul", "ul", m, out, d1)
        case BinOp(op, lhs, rhs):
            a, d1 = _ul(lhs, run)
            b, d2 = _ul(rhs, run)
            out = mk_ast(op, a, b)
            return out, _d(run, f"{_OPNAME[op]} ul", "ul", m, out, d1, d2)
        case If(cond, then, orelse):
            a, d1 = _ul(cond, run)
            b, d2 = _ul(then, run)
            c, d3 = _ul(orelse, run)
            out = mk_ast("if", a, b, c)
            return out, _d(run, "If ul", "ul", m, out, d1, d2, d3)
        case Eval(body, annot):
            a, d1 = _ul(body, run)
            out = AstCtor(Tag("eval", annot), (a,))
            return out, _d(run, "Eval ul", "ul", m, out, d1)
        case Lift(body):
            a, d1 = _ul(body, run)
            out = mk_ast("lift", a)
            return out, _d(run, "Lift ul", "ul", m, out, d1)
        case AstCtor(tag, args):
            pairs = [_ul(a, run) for a in args]
            out = AstCtor(Tag("promote"),
                          (TagLit(tag),) + tuple(p[0] for p in pairs))
            return out, _d(run, "Ast ul", "ul", m, out, *(p[1] for p in pairs))
        case UpML(body):
            a, d1 = _ul(body, run)
            b, d2 = _ul(a, run)
            return b, _d(run, "UpML ul", "ul", m, b, d1, d2)
        case DownML(body):
            # The hole's code is compiled and spliced as-is: it will
            # produce its AST when the surrounding residual runs.
            a, d1 = _ct(body, run)
            return a, _d(run, "DownML ul", "ul", m, a, d1)
        case LetDown():
            _stuck("ul", m,
                   "letdown has no AST representation and cannot be quoted")
    raise TypeError(f"not a Term: {m!r}")


### run time

def _rt(m: Term, run: _Run):
    run.spend("rt", m)
    match m:
        case IntLit() | StrLit() | BoolLit():
            return m, _d(run, "Const", "rt", m, m)
        case Lam():
            return m, _d(run, "Lam", "rt", m, m)
        case Rec():
            return m, _d(run, "Rec", "rt", m, m)
        case TagLit():
            return m, _d(run, "Tag", "rt", m, m)
        case Var(name):
            _stuck("rt", m, f"unbound variable {name}")
        case App(fn, arg):
            f, d1 = _rt(fn, run)
            match f:
                case Lam(param, body):
                    v, d2 = _rt(arg, run)
                    res, d3 = _rt(subst(body, v, param), run)
                    return res, _d(run, "App", "rt", m, res, d1, d2, d3)
                case Rec(self_name, param, body):
                    v, d2 = _rt(arg, run)
                    if self_name == param:
                        unfolded = subst(body, v, param)
                    else:
                        unfolded = subst(subst(body, f, self_name), v, param)
                    res, d3 = _rt(unfolded, run)
                    return res, _d(run, "App", "rt", m, res, d1, d2, d3)
                case _:
                    _stuck("rt", m, "application of a non-function value")
        case BinOp(op, lhs, rhs):
            a, d1 = _rt(lhs, run)
            b, d2 = _rt(rhs, run)
            out = _arith(op, a, b, m)
            return out, _d(run, _OPNAME[op], "rt", m, out, d1, d2)
        case If(cond, then, orelse):
            c, d1 = _rt(cond, run)
            if not isinstance(c, BoolLit):
                _stuck("rt", m, "if condition is not a boolean")
            branch = then if c.value else orelse
            v, d2 = _rt(branch, run)
            return v, _d(run, "If", "rt", m, v, d1, d2)
        case AstCtor(tag, args):
            pairs = [_rt(a, run) for a in args]
            out = AstCtor(tag, tuple(p[0] for p in pairs))
            rule = "Promote" if tag.name == "promote" else "Ast_c"
            return out, _d(run, rule, "rt", m, out, *(p[1] for p in pairs))
        case Eval(body, annot):
            v, d1 = _rt(body, run)
            n, d2 = _dl(v, run)
            premises = [d1, d2]
            if run.typed:
                if annot is None:
                    _stuck("rt", m, "eval without annotation in a typed run")
                try:
                    typecheck.check(EMPTY_ENV, n, annot, phase="eval check")
                except TypeErrorDetail as err:
                    _type_error(n, err)
                premises.append(_type_premise(run, n, annot))
            res, d3 = _rt(n, run)
            premises.append(d3)
            return res, _d(run, "Eval rt", "rt", m, res, *premises)
        case Lift(body):
            v, d1 = _rt(body, run)
            match v:
                case IntLit():
                    out = mk_ast("int", v)
                case StrLit():
                    out = mk_ast("string", v)
                case BoolLit():
                    out = mk_ast("bool", v)
                case _:
                    _stuck("rt", m,
                           "lift applies to integers, strings and booleans")
            return out, _d(run, "Lift", "rt", m, out, d1)
        case DownML() | UpML() | LetDown():
            _stuck("rt", m, "compile-time construct reached run time")
    raise TypeError(f"not a Term: {m!r}")


def _arith(op: str, a: Term, b: Term, at: Term) -> Term:
    if op == "eq":
        if isinstance(a, IntLit) and isinstance(b, IntLit):
            return BoolLit(a.value == b.value)
        if isinstance(a, StrLit) and isinstance(b, StrLit):
            return BoolLit(a.value == b.value)
        _stuck("rt", at, "== compares two integers or two strings")
    if not (isinstance(a, IntLit) and isinstance(b, IntLit)):
        _stuck("rt", at, f"{_OPNAME[op].lower()} needs integer operands")
    if op == "add":
        return IntLit(a.value + b.value)
    if op == "sub":
        return IntLit(a.value - b.value)
    return IntLit(a.value * b.value)


### public entry points

def _fuel(fuel: int | None) -> int:
    if fuel is not None:
        return fuel
    env = os.environ.get("HGMP_FUEL")
    return int(env) if env else DEFAULT_FUEL


def eval_ct(m: Term, mode: str = "untyped", fuel: int | None = None,
            trace: bool = False):
    """Compile m: the result contains no splice, quote or compile-time let."""
    run = _Run(_fuel(fuel), mode == "typed", trace)
    out, deriv = _ct(m, run)
    return (out, deriv) if trace else out


def eval_dl(m: Term, fuel: int | None = None, trace: bool = False):
    """Convert an AST value one meta-level down to the program it denotes."""
    run = _Run(_fuel(fuel), False, trace)
    out, deriv = _dl(m, run)
    return (out, deriv) if trace else out


def eval_ul(m: Term, mode: str = "untyped", fuel: int | None = None,
            trace: bool = False):
    """Convert a term one meta-level up to its AST representation."""
    run = _Run(_fuel(fuel), mode == "typed", trace)
    out, deriv = _ul(m, run)
    return (out, deriv) if trace else out


def eval_rt(m: Term, mode: str = "untyped", fuel: int | None = None,
            trace: bool = False):
    """Call-by-value evaluation of a compiled (meta-level-free) term."""
    run = _Run(_fuel(fuel), mode == "typed", trace)
    out, deriv = _rt(m, run)
    return (out, deriv) if trace else out


@dataclass(frozen=True)
class PipelineResult:
    residual: Term
    residual_type: TypeExpr | None
    value: Term
    stages: tuple[tuple[str, Derivation], ...] | None = None


def run_pipeline(m: Term, mode: str = "untyped", fuel: int | None = None,
                 trace: bool = False) -> PipelineResult:
    """Compile once, then run: ct, an optional whole-residual type check,
    then rt. The residual is returned so it can be re-run without
    recompiling."""
    fv = free_vars(m)
    if fv:
        raise EvalError(EvalError.STUCK, "ct", m,
                        "term is not closed: free " + ", ".join(sorted(fv)))
    typed = mode == "typed"
    run = _Run(_fuel(fuel), typed, trace)
    residual, d_ct = _ct(m, run)
    stages = [("ct", d_ct)]
    residual_type = None
    if typed:
        try:
            residual_type = typecheck.infer(EMPTY_ENV, residual,
                                            phase="residual check")
        except TypeErrorDetail as err:
            _type_error(residual, err)
        if trace:
            stages.append(("type", Derivation("Type", "type", residual,
                                              residual_type)))
    value, d_rt = _rt(residual, run)
    stages.append(("rt", d_rt))
    return PipelineResult(residual, residual_type, value,
                          tuple(stages) if trace else None)


### rendering

def term_to_json(m: Term) -> dict:
    """Structural JSON encoding: {"ctor": .., "children": [..], "atom"?: ..}.

    Type annotations, when present, ride along under an "annot" key as a
    pretty-printed type string.
    """
    def node(ctor, children=(), atom=None, annot=None):
        out = {"ctor": ctor, "children": [term_to_json(c) for c in children]}
        if atom is not None:
            out["atom"] = atom
        if annot is not None:
            out["annot"] = annot
        return out

    match m:
        case Var(name):
            return node("var", atom=name)
        case App(fn, arg):
            return node("app", (fn, arg))
        case Lam(param, body, annot):
            return node("lam", (body,), atom=param,
                        annot=None if annot is None else pretty_type(annot))
        case Rec(self_name, param, body, annot):
            return node("rec", (body,), atom=[self_name, param],
                        annot=None if annot is None else
                        f"{pretty_type(annot[0])} -> {pretty_type(annot[1])}")
        case IntLit(value):
            return node("int", atom=value)
        case StrLit(value):
            return node("str", atom=value)
        case BoolLit(value):
            return node("bool", atom=value)
        case BinOp(op, lhs, rhs):
            return node(op, (lhs, rhs))
        case If(cond, then, orelse):
            return node("if", (cond, then, orelse))
        case AstCtor(tag, args):
            return node("ast", args, atom=tag.name,
                        annot=None if tag.eval_annot is None
                        else pretty_type(tag.eval_annot))
        case TagLit(tag):
            return node("tag", atom=tag.name,
                        annot=None if tag.eval_annot is None
                        else pretty_type(tag.eval_annot))
        case DownML(body):
            return node("downml", (body,))
        case UpML(body):
            return node("upml", (body,))
        case Eval(body, annot):
            return node("eval", (body,),
                        annot=None if annot is None else pretty_type(annot))
        case Lift(body):
            return node("lift", (body,))
        case LetDown(name, bound, body):
            return node("letdown", (bound, body), atom=name)
    raise TypeError(f"not a Term: {m!r}")


def _out_to_json(out) -> dict:
    if isinstance(out, Term):
        return term_to_json(out)
    return {"type": pretty_type(out)}


def derivation_to_json(d: Derivation) -> dict:
    return {
        "rule": d.rule,
        "relation": d.relation,
        "in": term_to_json(d.term_in),
        "out": _out_to_json(d.term_out),
        "premises": [derivation_to_json(p) for p in d.premises],
    }


def render_derivation(d: Derivation, indent: int = 0) -> str:
    """Indented text, one rule per line, premises above their conclusion."""
    lines = [render_derivation(p, indent + 1) for p in d.premises]
    out = (pretty(d.term_out) if isinstance(d.term_out, Term)
           else pretty_type(d.term_out))
    lines.append(f"{'  ' * indent}{d.rule}: {pretty(d.term_in)}"
                 f"  ={d.relation}=>  {out}")
    return "\n".join(lines)
