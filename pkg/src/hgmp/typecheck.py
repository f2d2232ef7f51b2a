"""Monotyped checking with unification-based inference.

Checking is interspersed with reduction rather than done upfront: splice
bodies must have type Code, the compiled residual is checked as a whole,
and each eval re-checks the code it is about to run against its
annotation. Inference is monomorphic (no generalisation); it exists
because compiled-in lambdas built from astLam carry no annotations.
"""

from __future__ import annotations

import itertools

from . import signature
from .syntax import (
    BOOL, CODE, INT, STRING,
    App, Arrow, AstCtor, BinOp, BoolLit, DownML, Eval, If, IntLit, Lam,
    LetDown, Lift, MetaVar, Rec, StrLit, TagLit, TagType, Term, TypeExpr,
    UpML, Var, fresh_name, free_vars, pretty, pretty_type, subst,
)

PHASES = ("downML check", "residual check", "eval check", "letdown check")


class TypeErrorDetail(Exception):
    """A rejected program, with enough detail to say why and where."""

    def __init__(self, message: str, *, kind: str = "mismatch",
                 expected: TypeExpr | None = None,
                 found: TypeExpr | None = None,
                 at: Term | None = None,
                 phase: str = "residual check"):
        super().__init__(message)
        self.message = message
        self.kind = kind  # mismatch | unbound | arity | ambiguous | malformed
        self.expected = expected
        self.found = found
        self.at = at
        self.phase = phase

    def __str__(self):
        s = f"error[type]: {self.message}"
        if self.at is not None:
            s += f" at `{pretty(self.at)}`"
        return f"{s} ({self.phase})"


class TypeEnv:
    """Finite map from variables to types; extension refuses duplicates
    (the checker renames shadowed binders before extending)."""

    __slots__ = ("_map",)

    def __init__(self, bindings: dict[str, TypeExpr] | None = None):
        self._map = dict(bindings) if bindings else {}

    def __contains__(self, name: str) -> bool:
        return name in self._map

    def lookup(self, name: str) -> TypeExpr | None:
        return self._map.get(name)

    def extend(self, name: str, ty: TypeExpr) -> "TypeEnv":
        if name in self._map:
            raise ValueError(f"{name!r} already bound in the environment")
        out = TypeEnv(self._map)
        out._map[name] = ty
        return out

    def names(self) -> set[str]:
        return set(self._map)


EMPTY_ENV = TypeEnv()

# AST constructors typed by the one generic rule: every child is Code.
_GENERIC_CODE_TAGS = frozenset(
    {"app", "add", "sub", "mul", "eq", "if", "eval", "lift"})


class _Engine:
    def __init__(self, phase: str):
        self.phase = phase
        self.solution: dict[int, TypeExpr] = {}
        self._fresh = itertools.count()

    def fresh(self) -> MetaVar:
        return MetaVar(next(self._fresh))

    def prune(self, t: TypeExpr) -> TypeExpr:
        """Follow solved meta-variables one level."""
        while isinstance(t, MetaVar) and t.ident in self.solution:
            t = self.solution[t.ident]
        return t

    def resolve(self, t: TypeExpr) -> TypeExpr:
        t = self.prune(t)
        if isinstance(t, Arrow):
            return Arrow(self.resolve(t.src), self.resolve(t.dst))
        return t

    def _occurs(self, ident: int, t: TypeExpr) -> bool:
        t = self.prune(t)
        if isinstance(t, MetaVar):
            return t.ident == ident
        if isinstance(t, Arrow):
            return self._occurs(ident, t.src) or self._occurs(ident, t.dst)
        return False

    def unify(self, found: TypeExpr, expected: TypeExpr,
              at: Term | None = None):
        found = self.prune(found)
        expected = self.prune(expected)
        if found == expected:
            return
        if isinstance(found, MetaVar):
            if self._occurs(found.ident, expected):
                raise TypeErrorDetail(
                    "infinite type", kind="mismatch", at=at, phase=self.phase)
            self.solution[found.ident] = expected
            return
        if isinstance(expected, MetaVar):
            self.unify(expected, found, at)
            return
        if isinstance(found, Arrow) and isinstance(expected, Arrow):
            self.unify(found.src, expected.src, at)
            self.unify(found.dst, expected.dst, at)
            return
        names: dict[int, str] = {}
        raise TypeErrorDetail(
            f"expected {display_type(self.resolve(expected), names)}, "
            f"found {display_type(self.resolve(found), names)}",
            kind="mismatch", expected=self.resolve(expected),
            found=self.resolve(found), at=at, phase=self.phase)

    ### inference proper

    def _bind(self, env: TypeEnv, name: str, ty: TypeExpr, body: Term
              ) -> tuple[TypeEnv, Term]:
        if name in env:
            renamed = fresh_name(name, env.names() | free_vars(body))
            body = subst(body, Var(renamed), name)
            name = renamed
        return env.extend(name, ty), body

    def infer(self, env: TypeEnv, m: Term) -> TypeExpr:
        match m:
            case Var(name):
                ty = env.lookup(name)
                if ty is None:
                    raise TypeErrorDetail(f"unbound variable {name}",
                                          kind="unbound", at=m,
                                          phase=self.phase)
                return ty
            case IntLit():
                return INT
            case StrLit():
                return STRING
            case BoolLit():
                return BOOL
            case TagLit(tag):
                return TagType(tag.name)
            case Lam(param, body, annot):
                arg_ty = annot if annot is not None else self.fresh()
                env2, body2 = self._bind(env, param, arg_ty, body)
                return Arrow(arg_ty, self.infer(env2, body2))
            case Rec(self_name, param, body, annot):
                if annot is not None:
                    arg_ty, res_ty = annot
                else:
                    arg_ty, res_ty = self.fresh(), self.fresh()
                fn_ty = Arrow(arg_ty, res_ty)
                env2, body2 = self._bind(env, self_name, fn_ty, body)
                env3, body3 = self._bind(env2, param, arg_ty, body2)
                self.unify(self.infer(env3, body3), res_ty, at=m)
                return fn_ty
            case App(fn, arg):
                fn_ty = self.infer(env, fn)
                arg_ty = self.infer(env, arg)
                res = self.fresh()
                self.unify(fn_ty, Arrow(arg_ty, res), at=m)
                return res
            case BinOp(op, lhs, rhs):
                self.unify(self.infer(env, lhs), INT, at=lhs)
                self.unify(self.infer(env, rhs), INT, at=rhs)
                return BOOL if op == "eq" else INT
            case If(cond, then, orelse):
                self.unify(self.infer(env, cond), BOOL, at=cond)
                then_ty = self.infer(env, then)
                self.unify(self.infer(env, orelse), then_ty, at=m)
                return then_ty
            case Eval(body, annot):
                if annot is None:
                    raise TypeErrorDetail(
                        "eval without a type annotation cannot be checked",
                        kind="malformed", at=m, phase=self.phase)
                self.unify(self.infer(env, body), CODE, at=body)
                return annot
            case Lift(body):
                ty = self.resolve(self.infer(env, body))
                if ty in (INT, STRING, BOOL):
                    return CODE
                if isinstance(ty, MetaVar):
                    raise TypeErrorDetail(
                        "cannot tell whether the lifted value is an Int, "
                        "String or Bool", kind="ambiguous", at=m,
                        phase=self.phase)
                raise TypeErrorDetail(
                    f"lift applies to Int, String or Bool, found "
                    f"{display_type(ty)}", kind="mismatch", found=ty, at=m,
                    phase=self.phase)
            case AstCtor(tag, args):
                return self._infer_ast(env, m, tag.name, args)
            case DownML() | UpML() | LetDown():
                raise TypeErrorDetail(
                    "compile-time constructs cannot be typed",
                    kind="malformed", at=m, phase=self.phase)
        raise TypeError(f"not a Term: {m!r}")

    def _infer_ast(self, env: TypeEnv, m: Term, name: str,
                   args: tuple[Term, ...]) -> TypeExpr:
        if not signature.check_arity(name, len(args)):
            spec = signature.lookup(name)
            wanted = "1 or more" if spec.arity is None else str(spec.arity)
            raise TypeErrorDetail(
                f"AST constructor for {name} takes {wanted} argument(s), "
                f"got {len(args)}", kind="arity", at=m, phase=self.phase)
        if name in _GENERIC_CODE_TAGS:
            for a in args:
                self.unify(self.infer(env, a), CODE, at=a)
            return CODE
        if name == "var":
            self.unify(self.infer(env, args[0]), STRING, at=args[0])
            return CODE
        if name == "int":
            self.unify(self.infer(env, args[0]), INT, at=args[0])
            return CODE
        if name == "string":
            self.unify(self.infer(env, args[0]), STRING, at=args[0])
            return CODE
        if name == "bool":
            self.unify(self.infer(env, args[0]), BOOL, at=args[0])
            return CODE
        if name in ("lam", "rec"):
            n_binders = 1 if name == "lam" else 2
            for binder in args[:n_binders]:
                # Binder slots must literally be astStr(..): a computed
                # binder could not be named statically.
                match binder:
                    case AstCtor(tag, (inner,)) if tag.name == "string":
                        self.unify(self.infer(env, inner), STRING, at=inner)
                    case _:
                        raise TypeErrorDetail(
                            f"binder argument of ast constructor for {name} "
                            "must be an astStr(..)", kind="mismatch",
                            at=binder, phase=self.phase)
            self.unify(self.infer(env, args[n_binders]), CODE,
                       at=args[n_binders])
            return CODE
        if name == "promote":
            head = self.resolve(self.infer(env, args[0]))
            if isinstance(head, MetaVar):
                raise TypeErrorDetail(
                    "cannot tell which tag astPromote promotes",
                    kind="ambiguous", at=args[0], phase=self.phase)
            if not isinstance(head, TagType):
                raise TypeErrorDetail(
                    f"first argument of astPromote must be a tag, found "
                    f"{display_type(head)}", kind="mismatch", found=head,
                    at=args[0], phase=self.phase)
            rest = args[1:]
            if head.tag == "promote":
                # A promoted promote names the tag it rebuilds in second
                # position; without one its conversion down has no rule.
                if len(args) < 2:
                    raise TypeErrorDetail(
                        "promoted astPromote needs a tag in second position",
                        kind="arity", at=m, phase=self.phase)
                second = self.resolve(self.infer(env, args[1]))
                if not isinstance(second, TagType):
                    raise TypeErrorDetail(
                        "second argument of a promoted astPromote must be "
                        f"a tag, found {display_type(second)}",
                        kind="mismatch", found=second, at=args[1],
                        phase=self.phase)
                rest = args[2:]
            # Remaining children are Code, except that tag values may
            # ride along one level.
            for a in rest:
                ty = self.resolve(self.infer(env, a))
                if isinstance(ty, TagType):
                    continue
                self.unify(ty, CODE, at=a)
            return CODE
        raise AssertionError(f"unhandled tag {name}")


def _has_metavar(t: TypeExpr) -> bool:
    if isinstance(t, MetaVar):
        return True
    if isinstance(t, Arrow):
        return _has_metavar(t.src) or _has_metavar(t.dst)
    return False


def display_type(t: TypeExpr, names: dict[int, str] | None = None) -> str:
    """Render a type for messages; unsolved holes become a, b, c, ..
    so no raw meta-variable ever reaches the user."""
    if names is None:
        names = {}

    def walk(t: TypeExpr) -> str:
        if isinstance(t, MetaVar):
            if t.ident not in names:
                fresh = len(names)
                names[t.ident] = (chr(ord("a") + fresh) if fresh < 26
                                  else f"a{fresh - 25}")
            return names[t.ident]
        if isinstance(t, Arrow):
            src = walk(t.src)
            if isinstance(t.src, Arrow):
                src = f"({src})"
            return f"{src} -> {walk(t.dst)}"
        return pretty_type(t)

    return walk(t)


def infer_open(env: TypeEnv | None, m: Term,
               phase: str = "residual check") -> TypeExpr:
    """Inference without the ambiguity gate; the result may contain
    unresolved meta-variables. Mostly for tests and diagnostics."""
    eng = _Engine(phase)
    return eng.resolve(eng.infer(env or EMPTY_ENV, m))


def infer(env: TypeEnv | None, m: Term,
          phase: str = "residual check") -> TypeExpr:
    """Principal monomorphic type of m, or a TypeErrorDetail.

    A type that still contains meta-variables after solving is reported
    as ambiguous rather than silently defaulted.
    """
    eng = _Engine(phase)
    ty = eng.resolve(eng.infer(env or EMPTY_ENV, m))
    if _has_metavar(ty):
        raise TypeErrorDetail(
            f"ambiguous type {display_type(ty)}", kind="ambiguous", at=m,
            phase=phase)
    return ty


def check(env: TypeEnv | None, m: Term, expected: TypeExpr,
          phase: str = "residual check") -> None:
    """Infer m's type and unify it with expected; raises on failure."""
    eng = _Engine(phase)
    ty = eng.infer(env or EMPTY_ENV, m)
    eng.unify(ty, expected, at=m)
    ty = eng.resolve(ty)
    if _has_metavar(ty):
        raise TypeErrorDetail(
            f"ambiguous type {display_type(ty)}", kind="ambiguous", at=m,
            phase=phase)


def unify(a: TypeExpr, b: TypeExpr) -> dict[int, TypeExpr] | None:
    """Most general unifier of two types as a meta-variable assignment,
    or None when they clash (or a meta-variable would become infinite)."""
    eng = _Engine("residual check")
    try:
        eng.unify(a, b)
    except TypeErrorDetail:
        return None
    return {ident: eng.resolve(MetaVar(ident)) for ident in eng.solution}
