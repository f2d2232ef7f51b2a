"""Term language: the lambda core plus every meta-programming construct.

Terms are immutable; every operation here is pure. The same Term type is
the value universe for all four reduction relations, so AST-constructor
nodes are ordinary data (structurally variadic -- malformed arities like
astInt(1, 1) must be representable so later stages can reject them).
"""

from __future__ import annotations

from dataclasses import dataclass


### types

class TypeExpr:
    """Base for static types: Int | Bool | String | Code | Tag#t | arrows."""

    __slots__ = ()


@dataclass(frozen=True)
class IntType(TypeExpr):
    pass


@dataclass(frozen=True)
class BoolType(TypeExpr):
    pass


@dataclass(frozen=True)
class StrType(TypeExpr):
    pass


@dataclass(frozen=True)
class CodeType(TypeExpr):
    pass


@dataclass(frozen=True)
class TagType(TypeExpr):
    tag: str


@dataclass(frozen=True)
class Arrow(TypeExpr):
    src: TypeExpr
    dst: TypeExpr


@dataclass(frozen=True)
class MetaVar(TypeExpr):
    """Inference-only placeholder; never part of a reported type."""

    ident: int


INT = IntType()
BOOL = BoolType()
STRING = StrType()
CODE = CodeType()


def pretty_type(t: TypeExpr, prec: int = 0) -> str:
    match t:
        case IntType():
            return "Int"
        case BoolType():
            return "Bool"
        case StrType():
            return "String"
        case CodeType():
            return "Code"
        case TagType(tag):
            return "Tag#" + SURFACE_OF_TAG[tag]
        case Arrow(src, dst):
            s = f"{pretty_type(src, 1)} -> {pretty_type(dst, 0)}"
            return f"({s})" if prec > 0 else s
        case MetaVar(ident):
            return f"?{ident}"
    raise TypeError(f"not a TypeExpr: {t!r}")


### tags

# Closed set of AST-constructor names; must stay in sync with the
# signature registry (there is a meta-test for that).
TAG_NAMES = (
    "var", "app", "lam", "rec", "int", "string", "bool",
    "add", "sub", "mul", "eq", "if", "eval", "lift", "promote",
)

# Concrete-syntax spellings: #str / astStr abbreviate the "string" tag.
SURFACE_OF_TAG = {name: name for name in TAG_NAMES}
SURFACE_OF_TAG["string"] = "str"
TAG_OF_SURFACE = {v: k for k, v in SURFACE_OF_TAG.items()}

AST_CTOR_OF_TAG = {
    name: "ast" + SURFACE_OF_TAG[name].capitalize() for name in TAG_NAMES
}
TAG_OF_AST_CTOR = {v: k for k, v in AST_CTOR_OF_TAG.items()}


@dataclass(frozen=True)
class Tag:
    """First-class constructor name. The eval tag carries the result-type
    annotation in typed pipelines (eval's AST mirror has no extra slot)."""

    name: str
    eval_annot: TypeExpr | None = None

    def __post_init__(self):
        if self.name not in TAG_NAMES:
            raise ValueError(f"unknown tag name: {self.name!r}")
        if self.eval_annot is not None and self.name != "eval":
            raise ValueError("only the eval tag carries a type annotation")


### terms

class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term


@dataclass(frozen=True)
class Lam(Term):
    param: str
    body: Term
    annot: TypeExpr | None = None


@dataclass(frozen=True)
class Rec(Term):
    """Recursive function; self_name is bound to the whole function in body."""

    self_name: str
    param: str
    body: Term
    annot: tuple[TypeExpr, TypeExpr] | None = None


@dataclass(frozen=True)
class IntLit(Term):
    value: int


@dataclass(frozen=True)
class StrLit(Term):
    value: str


@dataclass(frozen=True)
class BoolLit(Term):
    value: bool


BINOPS = ("add", "sub", "mul", "eq")
BINOP_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "eq": "=="}


@dataclass(frozen=True)
class BinOp(Term):
    op: str
    lhs: Term
    rhs: Term

    def __post_init__(self):
        if self.op not in BINOPS:
            raise ValueError(f"unknown operator: {self.op!r}")


@dataclass(frozen=True)
class If(Term):
    cond: Term
    then: Term
    orelse: Term


@dataclass(frozen=True)
class AstCtor(Term):
    tag: Tag
    args: tuple[Term, ...]


@dataclass(frozen=True)
class TagLit(Term):
    tag: Tag


@dataclass(frozen=True)
class DownML(Term):
    """Splice $(e): run at compile time, replaced by the code it returns."""

    body: Term


@dataclass(frozen=True)
class UpML(Term):
    """Quote [| e |]: compile-time expansion of e into AST constructors."""

    body: Term


@dataclass(frozen=True)
class Eval(Term):
    """Run-time code execution; annot is the declared result type (typed mode)."""

    body: Term
    annot: TypeExpr | None = None


@dataclass(frozen=True)
class Lift(Term):
    body: Term


@dataclass(frozen=True)
class LetDown(Term):
    """Compile-time let: bound value is visible inside splices in body."""

    name: str
    bound: Term
    body: Term


def mk_ast(tag_name: str, *args: Term, annot: TypeExpr | None = None) -> AstCtor:
    return AstCtor(Tag(tag_name, annot), tuple(args))


### free variables

def free_vars(m: Term) -> set[str]:
    """Variables occurring outside any binder for them.

    Strings inside AST constructors are data and contribute nothing.
    LetDown shadows its name in both the bound term and the body: that is
    what its substitution behaviour (no-op when the substituted variable
    equals the bound name) forces.
    """
    match m:
        case Var(name):
            return {name}
        case App(fn, arg):
            return free_vars(fn) | free_vars(arg)
        case Lam(param, body):
            return free_vars(body) - {param}
        case Rec(self_name, param, body):
            return free_vars(body) - {self_name, param}
        case IntLit() | StrLit() | BoolLit() | TagLit():
            return set()
        case BinOp(_, lhs, rhs):
            return free_vars(lhs) | free_vars(rhs)
        case If(cond, then, orelse):
            return free_vars(cond) | free_vars(then) | free_vars(orelse)
        case AstCtor(_, args):
            out: set[str] = set()
            for a in args:
                out |= free_vars(a)
            return out
        case DownML(body) | UpML(body) | Eval(body) | Lift(body):
            return free_vars(body)
        case LetDown(name, bound, body):
            return (free_vars(bound) | free_vars(body)) - {name}
    raise TypeError(f"not a Term: {m!r}")


### substitution

def fresh_name(base: str, avoid: set[str]) -> str:
    """Smallest primed variant of base not in avoid; stays a valid identifier."""
    candidate = base + "'"
    while candidate in avoid:
        candidate += "'"
    return candidate


def subst(m: Term, n: Term, x: str) -> Term:
    """Capture-avoiding substitution m{n/x}.

    Pushes unchanged through splices, quotes, lift and eval. A LetDown
    binding the substituted name shadows it completely (bound term
    included); other binders are renamed when they would capture n.
    """
    match m:
        case Var(name):
            return n if name == x else m
        case App(fn, arg):
            return App(subst(fn, n, x), subst(arg, n, x))
        case Lam(param, body, annot):
            if param == x:
                return m
            if param in free_vars(n) and x in free_vars(body):
                renamed = fresh_name(param, free_vars(n) | free_vars(body) | {x})
                body = subst(body, Var(renamed), param)
                param = renamed
            return Lam(param, subst(body, n, x), annot)
        case Rec(self_name, param, body, annot):
            if x in (self_name, param):
                return m
            fv_n = free_vars(n)
            if (self_name in fv_n or param in fv_n) and x in free_vars(body):
                avoid = fv_n | free_vars(body) | {x, self_name, param}
                if self_name == param:
                    # Shared name: every occurrence belongs to the parameter.
                    renamed = fresh_name(param, avoid)
                    body = subst(body, Var(renamed), param)
                    param = renamed
                    self_name = fresh_name(self_name, avoid | {renamed})
                else:
                    if self_name in fv_n:
                        renamed = fresh_name(self_name, avoid)
                        body = subst(body, Var(renamed), self_name)
                        self_name = renamed
                        avoid = avoid | {renamed}
                    if param in fv_n:
                        renamed = fresh_name(param, avoid)
                        body = subst(body, Var(renamed), param)
                        param = renamed
            return Rec(self_name, param, subst(body, n, x), annot)
        case IntLit() | StrLit() | BoolLit() | TagLit():
            return m
        case BinOp(op, lhs, rhs):
            return BinOp(op, subst(lhs, n, x), subst(rhs, n, x))
        case If(cond, then, orelse):
            return If(subst(cond, n, x), subst(then, n, x), subst(orelse, n, x))
        case AstCtor(tag, args):
            return AstCtor(tag, tuple(subst(a, n, x) for a in args))
        case DownML(body):
            return DownML(subst(body, n, x))
        case UpML(body):
            return UpML(subst(body, n, x))
        case Eval(body, annot):
            return Eval(subst(body, n, x), annot)
        case Lift(body):
            return Lift(subst(body, n, x))
        case LetDown(name, bound, body):
            if name == x:
                return m
            if name in free_vars(n) and x in (free_vars(bound) | free_vars(body)):
                renamed = fresh_name(
                    name, free_vars(n) | free_vars(bound) | free_vars(body) | {x}
                )
                bound = subst(bound, Var(renamed), name)
                body = subst(body, Var(renamed), name)
                name = renamed
            return LetDown(name, subst(bound, n, x), subst(body, n, x))
    raise TypeError(f"not a Term: {m!r}")


### alpha equivalence

def alpha_eq(a: Term, b: Term) -> bool:
    """Equality up to consistent renaming of bound variables.

    Names inside AST constructors are string data and compare literally.
    Binder type annotations are inference hints and are ignored; eval
    annotations change run-time behaviour and are compared.
    """
    return _alpha(a, b, {}, {}, 0)


def _alpha(a: Term, b: Term, env_a: dict, env_b: dict, depth: int) -> bool:
    match a, b:
        case Var(x), Var(y):
            return env_a.get(x, ("free", x)) == env_b.get(y, ("free", y))
        case App(f1, a1), App(f2, a2):
            return _alpha(f1, f2, env_a, env_b, depth) and _alpha(
                a1, a2, env_a, env_b, depth
            )
        case Lam(p1, b1, _), Lam(p2, b2, _):
            return _alpha(
                b1, b2, {**env_a, p1: depth}, {**env_b, p2: depth}, depth + 1
            )
        case Rec(g1, p1, b1, _), Rec(g2, p2, b2, _):
            ea = {**env_a, g1: depth, p1: depth + 1}
            eb = {**env_b, g2: depth, p2: depth + 1}
            return _alpha(b1, b2, ea, eb, depth + 2)
        case IntLit(u), IntLit(v):
            return u == v
        case StrLit(u), StrLit(v):
            return u == v
        case BoolLit(u), BoolLit(v):
            return u == v
        case TagLit(t1), TagLit(t2):
            return t1 == t2
        case BinOp(o1, l1, r1), BinOp(o2, l2, r2):
            return (
                o1 == o2
                and _alpha(l1, l2, env_a, env_b, depth)
                and _alpha(r1, r2, env_a, env_b, depth)
            )
        case If(c1, t1, e1), If(c2, t2, e2):
            return (
                _alpha(c1, c2, env_a, env_b, depth)
                and _alpha(t1, t2, env_a, env_b, depth)
                and _alpha(e1, e2, env_a, env_b, depth)
            )
        case AstCtor(t1, args1), AstCtor(t2, args2):
            return (
                t1 == t2
                and len(args1) == len(args2)
                and all(
                    _alpha(u, v, env_a, env_b, depth)
                    for u, v in zip(args1, args2)
                )
            )
        case DownML(b1), DownML(b2):
            return _alpha(b1, b2, env_a, env_b, depth)
        case UpML(b1), UpML(b2):
            return _alpha(b1, b2, env_a, env_b, depth)
        case Eval(b1, an1), Eval(b2, an2):
            return an1 == an2 and _alpha(b1, b2, env_a, env_b, depth)
        case Lift(b1), Lift(b2):
            return _alpha(b1, b2, env_a, env_b, depth)
        case LetDown(x1, m1, n1), LetDown(x2, m2, n2):
            ea = {**env_a, x1: depth}
            eb = {**env_b, x2: depth}
            return _alpha(m1, m2, ea, eb, depth + 1) and _alpha(
                n1, n2, ea, eb, depth + 1
            )
    return False


### meta-level-free check

def is_ml_free(m: Term) -> bool:
    """True iff no splice, quote or compile-time let remains anywhere in m.

    Evals survive compilation on purpose, so they do not count.
    """
    match m:
        case DownML() | UpML() | LetDown():
            return False
        case Var() | IntLit() | StrLit() | BoolLit() | TagLit():
            return True
        case App(fn, arg):
            return is_ml_free(fn) and is_ml_free(arg)
        case Lam(_, body) | Rec(_, _, body):
            return is_ml_free(body)
        case BinOp(_, lhs, rhs):
            return is_ml_free(lhs) and is_ml_free(rhs)
        case If(cond, then, orelse):
            return is_ml_free(cond) and is_ml_free(then) and is_ml_free(orelse)
        case AstCtor(_, args):
            return all(is_ml_free(a) for a in args)
        case Eval(body) | Lift(body):
            return is_ml_free(body)
    raise TypeError(f"not a Term: {m!r}")


### pretty-printing

# Precedence levels; application binds tightest, then * then +/- then ==.
_TERM, _EQ, _ADD, _MUL, _APP, _ATOM = range(6)


def _escape(s: str) -> str:
    out = []
    for ch in s:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        else:
            out.append(ch)
    return "".join(out)


def _tag_surface(tag: Tag) -> str:
    s = "#" + SURFACE_OF_TAG[tag.name]
    if tag.eval_annot is not None:
        s += "{" + pretty_type(tag.eval_annot) + "}"
    return s


def pretty(m: Term) -> str:
    """Concrete syntax for m; parsing it back yields m structurally."""
    return _pp(m, _TERM)


def _wrap(s: str, level: int, prec: int) -> str:
    return f"({s})" if prec > level else s


def _pp(m: Term, prec: int) -> str:
    match m:
        case Var(name):
            return name
        case IntLit(value):
            # A negative literal binds like a term, not an atom: printed
            # bare after an identifier it would lex as a subtraction.
            return _wrap(str(value), _TERM, prec) if value < 0 else str(value)
        case StrLit(value):
            return f'"{_escape(value)}"'
        case BoolLit(value):
            return "true" if value else "false"
        case TagLit(tag):
            return _tag_surface(tag)
        case AstCtor(tag, args):
            head = AST_CTOR_OF_TAG[tag.name]
            if tag.eval_annot is not None:
                head += "{" + pretty_type(tag.eval_annot) + "}"
            return head + "(" + ", ".join(_pp(a, _TERM) for a in args) + ")"
        case DownML(body):
            return "$(" + _pp(body, _TERM) + ")"
        case UpML(body):
            return "[| " + _pp(body, _TERM) + " |]"
        case Eval(body, annot):
            head = "eval" if annot is None else "eval{" + pretty_type(annot) + "}"
            return head + "(" + _pp(body, _TERM) + ")"
        case Lift(body):
            return "lift(" + _pp(body, _TERM) + ")"
        case App(fn, arg):
            return _wrap(f"{_pp(fn, _APP)} {_pp(arg, _ATOM)}", _APP, prec)
        case BinOp(op, lhs, rhs):
            level = {"eq": _EQ, "add": _ADD, "sub": _ADD, "mul": _MUL}[op]
            s = f"{_pp(lhs, level)} {BINOP_SYMBOL[op]} {_pp(rhs, level + 1)}"
            return _wrap(s, level, prec)
        case If(cond, then, orelse):
            s = (
                f"if {_pp(cond, _TERM)} then {_pp(then, _TERM)} "
                f"else {_pp(orelse, _TERM)}"
            )
            return _wrap(s, _TERM, prec)
        case Lam(param, body, annot):
            head = f"\\{param}" if annot is None else f"\\{param}:{pretty_type(annot)}"
            return _wrap(f"{head}. {_pp(body, _TERM)}", _TERM, prec)
        case Rec(self_name, param, body, annot):
            head = f"rec {self_name} {param}"
            if annot is not None:
                head += f" : {pretty_type(Arrow(annot[0], annot[1]))}"
            return _wrap(f"{head}. {_pp(body, _TERM)}", _TERM, prec)
        case LetDown(name, bound, body):
            s = f"letdown {name} = {_pp(bound, _TERM)} in {_pp(body, _TERM)}"
            return _wrap(s, _TERM, prec)
    raise TypeError(f"not a Term: {m!r}")
