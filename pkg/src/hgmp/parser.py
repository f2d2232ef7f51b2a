"""Concrete syntax for terms and types.

Notation: splice $(e); quote [| e |]; lambda \\x. e (typed \\x:T. e);
recursion rec g x. e (typed rec g x : T -> U . e); let x = e1 in e2 is
sugar for (\\x. e2) e1; letdown x = e1 in e2 is the compile-time let.
Tags are #var .. #promote, AST constructors astVar(..) .. astPromote(..).
Application binds tighter than *, which binds tighter than + and -, which
bind tighter than ==; all left-associative. Binder bodies and the
rightmost operand of an operator chain extend maximally to the right.
Line comments start with --.

In typed mode eval, astEval and #eval require a {Type} annotation; in
untyped mode the annotation is rejected. Surface arity of every AST
constructor is checked against the signature registry while parsing
(promote only needs one or more arguments).
"""

from __future__ import annotations

from dataclasses import dataclass

from . import signature
from .syntax import (
    INT, BOOL, STRING, CODE,
    App, Arrow, AstCtor, BinOp, BoolLit, DownML, Eval, If, IntLit, Lam,
    LetDown, Lift, Rec, StrLit, Tag, TagLit, TagType, Term, TypeExpr, UpML,
    Var, AST_CTOR_OF_TAG, SURFACE_OF_TAG, TAG_OF_AST_CTOR, TAG_OF_SURFACE,
)

MODES = ("typed", "untyped")


@dataclass(frozen=True)
class SourceSpan:
    start: int  # byte offset, inclusive
    end: int  # byte offset, exclusive

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError("span ends before it starts")


@dataclass
class ParseError(Exception):
    span: SourceSpan
    message: str
    expected: tuple[str, ...] = ()

    def __str__(self):
        s = f"parse error at bytes {self.span.start}..{self.span.end}: {self.message}"
        if self.expected:
            s += " (expected " + " or ".join(self.expected) + ")"
        return s


### lexer

_KEYWORDS = {
    "let", "letdown", "in", "if", "then", "else", "rec",
    "true", "false", "eval", "lift",
}

_SYMBOLS = ("[|", "|]", "->", "==", "(", ")", "{", "}", ",", ".", ":",
            "\\", "$", "+", "-", "*", "=")


@dataclass
class _Token:
    kind: str
    value: object
    span: SourceSpan


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _is_ident_char(ch: str) -> bool:
    return ch.isalnum() or ch in "_'"


# Tokens a value can end with: a '-' directly after one of these is the
# binary operator, otherwise '-' right before digits starts a negative
# integer literal (there is no general unary minus).
_OPERAND_ENDERS = frozenset(
    {"int", "string", "ident", "true", "false", "tag", ")", "|]", "}"})


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0  # character index
        self.byte = 0  # byte offset of self.pos
        self.prev_kind: str | None = None

    def _advance(self, count: int = 1):
        for _ in range(count):
            self.byte += len(self.text[self.pos].encode("utf-8"))
            self.pos += 1

    def _error(self, start_byte: int, message: str):
        raise ParseError(SourceSpan(start_byte, self.byte), message)

    def tokens(self) -> list[_Token]:
        out = []
        while True:
            tok = self._next()
            self.prev_kind = tok.kind
            out.append(tok)
            if tok.kind == "eof":
                return out

    def _next(self) -> _Token:
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            if ch in " \t\r\n":
                self._advance()
            elif ch == "-" and text.startswith("--", self.pos):
                while self.pos < len(text) and text[self.pos] != "\n":
                    self._advance()
            else:
                break
        start = self.byte
        if self.pos >= len(text):
            return _Token("eof", None, SourceSpan(start, start))
        ch = text[self.pos]
        negative = (ch == "-" and self.pos + 1 < len(text)
                    and text[self.pos + 1].isdigit()
                    and self.prev_kind not in _OPERAND_ENDERS)
        if ch.isdigit() or negative:
            begin = self.pos
            if negative:
                self._advance()
            while self.pos < len(text) and text[self.pos].isdigit():
                self._advance()
            return _Token("int", int(text[begin:self.pos]),
                          SourceSpan(start, self.byte))
        if _is_ident_start(ch):
            begin = self.pos
            while self.pos < len(text) and _is_ident_char(text[self.pos]):
                self._advance()
            word = text[begin:self.pos]
            span = SourceSpan(start, self.byte)
            if word in _KEYWORDS:
                return _Token(word, word, span)
            if word in TAG_OF_AST_CTOR:
                return _Token("astctor", TAG_OF_AST_CTOR[word], span)
            return _Token("ident", word, span)
        if ch == '"':
            return self._string(start)
        if ch == "#":
            self._advance()
            begin = self.pos
            while self.pos < len(text) and _is_ident_char(text[self.pos]):
                self._advance()
            word = text[begin:self.pos]
            if word not in TAG_OF_SURFACE:
                self._error(start, f"unknown tag #{word}")
            return _Token("tag", TAG_OF_SURFACE[word], SourceSpan(start, self.byte))
        for sym in _SYMBOLS:
            if text.startswith(sym, self.pos):
                self._advance(len(sym))
                return _Token(sym, sym, SourceSpan(start, self.byte))
        self._advance()
        self._error(start, f"unexpected character {ch!r}")

    def _string(self, start: int) -> _Token:
        self._advance()  # opening quote
        text = self.text
        out = []
        while True:
            if self.pos >= len(text):
                self._error(start, "unterminated string literal")
            ch = text[self.pos]
            if ch == '"':
                self._advance()
                return _Token("string", "".join(out), SourceSpan(start, self.byte))
            if ch == "\\":
                self._advance()
                if self.pos >= len(text):
                    self._error(start, "unterminated string literal")
                esc = text[self.pos]
                self._advance()
                mapped = {"\\": "\\", '"': '"', "n": "\n", "t": "\t"}.get(esc)
                if mapped is None:
                    self._error(start, f"bad escape \\{esc}")
                out.append(mapped)
            else:
                self._advance()
                out.append(ch)


### parser

_TERM_STARTERS = ("\\", "rec", "let", "letdown", "if")
_ATOM_STARTERS = ("ident", "int", "string", "true", "false", "tag",
                  "astctor", "eval", "lift", "$", "[|", "(")

_TYPE_NAMES = {"Int": INT, "Bool": BOOL, "String": STRING, "Code": CODE}


class _Parser:
    def __init__(self, text: str, mode: str):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.tokens = _Lexer(text).tokens()
        self.pos = 0
        self.typed = mode == "typed"

    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def take(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, kind: str, what: str | None = None) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            self.fail(tok, what or repr(kind))
        return self.take()

    def fail(self, tok: _Token, *expected: str):
        found = "end of input" if tok.kind == "eof" else repr(
            self._spelling(tok))
        raise ParseError(tok.span, f"unexpected {found}", expected)

    @staticmethod
    def _spelling(tok: _Token) -> str:
        if tok.kind in ("ident", "int", "string"):
            return str(tok.value)
        if tok.kind == "astctor":
            return AST_CTOR_OF_TAG[tok.value]
        if tok.kind == "tag":
            return "#" + SURFACE_OF_TAG[tok.value]
        return str(tok.kind)

    ### terms

    def term(self) -> Term:
        kind = self.peek().kind
        if kind == "\\":
            return self._lambda()
        if kind == "rec":
            return self._rec()
        if kind == "let":
            return self._let()
        if kind == "letdown":
            return self._letdown()
        if kind == "if":
            return self._if()
        return self._binop(0)

    def _lambda(self) -> Term:
        self.take()
        param = self.expect("ident", "a parameter name").value
        annot = None
        if self.peek().kind == ":":
            self.take()
            annot = self.type_expr()
        self.expect(".", "'.'")
        return Lam(param, self.term(), annot)

    def _rec(self) -> Term:
        tok = self.take()
        self_name = self.expect("ident", "the function name").value
        param = self.expect("ident", "a parameter name").value
        annot = None
        if self.peek().kind == ":":
            self.take()
            ty = self.type_expr()
            if not isinstance(ty, Arrow):
                raise ParseError(tok.span,
                                 "recursion annotation must be a function type")
            annot = (ty.src, ty.dst)
        self.expect(".", "'.'")
        return Rec(self_name, param, self.term(), annot)

    def _let(self) -> Term:
        self.take()
        name = self.expect("ident", "a name").value
        self.expect("=", "'='")
        bound = self.term()
        self.expect("in", "'in'")
        body = self.term()
        return App(Lam(name, body), bound)

    def _letdown(self) -> Term:
        self.take()
        name = self.expect("ident", "a name").value
        self.expect("=", "'='")
        bound = self.term()
        self.expect("in", "'in'")
        body = self.term()
        return LetDown(name, bound, body)

    def _if(self) -> Term:
        self.take()
        cond = self.term()
        self.expect("then", "'then'")
        then = self.term()
        self.expect("else", "'else'")
        orelse = self.term()
        return If(cond, then, orelse)

    # operator levels, loosest first; each entry is (ops, handedness handled
    # uniformly: left-associative, rightmost operand may be a full term)
    _LEVELS = ((("==",), {"==": "eq"}),
               (("+", "-"), {"+": "add", "-": "sub"}),
               (("*",), {"*": "mul"}))

    def _binop(self, level: int) -> Term:
        if level == len(self._LEVELS):
            return self._application()
        ops, names = self._LEVELS[level]
        lhs = self._binop(level + 1)
        while self.peek().kind in ops:
            op = names[self.take().kind]
            if self.peek().kind in _TERM_STARTERS:
                return BinOp(op, lhs, self.term())
            lhs = BinOp(op, lhs, self._binop(level + 1))
        return lhs

    def _application(self) -> Term:
        fn = self._atom()
        while self.peek().kind in _ATOM_STARTERS:
            fn = App(fn, self._atom())
        return fn

    def _atom(self) -> Term:
        tok = self.peek()
        if tok.kind == "ident":
            return Var(self.take().value)
        if tok.kind == "int":
            return IntLit(self.take().value)
        if tok.kind == "string":
            return StrLit(self.take().value)
        if tok.kind in ("true", "false"):
            return BoolLit(self.take().kind == "true")
        if tok.kind == "tag":
            self.take()
            return TagLit(Tag(tok.value, self._eval_annot(tok)))
        if tok.kind == "astctor":
            return self._ast_ctor()
        if tok.kind == "eval":
            self.take()
            annot = self._eval_annot(tok, construct="eval")
            self.expect("(", "'('")
            body = self.term()
            self.expect(")", "')'")
            return Eval(body, annot)
        if tok.kind == "lift":
            self.take()
            self.expect("(", "'('")
            body = self.term()
            self.expect(")", "')'")
            return Lift(body)
        if tok.kind == "$":
            self.take()
            self.expect("(", "'('")
            body = self.term()
            self.expect(")", "')'")
            return DownML(body)
        if tok.kind == "[|":
            self.take()
            body = self.term()
            self.expect("|]", "'|]'")
            return UpML(body)
        if tok.kind == "(":
            self.take()
            body = self.term()
            self.expect(")", "')'")
            return body
        self.fail(tok, "a term")

    def _eval_annot(self, tok: _Token, construct: str | None = None
                    ) -> TypeExpr | None:
        """Annotation handling shared by eval, astEval and #eval."""
        name = construct or ("#eval" if tok.value == "eval" else None)
        if name is None:
            if self.peek().kind == "{":
                raise ParseError(self.peek().span,
                                 "only eval carries a type annotation")
            return None
        if self.typed:
            if self.peek().kind != "{":
                raise ParseError(tok.span,
                                 f"{name} requires a {{Type}} annotation in typed mode")
            self.take()
            annot = self.type_expr()
            self.expect("}", "'}'")
            return annot
        if self.peek().kind == "{":
            raise ParseError(self.peek().span,
                             f"{name} takes no annotation in untyped mode")
        return None

    def _ast_ctor(self) -> Term:
        tok = self.take()
        tag_name = tok.value
        annot = None
        if tag_name == "eval":
            annot = self._eval_annot(tok, construct="astEval")
        elif self.peek().kind == "{":
            raise ParseError(self.peek().span,
                             "only astEval carries a type annotation")
        self.expect("(", "'('")
        args = []
        if self.peek().kind != ")":
            args.append(self.term())
            while self.peek().kind == ",":
                self.take()
                args.append(self.term())
        close = self.expect(")", "')'")
        if not signature.check_arity(tag_name, len(args)):
            spec = signature.lookup(tag_name)
            wanted = "1 or more" if spec.arity is None else str(spec.arity)
            raise ParseError(
                SourceSpan(tok.span.start, close.span.end),
                f"{self._spelling(tok)} takes {wanted} argument(s), got {len(args)}")
        return AstCtor(Tag(tag_name, annot), tuple(args))

    ### types

    def type_expr(self) -> TypeExpr:
        lhs = self._type_atom()
        if self.peek().kind == "->":
            self.take()
            return Arrow(lhs, self.type_expr())
        return lhs

    def _type_atom(self) -> TypeExpr:
        tok = self.peek()
        if tok.kind == "ident":
            if tok.value in _TYPE_NAMES:
                self.take()
                return _TYPE_NAMES[tok.value]
            if tok.value == "Tag":
                self.take()
                tag = self.expect("tag", "a #tag")
                return TagType(tag.value)
            raise ParseError(tok.span, f"unknown type name {tok.value!r}")
        if tok.kind == "(":
            self.take()
            ty = self.type_expr()
            self.expect(")", "')'")
            return ty
        self.fail(tok, "a type")

    def finish(self):
        tok = self.peek()
        if tok.kind != "eof":
            self.fail(tok, "end of input")


def parse_term(text: str, mode: str = "untyped") -> Term:
    """Parse a complete term; raises ParseError with a byte span on failure."""
    parser = _Parser(text, mode)
    term = parser.term()
    parser.finish()
    return term


def parse_type(text: str) -> TypeExpr:
    parser = _Parser(text, "typed")
    ty = parser.type_expr()
    parser.finish()
    return ty
