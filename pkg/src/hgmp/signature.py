"""Constructor signature registry.

One row per syntactic construct: its tag (when it has an AST mirror),
arity, binder positions, and how its reduction rules are obtained. The
generic compile-time / down-level / up-level rules and all arity checks
are driven from this table; splices, quotes and compile-time lets have
rows with no tag because they are gone before any AST could mention them.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import TAG_NAMES

VARIADIC = None  # arity marker; only promote uses it


@dataclass(frozen=True)
class CtorSpec:
    name: str
    tag: str | None
    arity: int | None  # None means variadic (at least one argument)
    binders: tuple[int, ...] = ()
    rule_class: str = "generic"  # generic | binder | special

    def __post_init__(self):
        if self.arity is not None:
            for b in self.binders:
                if not 0 <= b < self.arity:
                    raise ValueError(f"binder position {b} outside arity")
        elif self.binders:
            raise ValueError("variadic constructors cannot bind")


_REGISTRY = (
    CtorSpec("var", "var", 1, rule_class="special"),
    CtorSpec("app", "app", 2),
    CtorSpec("lam", "lam", 2, binders=(0,), rule_class="binder"),
    CtorSpec("rec", "rec", 3, binders=(0, 1), rule_class="binder"),
    CtorSpec("int", "int", 1, rule_class="special"),
    CtorSpec("string", "string", 1, rule_class="special"),
    CtorSpec("bool", "bool", 1, rule_class="special"),
    CtorSpec("add", "add", 2),
    CtorSpec("sub", "sub", 2),
    CtorSpec("mul", "mul", 2),
    CtorSpec("eq", "eq", 2),
    CtorSpec("if", "if", 3),
    CtorSpec("eval", "eval", 1, rule_class="special"),
    CtorSpec("lift", "lift", 1, rule_class="special"),
    CtorSpec("promote", "promote", VARIADIC, rule_class="special"),
    CtorSpec("downML", None, 1, rule_class="special"),
    CtorSpec("upML", None, 1, rule_class="special"),
    CtorSpec("letdown", None, 3, binders=(0,), rule_class="binder"),
)

_BY_NAME = {spec.name: spec for spec in _REGISTRY}


def registry() -> tuple[CtorSpec, ...]:
    """The full, fixed constructor table for this calculus."""
    return _REGISTRY


def lookup(name: str) -> CtorSpec:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise KeyError(f"no constructor named {name!r}") from None


def tagged_names() -> frozenset[str]:
    return frozenset(s.name for s in _REGISTRY if s.tag is not None)


def check_arity(tag: str, arg_count: int) -> bool:
    """True iff an AST constructor with this tag may take arg_count children."""
    spec = lookup(tag)
    if spec.arity is None:
        return arg_count >= 1
    return arg_count == spec.arity


assert tagged_names() == frozenset(TAG_NAMES)
