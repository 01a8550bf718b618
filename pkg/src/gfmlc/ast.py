"""Abstract syntax shared by the whole toolchain.

A feature module is the 5-tuple (declarations, properties, representation,
definitions, proofs) plus a parent link.  Expressions and formulas share one
term language: the typechecker decides whether a term is a boolean formula or
a value-producing expression.  Every node is a frozen dataclass so values can
be hashed, compared structurally and shared freely.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union


class Status(enum.Enum):
    SUCCESS = "success"
    NO_SUCCESS = "no_success"

    def __repr__(self) -> str:
        return self.value


# -- types ------------------------------------------------------------------


@dataclass(frozen=True)
class IntType:
    def __str__(self) -> str:
        return "int"


@dataclass(frozen=True)
class BoolType:
    def __str__(self) -> str:
        return "bool"


@dataclass(frozen=True)
class StatusType:
    def __str__(self) -> str:
        return "S"


@dataclass(frozen=True)
class SelfType:
    def __str__(self) -> str:
        return "Self"


@dataclass(frozen=True)
class ProductType:
    items: tuple["SemType", ...]

    def __post_init__(self):
        if len(self.items) < 2:
            raise ValueError("product types need at least two components")

    def __str__(self) -> str:
        return " * ".join(
            f"({t})" if isinstance(t, ProductType) else str(t) for t in self.items
        )


SemType = Union[IntType, BoolType, StatusType, SelfType, ProductType]

INT = IntType()
BOOL = BoolType()
STATUS = StatusType()
SELF = SelfType()


def contains_self(t: SemType) -> bool:
    if isinstance(t, SelfType):
        return True
    if isinstance(t, ProductType):
        return any(contains_self(c) for c in t.items)
    return False


def substitute_self(t: SemType, rep: SemType) -> SemType:
    """Replace every ``Self`` inside ``t`` by ``rep``."""
    if isinstance(t, SelfType):
        return rep
    if isinstance(t, ProductType):
        return ProductType(tuple(substitute_self(c, rep) for c in t.items))
    return t


# -- terms ------------------------------------------------------------------


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class StatusLit:
    value: Status


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Call:
    """Call of a module function or of a builtin projection (first/second)."""

    func: str
    args: tuple["Term", ...]


@dataclass(frozen=True)
class ParentCall:
    """Call of an ancestor's version of ``func``.

    ``target`` is None for the relative ``parent!f`` form, otherwise the name
    of the ancestor module (``BA!update``).
    """

    func: str
    args: tuple["Term", ...]
    target: Optional[str] = None


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Not:
    arg: "Term"


@dataclass(frozen=True)
class Neg:
    arg: "Term"


@dataclass(frozen=True)
class Tuple:
    items: tuple["Term", ...]


@dataclass(frozen=True)
class If:
    cond: "Term"
    then: "Term"
    orelse: "Term"


@dataclass(frozen=True)
class Quant:
    """``all a b : T, body`` or ``ex a b : T, body``."""

    kind: str
    names: tuple[str, ...]
    type: SemType
    body: "Term"


@dataclass(frozen=True)
class Convert:
    """Implicit projection from a descendant representation to an ancestor's.

    Inserted by the typechecker, never written by users.  ``path`` lists
    (index, arity) projection steps applied innermost first.
    """

    arg: "Term"
    path: tuple[tuple[int, int], ...]


Term = Union[
    IntLit, BoolLit, StatusLit, Var, Call, ParentCall, BinOp, Not, Neg, Tuple,
    If, Quant, Convert,
]

ARITH_OPS = ("+", "-")
COMPARE_OPS = ("=", "<>", "<", "<=", ">", ">=")
BOOL_OPS = ("&&", "||", "->")
BUILTINS = {"first": 0, "second": 1}


# -- module structure ---------------------------------------------------------


@dataclass(frozen=True)
class QualName:
    """A possibly qualified name such as ``BA!update_succ_BA``.

    ``module`` is None for an unqualified name and ``"parent"`` for the
    relative qualifier.
    """

    module: Optional[str]
    name: str

    def __str__(self) -> str:
        return self.name if self.module is None else f"{self.module}!{self.name}"


@dataclass(frozen=True)
class Signature:
    name: str
    params: tuple[SemType, ...]
    result: SemType

    @property
    def is_constant(self) -> bool:
        return not self.params


@dataclass(frozen=True)
class NewFormula:
    formula: Term


@dataclass(frozen=True)
class Premise:
    label: str
    formula: Term


@dataclass(frozen=True)
class Refinement:
    base: QualName
    premises: tuple[Premise, ...] = ()
    conclusions: tuple[Term, ...] = ()


@dataclass(frozen=True)
class Property:
    name: str
    body: Union[NewFormula, Refinement]

    @property
    def is_refinement(self) -> bool:
        return isinstance(self.body, Refinement)


@dataclass(frozen=True)
class RepDefine:
    type: SemType


@dataclass(frozen=True)
class RepKeep:
    pass


@dataclass(frozen=True)
class RepExtend:
    """New components placed in front of the parent's representation."""

    components: tuple[SemType, ...]

    def __post_init__(self):
        if not self.components:
            raise ValueError("a product extension needs at least one component")


RepExtension = Union[RepDefine, RepKeep, RepExtend]


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple[str, ...]
    body: Term
    redefine: bool = False


@dataclass(frozen=True)
class ByDefinition:
    name: str


@dataclass(frozen=True)
class ByProperty:
    name: QualName


@dataclass(frozen=True)
class ByPredicate:
    name: QualName


Hint = Union[ByDefinition, ByProperty, ByPredicate]


@dataclass(frozen=True)
class Proof:
    of: str
    hints: tuple[Hint, ...] = ()


@dataclass(frozen=True)
class FeatureModule:
    name: str
    parent: Optional[str] = None
    signatures: tuple[Signature, ...] = ()
    properties: tuple[Property, ...] = ()
    representation: Optional[RepExtension] = None
    definitions: tuple[FunctionDef, ...] = ()
    proofs: tuple[Proof, ...] = ()
    # names of the feature modules a composite was built from
    components: tuple[str, ...] = field(default=())

    def signature(self, name: str) -> Optional[Signature]:
        for s in self.signatures:
            if s.name == name:
                return s
        return None

    def property(self, name: str) -> Optional[Property]:
        for p in self.properties:
            if p.name == name:
                return p
        return None

    def definition(self, name: str) -> Optional[FunctionDef]:
        for d in self.definitions:
            if d.name == name:
                return d
        return None

    def proof(self, name: str) -> Optional[Proof]:
        for p in self.proofs:
            if p.of == name:
                return p
        return None


# -- generic traversal helpers ------------------------------------------------


def children(t: Term) -> tuple[Term, ...]:
    if isinstance(t, (Call, ParentCall, Tuple)):
        return t.args if not isinstance(t, Tuple) else t.items
    if isinstance(t, BinOp):
        return (t.left, t.right)
    if isinstance(t, (Not, Neg, Convert)):
        return (t.arg,)
    if isinstance(t, If):
        return (t.cond, t.then, t.orelse)
    if isinstance(t, Quant):
        return (t.body,)
    return ()


def walk(t: Term):
    """Yield ``t`` and every sub-term, pre-order."""
    stack = [t]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def free_vars(t: Term) -> set[str]:
    """Names of free ``Var`` nodes (constants included)."""
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Quant):
        return free_vars(t.body) - set(t.names)
    out: set[str] = set()
    for c in children(t):
        out |= free_vars(c)
    return out


def map_children(t: Term, fn) -> Term:
    """Rebuild ``t`` with ``fn`` applied to each direct child."""
    if isinstance(t, Call):
        return Call(t.func, tuple(fn(a) for a in t.args))
    if isinstance(t, ParentCall):
        return ParentCall(t.func, tuple(fn(a) for a in t.args), t.target)
    if isinstance(t, Tuple):
        return Tuple(tuple(fn(a) for a in t.items))
    if isinstance(t, BinOp):
        return BinOp(t.op, fn(t.left), fn(t.right))
    if isinstance(t, Not):
        return Not(fn(t.arg))
    if isinstance(t, Neg):
        return Neg(fn(t.arg))
    if isinstance(t, Convert):
        return Convert(fn(t.arg), t.path)
    if isinstance(t, If):
        return If(fn(t.cond), fn(t.then), fn(t.orelse))
    if isinstance(t, Quant):
        return Quant(t.kind, t.names, t.type, fn(t.body))
    return t


def substitute(t: Term, mapping: dict[str, Term]) -> Term:
    """Capture-avoiding enough for GFML: quantifiers shadow their names."""
    if isinstance(t, Var):
        return mapping.get(t.name, t)
    if isinstance(t, Quant):
        inner = {k: v for k, v in mapping.items() if k not in t.names}
        return Quant(t.kind, t.names, t.type, substitute(t.body, inner))
    return map_children(t, lambda c: substitute(c, mapping))


def strip_conversions(t: Term) -> Term:
    if isinstance(t, Convert):
        return strip_conversions(t.arg)
    return map_children(t, strip_conversions)
