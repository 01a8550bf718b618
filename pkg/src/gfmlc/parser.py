"""Concrete syntax of ``.gfm`` feature-module files.

The grammar is documented in ``docs/grammar.ebnf``.  A file holds exactly one
module whose statements appear in a fixed section order::

    module DL from BA
    sig withdraw : Self -> int;                  -- signatures
    property p refines BA!q premise H1 : ... ;   -- properties
    representation = int * parent;               -- representation
    let withdraw(x) = first(x);                  -- definitions
    redefine update(x, a) = ... ;
    proof of p by definition of update by property BA!q;   -- proofs

Operator precedence, loosest first: quantifiers and ``if`` (extend as far
right as possible), ``->`` (right associative), ``||``, ``&&``, ``~``,
comparisons (non-associative), ``+``/``-``, unary minus, application.
``--`` starts a comment, so a subtraction of a negative literal is written
``x - (-5)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from . import ast as A
from .errors import Diagnostic, ParseError, Span

KEYWORDS = {
    "module", "from", "composing", "sig", "property", "refines", "premise",
    "conclusion", "representation", "parent", "let", "redefine", "proof",
    "of", "by", "definition", "predicate", "all", "ex", "if", "then", "else",
    "success", "no_success", "true", "false", "int", "bool", "S", "Self",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>->|&&|\|\||<>|<=|>=|[()\[\],;:!*=<>+\-~])
    """,
    re.VERBOSE,
)

_SECTIONS = ("signatures", "properties", "representation", "definitions", "proofs")


@dataclass(frozen=True)
class SourceFile:
    path: str
    text: str

    @classmethod
    def read(cls, path: Union[str, Path]) -> "SourceFile":
        data = Path(path).read_bytes()
        return cls(str(path), data.decode("utf-8", errors="strict"))


@dataclass(frozen=True)
class Token:
    kind: str  # ident | kw | int | op | eof
    text: str
    line: int
    column: int


class _Abort(Exception):
    """Statement-level syntax error; carries one diagnostic."""

    def __init__(self, diagnostic: Diagnostic):
        super().__init__(diagnostic.message)
        self.diagnostic = diagnostic


def tokenize(text: str, path: str = "<string>") -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            col = pos - line_start + 1
            raise ParseError([Diagnostic(
                "error", f"unexpected character {text[pos]!r}", Span(path, line, col))])
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and chunk in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token], path: str):
        self.toks = tokens
        self.pos = 0
        self.path = path

    # -- token plumbing
    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def span(self, tok: Optional[Token] = None) -> Span:
        tok = tok or self.tok
        return Span(self.path, tok.line, tok.column)

    def fail(self, message: str, tok: Optional[Token] = None):
        raise _Abort(Diagnostic("error", message, self.span(tok)))

    def at(self, text: str) -> bool:
        return self.tok.kind in ("kw", "op") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            got = self.tok.text or "end of input"
            self.fail(f"expected {text!r}, found {got!r}")
        tok = self.tok
        self.pos += 1
        return tok

    def ident(self) -> str:
        if self.tok.kind != "ident":
            got = self.tok.text or "end of input"
            self.fail(f"expected identifier, found {got!r}")
        name = self.tok.text
        self.pos += 1
        return name

    # -- types
    def type_atom(self, allow_parent: bool = False):
        t = self.tok
        if self.accept("int"):
            return A.INT
        if self.accept("bool"):
            return A.BOOL
        if self.accept("S"):
            return A.STATUS
        if self.accept("Self"):
            return A.SELF
        if allow_parent and self.accept("parent"):
            return None
        if self.accept("("):
            inner = self.type_()
            self.expect(")")
            return inner
        self.fail(f"expected a type, found {t.text or 'end of input'!r}")

    def type_(self) -> A.SemType:
        items = [self.type_atom()]
        while self.accept("*"):
            items.append(self.type_atom())
        return items[0] if len(items) == 1 else A.ProductType(tuple(items))

    def signature_type(self) -> tuple[tuple[A.SemType, ...], A.SemType]:
        parts = [self.type_()]
        while self.accept("->"):
            parts.append(self.type_())
        return tuple(parts[:-1]), parts[-1]

    def representation(self) -> A.RepExtension:
        start = self.tok
        items = [self.type_atom(allow_parent=True)]
        while self.accept("*"):
            items.append(self.type_atom(allow_parent=True))
        if None in items[:-1]:
            self.fail("'parent' must be the last component of a representation", start)
        if items[-1] is None:
            if len(items) == 1:
                return A.RepKeep()
            return A.RepExtend(tuple(items[:-1]))
        return A.RepDefine(items[0] if len(items) == 1 else A.ProductType(tuple(items)))

    # -- terms
    def term(self) -> A.Term:
        if self.at("all") or self.at("ex"):
            kind = self.tok.text
            self.pos += 1
            names = [self.ident()]
            while self.tok.kind == "ident":
                names.append(self.ident())
            self.expect(":")
            typ = self.type_()
            self.expect(",")
            return A.Quant(kind, tuple(names), typ, self.term())
        if self.accept("if"):
            cond = self.term()
            self.expect("then")
            then = self.term()
            self.expect("else")
            return A.If(cond, then, self.term())
        return self.implication()

    def _operand(self, level):
        if self.at("all") or self.at("ex") or self.at("if"):
            return self.term()
        return level()

    def implication(self) -> A.Term:
        left = self.disjunction()
        if self.accept("->"):
            return A.BinOp("->", left, self.term())
        return left

    def disjunction(self) -> A.Term:
        left = self.conjunction()
        while self.accept("||"):
            left = A.BinOp("||", left, self._operand(self.conjunction))
        return left

    def conjunction(self) -> A.Term:
        left = self.negation()
        while self.accept("&&"):
            left = A.BinOp("&&", left, self._operand(self.negation))
        return left

    def negation(self) -> A.Term:
        if self.accept("~"):
            return A.Not(self._operand(self.negation))
        return self.comparison()

    def comparison(self) -> A.Term:
        left = self.additive()
        if self.tok.kind == "op" and self.tok.text in A.COMPARE_OPS:
            op = self.tok.text
            self.pos += 1
            return A.BinOp(op, left, self._operand(self.additive))
        return left

    def additive(self) -> A.Term:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in A.ARITH_OPS:
            op = self.tok.text
            self.pos += 1
            left = A.BinOp(op, left, self.unary())
        return left

    def unary(self) -> A.Term:
        if self.accept("-"):
            if self.tok.kind == "int":
                value = int(self.tok.text)
                self.pos += 1
                return A.IntLit(-value)
            return A.Neg(self.unary())
        return self.atom()

    def args(self) -> tuple[A.Term, ...]:
        self.expect("(")
        out = []
        if not self.at(")"):
            out.append(self.term())
            while self.accept(","):
                out.append(self.term())
        self.expect(")")
        return tuple(out)

    def atom(self) -> A.Term:
        tok = self.tok
        if tok.kind == "int":
            self.pos += 1
            return A.IntLit(int(tok.text))
        if self.accept("true"):
            return A.BoolLit(True)
        if self.accept("false"):
            return A.BoolLit(False)
        if self.accept("success"):
            return A.StatusLit(A.Status.SUCCESS)
        if self.accept("no_success"):
            return A.StatusLit(A.Status.NO_SUCCESS)
        if self.accept("parent"):
            self.expect("!")
            func = self.ident()
            return A.ParentCall(func, self.args())
        if tok.kind == "ident":
            self.pos += 1
            if self.accept("!"):
                func = self.ident()
                return A.ParentCall(func, self.args(), tok.text)
            if self.at("("):
                return A.Call(tok.text, self.args())
            return A.Var(tok.text)
        if self.accept("("):
            first = self.term()
            if self.accept(","):
                items = [first, self.term()]
                while self.accept(","):
                    items.append(self.term())
                self.expect(")")
                return A.Tuple(tuple(items))
            self.expect(")")
            return first
        self.fail(f"expected an expression, found {tok.text or 'end of input'!r}")

    # -- statements
    def qualname(self) -> A.QualName:
        if self.accept("parent"):
            self.expect("!")
            return A.QualName("parent", self.ident())
        name = self.ident()
        if self.accept("!"):
            return A.QualName(name, self.ident())
        return A.QualName(None, name)

    def signature(self) -> A.Signature:
        self.expect("sig")
        name = self.ident()
        self.expect(":")
        params, result = self.signature_type()
        self.expect(";")
        return A.Signature(name, params, result)

    def property_(self) -> A.Property:
        self.expect("property")
        name = self.ident()
        if self.accept(":"):
            formula = self.term()
            self.expect(";")
            return A.Property(name, A.NewFormula(formula))
        self.expect("refines")
        base = self.qualname()
        premises, conclusions = [], []
        seen = set()
        while True:
            if self.at("premise"):
                tok = self.tok
                self.pos += 1
                label = self.ident()
                if label in seen:
                    self.fail(f"duplicate premise label {label!r}", tok)
                seen.add(label)
                self.expect(":")
                premises.append(A.Premise(label, self.term()))
            elif self.accept("conclusion"):
                self.expect(":")
                conclusions.append(self.term())
            else:
                break
        self.expect(";")
        return A.Property(name, A.Refinement(base, tuple(premises), tuple(conclusions)))

    def rep_statement(self) -> A.RepExtension:
        self.expect("representation")
        self.expect("=")
        rep = self.representation()
        self.expect(";")
        return rep

    def definition(self) -> A.FunctionDef:
        redefine = self.tok.text == "redefine"
        self.pos += 1
        name = self.ident()
        params: list[str] = []
        if self.accept("("):
            if not self.at(")"):
                params.append(self.ident())
                while self.accept(","):
                    params.append(self.ident())
            self.expect(")")
        if len(set(params)) != len(params):
            self.fail(f"duplicate parameter in definition of {name!r}")
        self.expect("=")
        body = self.term()
        self.expect(";")
        return A.FunctionDef(name, tuple(params), body, redefine)

    def proof(self) -> A.Proof:
        self.expect("proof")
        self.expect("of")
        of = self.ident()
        hints: list[A.Hint] = []
        while self.accept("by"):
            if self.accept("definition"):
                self.expect("of")
                hints.append(A.ByDefinition(self.ident()))
                while self.accept(","):
                    hints.append(A.ByDefinition(self.ident()))
            elif self.accept("property"):
                hints.append(A.ByProperty(self.qualname()))
                while self.accept(","):
                    hints.append(A.ByProperty(self.qualname()))
            elif self.accept("predicate"):
                hints.append(A.ByPredicate(self.qualname()))
                while self.accept(","):
                    hints.append(A.ByPredicate(self.qualname()))
            else:
                self.fail("expected 'definition', 'property' or 'predicate' after 'by'")
        self.expect(";")
        return A.Proof(of, tuple(hints))

    def skip_statement(self):
        while self.tok.kind != "eof" and not self.at(";"):
            self.pos += 1
        self.accept(";")

    def module(self) -> A.FeatureModule:
        diagnostics: list[Diagnostic] = []
        try:
            self.expect("module")
            name = self.ident()
            parent = self.ident() if self.accept("from") else None
            components: list[str] = []
            if self.accept("composing"):
                components.append(self.ident())
                while self.accept(","):
                    components.append(self.ident())
        except _Abort as exc:
            raise ParseError([exc.diagnostic]) from None

        parts: dict[str, list] = {s: [] for s in _SECTIONS}
        starts: dict[str, list[Token]] = {s: [] for s in _SECTIONS}
        reps: list[A.RepExtension] = []
        section = 0
        first_def: Optional[Token] = None
        dispatch = {
            "sig": (0, self.signature),
            "property": (1, self.property_),
            "representation": (2, self.rep_statement),
            "let": (3, self.definition),
            "redefine": (3, self.definition),
            "proof": (4, self.proof),
        }
        while self.tok.kind != "eof":
            tok = self.tok
            entry = dispatch.get(tok.text) if tok.kind == "kw" else None
            try:
                if entry is None:
                    self.fail(f"expected a statement, found {tok.text!r}")
                index, parse = entry
                if index < section:
                    self.fail(f"{_SECTIONS[index]} section after {_SECTIONS[section]} section")
                if index == 2 and reps:
                    self.fail("duplicate section: representation")
                section = index
                item = parse()
                if index == 2:
                    reps.append(item)
                else:
                    parts[_SECTIONS[index]].append(item)
                    starts[_SECTIONS[index]].append(tok)
                    if index == 3 and first_def is None:
                        first_def = tok
            except _Abort as exc:
                diagnostics.append(exc.diagnostic)
                self.skip_statement()

        if parts["definitions"] and not reps and first_def is not None:
            diagnostics.append(Diagnostic(
                "error",
                "functions are defined before a representation type is given",
                self.span(first_def)))
        for label, section, key in (
            ("signature", "signatures", lambda s: s.name),
            ("property", "properties", lambda p: p.name),
            ("definition", "definitions", lambda d: d.name),
            ("proof", "proofs", lambda p: p.of),
        ):
            seen: set[str] = set()
            for item, start in zip(parts[section], starts[section]):
                if key(item) in seen:
                    diagnostics.append(Diagnostic(
                        "error", f"duplicate {label} {key(item)!r}", self.span(start)))
                seen.add(key(item))
        if diagnostics:
            raise ParseError(diagnostics)
        return A.FeatureModule(
            name=name,
            parent=parent,
            signatures=tuple(parts["signatures"]),
            properties=tuple(parts["properties"]),
            representation=reps[0] if reps else None,
            definitions=tuple(parts["definitions"]),
            proofs=tuple(parts["proofs"]),
            components=tuple(components),
        )


def _source_text(src, path: str) -> tuple[str, str]:
    if isinstance(src, SourceFile):
        return src.text, src.path
    if isinstance(src, (bytes, bytearray)):
        try:
            return bytes(src).decode("utf-8"), path
        except UnicodeDecodeError as exc:
            raise ParseError([Diagnostic(
                "error", f"input is not valid UTF-8 ({exc.reason})", Span(path, 1, 1))]) from None
    return src, path


def parse_module(src: Union[SourceFile, str, bytes], path: str = "<string>") -> A.FeatureModule:
    """Parse one feature module; raises ParseError carrying every diagnostic."""
    text, path = _source_text(src, path)
    parser = _Parser(tokenize(text, path), path)
    return parser.module()


def load_module(path: Union[str, Path]) -> A.FeatureModule:
    try:
        return parse_module(SourceFile.read(path))
    except UnicodeDecodeError as exc:
        raise ParseError([Diagnostic(
            "error", f"input is not valid UTF-8 ({exc.reason})", Span(str(path), 1, 1))]) from None


def parse_formula(text: str, path: str = "<formula>") -> A.Term:
    parser = _Parser(tokenize(text, path), path)
    try:
        term = parser.term()
        if parser.tok.kind != "eof":
            parser.fail(f"unexpected {parser.tok.text!r} after formula")
    except _Abort as exc:
        raise ParseError([exc.diagnostic]) from None
    return term


def parse_type(text: str) -> A.SemType:
    parser = _Parser(tokenize(text), "<type>")
    try:
        t = parser.type_()
        if parser.tok.kind != "eof":
            parser.fail(f"unexpected {parser.tok.text!r} after type")
    except _Abort as exc:
        raise ParseError([exc.diagnostic]) from None
    return t


# -- printing -----------------------------------------------------------------

_LEVEL = {"->": 1, "||": 2, "&&": 3, "+": 6, "-": 6}
for _op in A.COMPARE_OPS:
    _LEVEL[_op] = 5


def _level(t: A.Term) -> int:
    if isinstance(t, (A.Quant, A.If)):
        return 0
    if isinstance(t, A.BinOp):
        return _LEVEL[t.op]
    if isinstance(t, A.Not):
        return 4
    if isinstance(t, A.Neg) or (isinstance(t, A.IntLit) and t.value < 0):
        return 7
    if isinstance(t, A.Convert):
        return _level(t.arg)
    return 8


def print_type(t: A.SemType) -> str:
    return str(t)


def print_term(t: A.Term, ctx: int = 0) -> str:
    text = _print(t)
    return f"({text})" if _level(t) < ctx else text


def _print(t: A.Term) -> str:
    if isinstance(t, A.IntLit):
        return str(t.value)
    if isinstance(t, A.BoolLit):
        return "true" if t.value else "false"
    if isinstance(t, A.StatusLit):
        return t.value.value
    if isinstance(t, A.Var):
        return t.name
    if isinstance(t, A.Call):
        return f"{t.func}({', '.join(print_term(a) for a in t.args)})"
    if isinstance(t, A.ParentCall):
        target = t.target or "parent"
        return f"{target}!{t.func}({', '.join(print_term(a) for a in t.args)})"
    if isinstance(t, A.Tuple):
        return f"({', '.join(print_term(a) for a in t.items)})"
    if isinstance(t, A.Convert):
        return _print(t.arg)
    if isinstance(t, A.Neg):
        inner = print_term(t.arg, 7)
        if isinstance(t.arg, A.IntLit) or inner.startswith("-"):
            inner = f"({inner})" if not inner.startswith("(") else inner
        return f"-{inner}"
    if isinstance(t, A.Not):
        return f"~{print_term(t.arg, 4)}"
    if isinstance(t, A.If):
        return f"if {print_term(t.cond)} then {print_term(t.then)} else {print_term(t.orelse)}"
    if isinstance(t, A.Quant):
        return f"{t.kind} {' '.join(t.names)} : {t.type}, {print_term(t.body)}"
    if isinstance(t, A.BinOp):
        lvl = _LEVEL[t.op]
        if t.op == "->":
            left, right = print_term(t.left, 2), print_term(t.right, 1)
        elif t.op in A.COMPARE_OPS:
            left, right = print_term(t.left, 6), print_term(t.right, 6)
        else:
            left, right = print_term(t.left, lvl), print_term(t.right, lvl + 1)
        if right.startswith("-"):
            right = f"({right})"
        return f"{left} {t.op} {right}"
    raise TypeError(f"cannot print {t!r}")


def _print_hints(hints: tuple[A.Hint, ...]) -> str:
    groups: list[tuple[type, list[str]]] = []
    for h in hints:
        text = h.name if isinstance(h, A.ByDefinition) else str(h.name)
        if groups and groups[-1][0] is type(h):
            groups[-1][1].append(text)
        else:
            groups.append((type(h), [text]))
    words = {A.ByDefinition: "by definition of", A.ByProperty: "by property",
             A.ByPredicate: "by predicate"}
    return " ".join(f"{words[kind]} {', '.join(names)}" for kind, names in groups)


def _print_rep(rep: A.RepExtension) -> str:
    if isinstance(rep, A.RepKeep):
        return "parent"
    if isinstance(rep, A.RepExtend):
        parts = [f"({c})" if isinstance(c, A.ProductType) else str(c) for c in rep.components]
        return " * ".join(parts + ["parent"])
    return str(rep.type)


def print_signature(s: A.Signature) -> str:
    return " -> ".join(str(t) for t in (*s.params, s.result))


def print_module(m: A.FeatureModule) -> str:
    """Canonical concrete syntax; ``parse_module(print_module(m)) == m``."""
    header = f"module {m.name}"
    if m.parent:
        header += f" from {m.parent}"
    if m.components:
        header += f" composing {', '.join(m.components)}"
    lines = [header, "", "-- signatures"]
    for s in m.signatures:
        lines.append(f"sig {s.name} : {print_signature(s)};")
    lines += ["", "-- properties"]
    for p in m.properties:
        if isinstance(p.body, A.NewFormula):
            lines.append(f"property {p.name} :")
            lines.append(f"  {print_term(p.body.formula)};")
            continue
        lines.append(f"property {p.name} refines {p.body.base}")
        for prem in p.body.premises:
            lines.append(f"  premise {prem.label} : {print_term(prem.formula)}")
        for concl in p.body.conclusions:
            lines.append(f"  conclusion : {print_term(concl)}")
        lines[-1] += ";"
    lines += ["", "-- representation"]
    if m.representation is not None:
        lines.append(f"representation = {_print_rep(m.representation)};")
    lines += ["", "-- definitions"]
    for d in m.definitions:
        keyword = "redefine" if d.redefine else "let"
        params = f"({', '.join(d.params)})" if d.params else ""
        lines.append(f"{keyword} {d.name}{params} =")
        lines.append(f"  {print_term(d.body)};")
    lines += ["", "-- proofs"]
    for pr in m.proofs:
        hints = _print_hints(pr.hints)
        lines.append(f"proof of {pr.of}{' ' + hints if hints else ''};")
    return "\n".join(lines) + "\n"
