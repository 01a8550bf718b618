"""FoCaLiZe emission: three species per module, plus a structural linter.

For a module ``M`` with parent ``P``:

* ``Inh_M`` inherits ``Inh_P`` and holds the new signatures and one
  ``logical let l_cons_p`` per property, closed over the property's
  outermost universals;
* ``Reu_M`` inherits ``Inh_M`` and states each property as an application
  of its ``l_cons`` predicate;
* ``Imp_M`` inherits ``Reu_M``, takes the parent collection as parameter
  ``P is Reu_P`` and carries the representation, the code and the proofs.
"""

from __future__ import annotations

import os
import re
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from . import ast as A
from .errors import DuplicateName, GfmlError, UnemittableProof
from .evaluator import format_value
from .resolve import split_universals
from .typecheck import AncestorSelf, TypedModule

INDENT = "  "
STATUS_TYPE = "type status =\n  | Success\n  | No_success\n;;"
FOCALIZEC_ENV = "GFMLC_FOCALIZEC"


def inh(m: str) -> str:
    return f"Inh_{m}"


def reu(m: str) -> str:
    return f"Reu_{m}"


def imp(m: str) -> str:
    return f"Imp_{m}"


def coll(m: str) -> str:
    return f"C_{m}"


def l_cons(p: str) -> str:
    return f"l_cons_{p}"


def file_name(m: str) -> str:
    return f"{m.lower()}.fcl"


@dataclass(frozen=True)
class SpeciesText:
    name: str
    parameters: tuple[tuple[str, str], ...] = ()
    inherits: tuple[str, ...] = ()
    items: tuple[str, ...] = ()

    def render(self) -> str:
        head = f"species {self.name}"
        if self.parameters:
            head += "(" + ", ".join(f"{n} is {s}" for n, s in self.parameters) + ")"
        lines = [head + " ="]
        lines += [f"{INDENT}inherit {s};" for s in self.inherits]
        lines += [INDENT + item for item in self.items]
        lines.append("end;;")
        return "\n".join(lines)


@dataclass(frozen=True)
class SpeciesTriple:
    inh: SpeciesText
    reu: SpeciesText
    imp: SpeciesText

    def render(self) -> str:
        return "\n\n".join(s.render() for s in (self.inh, self.reu, self.imp))


# -- terms ---------------------------------------------------------------------


def render_type(t, parent: Optional[str] = None) -> str:
    if isinstance(t, A.IntType):
        return "int"
    if isinstance(t, A.BoolType):
        return "bool"
    if isinstance(t, A.StatusType):
        return "status"
    if isinstance(t, (A.SelfType, AncestorSelf)):
        return "Self"
    if isinstance(t, A.ProductType):
        return "(" + " * ".join(render_type(c, parent) for c in t.items) + ")"
    raise TypeError(f"cannot render type {t!r}")


class _Renderer:
    def __init__(self, typed: TypedModule, logic: bool):
        self.typed = typed
        self.logic = logic
        self.parent = typed.module.parent

    def target(self, t: A.ParentCall) -> str:
        level = self.typed.resolved.parent_target(t.target)
        if level == self.parent:
            return level
        # an older ancestor is reachable through the parent collection only
        # when nothing in between redefines the function
        names = [x.name for x in self.typed.chain]
        for between in self.typed.chain[names.index(level) + 1:-1]:
            if between.module.definition(t.func) is not None:
                raise UnemittableProof(
                    f"{level}!{t.func} is hidden by {between.name}'s redefinition")
        return self.parent

    def __call__(self, t: A.Term, top: bool = True) -> str:
        r = self.render(t)
        if top and isinstance(t, (A.BinOp, A.If, A.Quant)) and _balanced_outer(r):
            return r[1:-1]
        return r

    def render(self, t: A.Term) -> str:
        if isinstance(t, A.IntLit):
            return f"({t.value})" if t.value < 0 else str(t.value)
        if isinstance(t, A.BoolLit):
            return "true" if t.value else "false"
        if isinstance(t, A.StatusLit):
            return "Success" if t.value is A.Status.SUCCESS else "No_success"
        if isinstance(t, A.Var):
            return t.name
        if isinstance(t, A.Call):
            if t.func in A.BUILTINS and len(t.args) == 1:
                return ("fst" if t.func == "first" else "snd") + f"({self(t.args[0])})"
            return f"{t.func}({', '.join(self(a) for a in t.args)})"
        if isinstance(t, A.ParentCall):
            return f"{self.target(t)}!{t.func}({', '.join(self(a) for a in t.args)})"
        if isinstance(t, A.Convert):
            out = self(t.arg)
            for index, arity in t.path:
                if arity == 2:
                    out = ("fst" if index == 0 else "snd") + f"({out})"
                else:
                    pattern = ", ".join("p" if i == index else "_" for i in range(arity))
                    out = f"(match {out} with ({pattern}) -> p)"
            return out
        if isinstance(t, A.BinOp):
            op = t.op
            if self.logic:
                op = {"&&": "/\\", "||": "\\/"}.get(op, op)
            return f"({self.render(t.left)} {op} {self.render(t.right)})"
        if isinstance(t, A.Not):
            return ("~ " if self.logic else "~~ ") + self.render(t.arg)
        if isinstance(t, A.Neg):
            return f"(0 - {self.render(t.arg)})"
        if isinstance(t, A.Tuple):
            return "(" + ", ".join(self(a) for a in t.items) + ")"
        if isinstance(t, A.If):
            return f"(if {self(t.cond)} then {self(t.then)} else {self(t.orelse)})"
        if isinstance(t, A.Quant):
            return f"({t.kind} {' '.join(t.names)} : {render_type(t.type)}, {self(t.body)})"
        raise TypeError(f"cannot render {t!r}")


def _balanced_outer(s: str) -> bool:
    depth = 0
    for i, ch in enumerate(s):
        depth += ch == "("
        depth -= ch == ")"
        if depth == 0 and i < len(s) - 1:
            return False
    return True


# -- modules -------------------------------------------------------------------


def _lifted_params(formula: A.Term):
    quants, body = split_universals(formula)
    params = [(n, q.type) for q in quants for n in q.names]
    return quants, params, body


def _proof_item(typed: TypedModule, prop: str, hints, base) -> list[str]:
    r = typed.resolved
    parent = typed.module.parent
    defs: list[str] = []
    props: list[str] = []
    foreign: list[str] = []

    def add(lst, x):
        if x not in lst:
            lst.append(x)

    chain_names = {m.name for m in r.chain}
    for h, owner in hints:
        if isinstance(h, A.ByDefinition):
            add(defs, h.name)
        elif owner not in chain_names:
            add(foreign, f"{h.name}")
        elif isinstance(h, A.ByPredicate):
            add(defs, h.name.name)
        elif owner == typed.name:
            add(props, h.name.name)
        elif owner == parent:
            add(props, f"{parent}!{h.name.name}")
        else:
            raise UnemittableProof(
                f"proof of {prop} cites {h.name}, which is not visible from {imp(typed.name)}")
    add(defs, l_cons(prop))
    if base is not None:
        owner, name = base
        if owner == parent:
            add(props, f"{parent}!{name}")
        add(defs, l_cons(name))
    parts = []
    if defs:
        parts.append("definition of " + ", ".join(defs))
    if props:
        parts.append("property " + ", ".join(props))
    items = []
    if foreign:
        items.append(f"(* component hints: {', '.join(foreign)} *)")
    items.append(f"proof of {prop} = by {' '.join(parts)};")
    return items


def emit_module(typed: TypedModule, binding: Optional[Mapping[str, object]] = None
                ) -> SpeciesTriple:
    """Three species for one typed module (its ancestors are its parameters)."""
    m = typed.module
    r = typed.resolved
    parent = m.parent
    logic = _Renderer(typed, logic=True)
    code = _Renderer(typed, logic=False)
    binding = dict(binding or {})
    formulas = dict(typed.properties)

    for p in m.properties:
        if p.name.startswith("l_cons_"):
            raise DuplicateName(f"property name {p.name!r} uses the reserved prefix l_cons_")

    # Inh_
    inh_items = []
    for s in m.signatures:
        if s.name in r.inherited:
            continue
        ty = " -> ".join(render_type(t) for t in (*s.params, s.result))
        inh_items.append(f"signature {s.name} : {ty};")
    statements = []
    for p in m.properties:
        quants, params, body = _lifted_params(formulas[p.name])
        args = ", ".join(f"{n} in {render_type(t)}" for n, t in params)
        head = f"logical let {l_cons(p.name)}" + (f"({args})" if params else "")
        inh_items.append(f"{head} = {logic(body)};")
        prefix = "".join(f"{q.kind} {' '.join(q.names)} : {render_type(q.type)}, " for q in quants)
        call = l_cons(p.name) + (f"({', '.join(n for n, _ in params)})" if params else "")
        statements.append(f"property {p.name} : {prefix}{call};")
    inh_species = SpeciesText(inh(m.name), (), (inh(parent),) if parent else (), tuple(inh_items))
    reu_species = SpeciesText(reu(m.name), (), (inh(m.name),), tuple(statements))

    # Imp_
    imp_items = []
    rep = m.representation
    if parent is None:
        imp_items.append(f"representation = {render_type(rep.type)};")
    elif isinstance(rep, A.RepExtend):
        comps = " * ".join(render_type(c) for c in rep.components)
        imp_items.append(f"representation = {comps} * {parent};")
    else:
        imp_items.append(f"representation = {parent};")
    for name, d in typed.definitions.items():
        sig = r.signatures[name][1]
        imp_items.append(_let(name, d.params, sig, code(d.body)))
    for name in typed.lifted:
        sig = r.signatures[name][1]
        if name not in r.implementations and not (sig.is_constant and name in binding):
            continue
        params = [f"x{i}" for i in range(len(sig.params))]
        conv = typed.conversion(parent)
        args = []
        for p, t in zip(params, sig.params):
            term: A.Term = A.Var(p)
            if isinstance(t, A.SelfType) and conv:
                term = A.Convert(term, conv)
            args.append(code(term))
        call = f"{parent}!{name}" + (f"({', '.join(args)})" if args else "")
        imp_items.append(_let(name, tuple(zip(params, sig.params)), sig, call))
    for name, (owner, sig) in r.signatures.items():
        if sig.is_constant and name not in r.implementations and name in binding \
                and owner == m.name:
            imp_items.append(f"let {name} in {render_type(sig.result)} = {format_value(binding[name])};")
    for p in m.properties:
        pr = m.proof(p.name)
        if pr is None:
            continue
        imp_items.extend(_proof_item(typed, p.name, r.hints.get(p.name, ()), r.bases.get(p.name)))
    params = ((parent, reu(parent)),) if parent else ()
    imp_species = SpeciesText(imp(m.name), params, (reu(m.name),), tuple(imp_items))
    return SpeciesTriple(inh_species, reu_species, imp_species)


def _let(name: str, params, sig: A.Signature, body: str) -> str:
    result = render_type(sig.result)
    if not params:
        return f"let {name} in {result} = {body};"
    args = ", ".join(f"{n} in {render_type(t)}" for (n, _), t in zip(params, sig.params))
    return f"let {name}({args}) in {result} = {body};"


def collection_stanza(typed: TypedModule) -> str:
    m = typed.module
    arg = f"({coll(m.parent)})" if m.parent else ""
    return f"collection {coll(m.name)} =\n{INDENT}implement {imp(m.name)}{arg};\nend;;"


def emit_file(typed: TypedModule, binding=None) -> str:
    m = typed.module
    parts = [f"(* Generated by gfmlc from module {m.name}. *)", 'use "basics";;\nopen "basics";;']
    for anc in typed.ancestors:
        base = file_name(anc.name)[:-4]
        parts.append(f'use "{base}";;\nopen "{base}";;')
    if m.parent is None:
        parts.append(STATUS_TYPE)
    parts.append(emit_module(typed, binding).render())
    parts.append(collection_stanza(typed))
    return "\n\n".join(parts) + "\n"


def emit_program(product: TypedModule, binding=None) -> list[tuple[str, str]]:
    """One file per level of the product chain, root first."""
    names = [file_name(t.name) for t in product.chain]
    if len(set(names)) != len(names):
        raise DuplicateName(f"modules {', '.join(t.name for t in product.chain)} "
                            "map to clashing file names")
    return [(n, emit_file(t, binding)) for n, t in zip(names, product.chain)]


def write_program(files: Sequence[tuple[str, str]], out: Path) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in files:
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written


def run_focalizec(paths: Sequence[Path]) -> list[str]:
    """Compile with a real FoCaLiZe compiler when ``GFMLC_FOCALIZEC`` is set."""
    exe = os.environ.get(FOCALIZEC_ENV)
    if not exe:
        return []
    problems = []
    for p in paths:
        proc = subprocess.run([exe, p.name], cwd=p.parent, capture_output=True, text=True)
        if proc.returncode != 0:
            problems.append(f"{p.name}: {exe} exited with {proc.returncode}: {proc.stderr.strip()}")
    return problems


# -- structural linter ---------------------------------------------------------


@dataclass
class ParsedSpecies:
    name: str
    parameters: list[tuple[str, str]] = field(default_factory=list)
    inherits: list[str] = field(default_factory=list)
    items: list[str] = field(default_factory=list)


@dataclass
class ParsedCollection:
    name: str
    species: str
    args: list[str]


_SPECIES = re.compile(r"species (\w+)(?:\((.*)\))? =$")
_COLLECTION = re.compile(r"collection (\w+) =$")
_IMPLEMENT = re.compile(r"implement (\w+)(?:\((.*)\))?;$")
_QUALIFIED = re.compile(r"\b(\w+)!(\w+)")
_ITEM_NAME = re.compile(
    r"(?:signature|property|logical let|let|proof of) (\w+)")


def parse_fcl(text: str) -> tuple[list[ParsedSpecies], list[ParsedCollection], list[str]]:
    """Mini-parser for the emitted subset; returns species, collections and
    the names of declared types."""
    species: list[ParsedSpecies] = []
    collections: list[ParsedCollection] = []
    types: list[str] = []
    current: Optional[ParsedSpecies] = None
    pending: Optional[str] = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or (stripped.startswith("(*") and stripped.endswith("*)")):
            continue
        if current is not None or pending is not None:
            if stripped == "end;;":
                current, pending = None, None
                continue
            if not line.startswith(INDENT) or line.startswith(INDENT + " "):
                raise GfmlError(f"line {lineno}: item not indented by two spaces")
            if pending is not None:
                m = _IMPLEMENT.match(stripped)
                if not m:
                    raise GfmlError(f"line {lineno}: expected an implement clause")
                args = [a.strip() for a in (m.group(2) or "").split(",") if a.strip()]
                collections.append(ParsedCollection(pending, m.group(1), args))
                continue
            if stripped.startswith("inherit "):
                current.inherits.append(stripped[len("inherit "):].rstrip(";"))
            else:
                if not stripped.endswith(";"):
                    raise GfmlError(f"line {lineno}: item does not end with ';'")
                current.items.append(stripped)
            continue
        m = _SPECIES.match(stripped)
        if m:
            params = []
            for part in (m.group(2) or "").split(","):
                if part.strip():
                    n, _, s = part.strip().partition(" is ")
                    params.append((n.strip(), s.strip()))
            current = ParsedSpecies(m.group(1), params)
            species.append(current)
            continue
        m = _COLLECTION.match(stripped)
        if m:
            pending = m.group(1)
            continue
        if stripped.startswith("type "):
            types.append(stripped.split()[1])
            continue
        if stripped.startswith(("use ", "open ", "|", ";;")):
            continue
        raise GfmlError(f"line {lineno}: unexpected text {stripped!r}")
    if current is not None or pending is not None:
        raise GfmlError("unterminated species or collection")
    return species, collections, types


def _item_names(sp: ParsedSpecies, kind: str) -> list[str]:
    out = []
    for item in sp.items:
        if item.startswith(kind + " "):
            m = _ITEM_NAME.match(item)
            if m:
                out.append(m.group(1))
    return out


def lint_program(files: Sequence[tuple[str, str]]) -> list[str]:
    """Structural problems of an emitted program; empty when it is well formed."""
    problems: list[str] = []
    all_species: dict[str, ParsedSpecies] = {}
    collections: dict[str, ParsedCollection] = {}
    status_files = []
    for fname, text in files:
        try:
            species, colls, types = parse_fcl(text)
        except GfmlError as exc:
            problems.append(f"{fname}: {exc.message}")
            continue
        if "status" in types:
            status_files.append(fname)
        for sp in species:
            if sp.name in all_species:
                problems.append(f"{fname}: species {sp.name} defined twice")
            all_species[sp.name] = sp
        for c in colls:
            if c.species not in all_species:
                problems.append(f"{fname}: collection {c.name} implements unknown {c.species}")
            for a in c.args:
                if a not in collections:
                    problems.append(f"{fname}: collection {c.name} uses {a} before it exists")
            collections[c.name] = c
    if len(status_files) != 1:
        problems.append(f"type status declared in {len(status_files)} files, expected 1")

    modules = []
    for name in all_species:
        for prefix in ("Inh_", "Reu_", "Imp_"):
            if name.startswith(prefix) and name[4:] not in modules:
                modules.append(name[4:])
    for m in modules:
        triple = [all_species.get(f(m)) for f in (inh, reu, imp)]
        if any(s is None for s in triple):
            problems.append(f"module {m}: expected exactly Inh_/Reu_/Imp_ species")
            continue
        i, r, p = triple
        problems += _lint_module(m, i, r, p, all_species)
    return problems


def _lint_module(m, i: ParsedSpecies, r: ParsedSpecies, p: ParsedSpecies,
                 all_species: Mapping[str, ParsedSpecies]) -> list[str]:
    problems = []
    parents = [s[4:] for s in i.inherits if s.startswith("Inh_")]
    if len(parents) > 1 or len(parents) != len(i.inherits):
        problems.append(f"{i.name}: may only inherit one Inh_ species")
    parent = parents[0] if parents else None
    if r.inherits != [inh(m)]:
        problems.append(f"{r.name}: must inherit exactly {inh(m)}")
    if p.inherits != [reu(m)]:
        problems.append(f"{p.name}: must inherit exactly {reu(m)}")
    if parent is None:
        if p.parameters:
            problems.append(f"{p.name}: a root module takes no parameter")
    elif p.parameters != [(parent, reu(parent))]:
        problems.append(f"{p.name}: expected the single parameter {parent} is {reu(parent)}")

    preds = set(_item_names(i, "logical let"))
    for item in r.items:
        if not item.startswith("property "):
            problems.append(f"{r.name}: unexpected item {item!r}")
            continue
        name = _ITEM_NAME.match(item).group(1)
        if l_cons(name) not in preds or not re.search(rf"\b{l_cons(name)}\b", item):
            problems.append(f"{r.name}: property {name} does not apply {l_cons(name)} from {i.name}")

    for sp in (i, r, p):
        for item in sp.items:
            for qual, _ in _QUALIFIED.findall(item):
                if qual != parent:
                    problems.append(f"{sp.name}: {qual}! is not the parent parameter")

    seen_rep = False
    for item in p.items:
        if item.startswith("representation"):
            seen_rep = True
        elif item.startswith("let ") and not seen_rep:
            problems.append(f"{p.name}: definition before the representation")

    # names visible from Imp_
    visible_defs, visible_preds = set(), set()
    sp: Optional[ParsedSpecies] = i
    while sp is not None:
        visible_defs.update(_item_names(sp, "signature"))
        visible_preds.update(_item_names(sp, "logical let"))
        up = [s for s in sp.inherits if s.startswith("Inh_")]
        sp = all_species.get(up[0]) if up else None
    visible_defs.update(_item_names(p, "let"))
    own_props = set(_item_names(r, "property"))
    parent_props = set(_item_names(all_species[reu(parent)], "property")) if parent else set()
    for item in p.items:
        if not item.startswith("proof of "):
            continue
        name = _ITEM_NAME.match(item).group(1)
        if name not in own_props:
            problems.append(f"{p.name}: proof of unknown property {name}")
        for clause in re.findall(r"(definition of|property) ([^;]*?)(?= definition of| property|;)", item):
            kind, names = clause
            for n in (x.strip() for x in names.split(",")):
                if kind == "definition of":
                    if n not in visible_defs and n not in visible_preds:
                        problems.append(f"{p.name}: proof of {name} cites invisible {n}")
                elif "!" in n:
                    q, prop = n.split("!", 1)
                    if q != parent or prop not in parent_props:
                        problems.append(f"{p.name}: proof of {name} cites invisible {n}")
                elif n not in own_props:
                    problems.append(f"{p.name}: proof of {name} cites invisible {n}")
    return problems
