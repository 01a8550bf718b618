"""Strong typing of definitions and property formulas.

``Self`` is opaque inside formulas and concrete (the unfolded representation)
inside function bodies.  Arguments of the module's own ``Self`` type passed to
an ancestor's function are converted by inserting the projection chain that
leads from the module's representation down to the ancestor's.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from . import ast as A
from .errors import (
    MissingRootDefine, ParentCallArity, ProjectionOnNonProduct,
    RepresentationError, TypeMismatch, UnboundVariable,
)
from .resolve import ResolvedModule, effective_properties, product_properties, resolve


@dataclass(frozen=True)
class AncestorSelf:
    """Opaque entity type of an ancestor, as seen from a descendant's formulas."""

    module: str

    def __str__(self) -> str:
        return f"{self.module}!Self"


@dataclass(frozen=True)
class TypedDef:
    name: str
    params: tuple[tuple[str, A.SemType], ...]
    result: A.SemType
    body: A.Term
    redefine: bool


@dataclass(frozen=True)
class TypedModule:
    resolved: ResolvedModule
    representation: Optional[A.SemType]
    definitions: Mapping[str, TypedDef]
    properties: tuple[tuple[str, A.Term], ...]
    obligations: tuple[tuple[str, A.Term], ...]
    lifted: tuple[str, ...]
    ancestors: tuple["TypedModule", ...] = field(default=())

    @property
    def name(self) -> str:
        return self.resolved.name

    @property
    def module(self) -> A.FeatureModule:
        return self.resolved.module

    @property
    def chain(self) -> tuple["TypedModule", ...]:
        return self.ancestors + (self,)

    def level(self, name: str) -> "TypedModule":
        for t in self.chain:
            if t.name == name:
                return t
        raise KeyError(name)

    def conversion(self, target: str) -> tuple[tuple[int, int], ...]:
        modules = [t.module for t in self.chain]
        index = [m.name for m in modules].index(target)
        return conversion_path(modules, len(modules) - 1, index)


def _rep_step(m: A.FeatureModule, parent_rep: Optional[A.SemType]) -> Optional[A.SemType]:
    rep = m.representation
    if rep is None or isinstance(rep, A.RepKeep):
        if rep is not None and m.parent is None:
            raise MissingRootDefine(f"root module {m.name!r} cannot keep a parent representation")
        return parent_rep
    if isinstance(rep, A.RepDefine):
        return rep.type
    if parent_rep is None:
        raise MissingRootDefine(
            f"module {m.name!r} extends a representation that no ancestor defines")
    return A.ProductType(tuple(rep.components) + (parent_rep,))


def representations(chain: Sequence[A.FeatureModule]) -> list[Optional[A.SemType]]:
    """Unfolded representation at every level of the chain (None = abstract)."""
    out: list[Optional[A.SemType]] = []
    rep = None
    for m in chain:
        rep = _rep_step(m, rep)
        out.append(rep)
    return out


def unfold_representation(chain: Sequence[A.FeatureModule]) -> A.SemType:
    """Concrete representation of the last module, folding extensions root to leaf."""
    reps = representations(chain)
    if not reps or reps[-1] is None:
        raise MissingRootDefine("no module in the chain defines a representation")
    return reps[-1]


def conversion_path(chain: Sequence[A.FeatureModule], source: int, target: int):
    """Projection steps from level ``source`` down to level ``target``."""
    steps = []
    for k in range(source, target, -1):
        rep = chain[k].representation
        if isinstance(rep, A.RepExtend):
            n = len(rep.components)
            steps.append((n, n + 1))
        elif isinstance(rep, A.RepDefine):
            raise RepresentationError(
                f"module {chain[k].name!r} replaces its parent's representation")
    return tuple(steps)


class _Checker:
    def __init__(self, resolved: ResolvedModule, reps: list[Optional[A.SemType]]):
        self.r = resolved
        self.chain = list(resolved.chain)
        self.names = [m.name for m in self.chain]
        self.reps = dict(zip(self.names, reps))
        self.formula = False

    def self_type(self, level: str):
        if self.formula:
            return A.SELF if level == self.r.name else AncestorSelf(level)
        rep = self.reps[level]
        if rep is None:
            raise MissingRootDefine(f"module {level!r} has no representation")
        return rep

    def at_level(self, t: A.SemType, level: str):
        if isinstance(t, A.SelfType):
            return self.self_type(level)
        if isinstance(t, A.ProductType):
            return A.ProductType(tuple(self.at_level(c, level) for c in t.items))
        return t

    def expect(self, got, want, what: str):
        if got != want:
            raise TypeMismatch(f"{what}: expected {want}, found {got}")

    def infer(self, t: A.Term, env: dict) -> tuple[A.Term, object]:
        if isinstance(t, A.IntLit):
            return t, A.INT
        if isinstance(t, A.BoolLit):
            return t, A.BOOL
        if isinstance(t, A.StatusLit):
            return t, A.STATUS
        if isinstance(t, A.Var):
            if t.name in env:
                return t, env[t.name]
            entry = self.r.signatures.get(t.name)
            if entry is None:
                raise UnboundVariable(f"unbound identifier {t.name!r}")
            if not entry[1].is_constant:
                raise TypeMismatch(f"function {t.name!r} used without arguments")
            return t, self.at_level(entry[1].result, self.r.name)
        if isinstance(t, A.Call):
            if t.func in A.BUILTINS and t.func not in self.r.signatures:
                return self.projection(t, env)
            sig = self.r.signatures[t.func][1]
            if len(t.args) != len(sig.params):
                raise TypeMismatch(
                    f"{t.func!r} expects {len(sig.params)} argument(s), got {len(t.args)}")
            args = []
            for i, (a, p) in enumerate(zip(t.args, sig.params)):
                ta, ty = self.infer(a, env)
                self.expect(ty, self.at_level(p, self.r.name), f"argument {i + 1} of {t.func}")
                args.append(ta)
            return A.Call(t.func, tuple(args)), self.at_level(sig.result, self.r.name)
        if isinstance(t, A.ParentCall):
            return self.parent_call(t, env)
        if isinstance(t, A.BinOp):
            tl, lt = self.infer(t.left, env)
            tr, rt = self.infer(t.right, env)
            if t.op in A.ARITH_OPS:
                self.expect(lt, A.INT, f"left operand of {t.op}")
                self.expect(rt, A.INT, f"right operand of {t.op}")
                result = A.INT
            elif t.op in ("=", "<>"):
                self.expect(rt, lt, f"operands of {t.op}")
                result = A.BOOL
            elif t.op in A.COMPARE_OPS:
                self.expect(lt, A.INT, f"left operand of {t.op}")
                self.expect(rt, A.INT, f"right operand of {t.op}")
                result = A.BOOL
            else:
                self.expect(lt, A.BOOL, f"left operand of {t.op}")
                self.expect(rt, A.BOOL, f"right operand of {t.op}")
                result = A.BOOL
            return A.BinOp(t.op, tl, tr), result
        if isinstance(t, A.Not):
            ta, ty = self.infer(t.arg, env)
            self.expect(ty, A.BOOL, "operand of ~")
            return A.Not(ta), A.BOOL
        if isinstance(t, A.Neg):
            ta, ty = self.infer(t.arg, env)
            self.expect(ty, A.INT, "operand of unary -")
            return A.Neg(ta), A.INT
        if isinstance(t, A.Tuple):
            typed = [self.infer(a, env) for a in t.items]
            return A.Tuple(tuple(x for x, _ in typed)), A.ProductType(tuple(y for _, y in typed))
        if isinstance(t, A.If):
            tc, ct = self.infer(t.cond, env)
            self.expect(ct, A.BOOL, "if condition")
            tt, tty = self.infer(t.then, env)
            te, ety = self.infer(t.orelse, env)
            self.expect(ety, tty, "else branch")
            return A.If(tc, tt, te), tty
        if isinstance(t, A.Quant):
            if not self.formula:
                raise TypeMismatch("quantifiers are only allowed in properties")
            qt = self.at_level(t.type, self.r.name)
            inner = dict(env)
            for n in t.names:
                inner[n] = qt
            tb, bt = self.infer(t.body, inner)
            self.expect(bt, A.BOOL, "quantifier body")
            return A.Quant(t.kind, t.names, t.type, tb), A.BOOL
        if isinstance(t, A.Convert):
            return self.infer(t.arg, env)
        raise TypeError(f"unknown term {t!r}")

    def projection(self, t: A.Call, env):
        if len(t.args) != 1:
            raise TypeMismatch(f"{t.func} takes one argument")
        ta, ty = self.infer(t.args[0], env)
        if not isinstance(ty, A.ProductType):
            raise ProjectionOnNonProduct(f"{t.func} applied to a value of type {ty}")
        if len(ty.items) != 2:
            raise TypeMismatch(f"{t.func} applied to a {len(ty.items)}-tuple")
        return A.Call(t.func, (ta,)), ty.items[A.BUILTINS[t.func]]

    def parent_call(self, t: A.ParentCall, env):
        level = self.r.parent_target(t.target)
        idx = self.names.index(level)
        sig = None
        for m in self.chain[: idx + 1]:
            sig = m.signature(t.func) or sig
            if sig is not None:
                break
        if sig is None:
            raise TypeMismatch(f"{level} has no function {t.func!r}")
        if len(t.args) != len(sig.params):
            raise ParentCallArity(
                f"{level}!{t.func} expects {len(sig.params)} argument(s), got {len(t.args)}")
        own_self = self.self_type(self.r.name)
        path = conversion_path(self.chain, len(self.chain) - 1, idx)
        args = []
        for i, (a, p) in enumerate(zip(t.args, sig.params)):
            ta, ty = self.infer(a, env)
            want = self.at_level(p, level)
            if ty != want and isinstance(p, A.SelfType) and ty == own_self:
                if path:
                    ta = A.Convert(ta, path)
            elif ty != want:
                raise TypeMismatch(f"argument {i + 1} of {level}!{t.func}: "
                                   f"expected {want}, found {ty}")
            args.append(ta)
        return A.ParentCall(t.func, tuple(args), t.target), self.at_level(sig.result, level)


def check_module(
    resolved: ResolvedModule,
    ancestors: Optional[Sequence[TypedModule]] = None,
) -> TypedModule:
    """Typecheck a resolved module; raises the first type error found."""
    module = resolved.module
    if ancestors is None:
        ancestors = []
        for i, m in enumerate(resolved.ancestors):
            ancestors.append(check_module(resolve(m, resolved.ancestors[:i]), ancestors[:]))
    ancestors = tuple(ancestors)

    if isinstance(module.representation, A.RepDefine) and module.parent is not None:
        raise RepresentationError(
            f"module {module.name!r} replaces its parent's representation; "
            "only 'parent' or a product extension is supported")
    if module.parent is None and isinstance(module.representation, (A.RepKeep, A.RepExtend)):
        raise MissingRootDefine(f"root module {module.name!r} must define its representation")
    reps = representations(resolved.chain)
    rep = reps[-1]
    checker = _Checker(resolved, reps)

    defs: dict[str, TypedDef] = {}
    for d in module.definitions:
        sig = resolved.signatures[d.name][1]
        if rep is None:
            raise MissingRootDefine(f"{d.name!r} is defined but {module.name!r} has no representation")
        params = tuple((n, checker.at_level(p, module.name)) for n, p in zip(d.params, sig.params))
        result = checker.at_level(sig.result, module.name)
        body, ty = checker.infer(d.body, dict(params))
        checker.expect(ty, result, f"body of {d.name}")
        defs[d.name] = TypedDef(d.name, params, result, body, d.redefine)

    lifted = []
    if module.parent is not None:
        extends = isinstance(module.representation, A.RepExtend)
        for name, (_, sig) in resolved.signatures.items():
            if name in defs or name not in resolved.inherited:
                continue
            if extends and A.contains_self(sig.result):
                raise RepresentationError(
                    f"{module.name!r} extends the representation, so {name!r} "
                    "(which returns Self) must be redefined")
            lifted.append(name)

    checker.formula = True

    def typed_formula(name, f):
        typed, ty = checker.infer(f, {})
        checker.expect(ty, A.BOOL, f"property {name}")
        return name, typed

    props = tuple(typed_formula(n, f) for n, f in effective_properties(resolved))
    obligations = tuple(typed_formula(n, f) for n, f in product_properties(resolved))
    return TypedModule(resolved, rep, defs, props, obligations, tuple(lifted), ancestors)


def check_chain(
    chain: Sequence[A.FeatureModule],
    components: Optional[Mapping[str, A.FeatureModule]] = None,
) -> TypedModule:
    """Resolve and typecheck every module of a root-first chain."""
    typed: list[TypedModule] = []
    for i, m in enumerate(chain):
        comps = components if i == len(chain) - 1 else None
        typed.append(check_module(resolve(m, chain[:i], comps), typed[:]))
    return typed[-1]
