"""Bounded interpreter for function bodies and flattened properties.

Values are plain Python: ``int``, ``bool``, :class:`~gfmlc.ast.Status` and
tuples.  Terms are compiled once into closures over a mutable environment.

Quantifiers range over a finite integer :class:`Domain`.  A universally
quantified variable pinned by an equation among the antecedents
(``all r, r = update(x, a) -> ...``) is not enumerated: it is bound to the
equation's value (the one-point rule), which is exact even when that value
falls outside the domain.  The same applies to existentials pinned by a
conjunct.  Counterexamples are reported for the outermost universal block, the
first one in lexicographic order of the enumerated variables.
"""

from __future__ import annotations

import itertools
import operator
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Sequence, Union

from . import ast as A
from .errors import DomainTooLarge, StuckProjection, UnboundConstant
from .resolve import split_implications
from .typecheck import TypedModule

Value = Any
Binding = Mapping[str, Value]

DEFAULT_CAP = 10**7
MAX_WIDTH = 64


@dataclass(frozen=True)
class Domain:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty domain [{self.lo}, {self.hi}]")
        if self.hi - self.lo > MAX_WIDTH:
            raise ValueError(f"domain [{self.lo}, {self.hi}] is wider than {MAX_WIDTH}")

    @classmethod
    def parse(cls, text: str) -> "Domain":
        lo, _, hi = text.partition(":")
        return cls(int(lo), int(hi))

    def ints(self) -> range:
        return range(self.lo, self.hi + 1)


@dataclass(frozen=True)
class Holds:
    instantiations: int = 0

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Counterexample:
    assignment: dict[str, Value] = field(default_factory=dict)
    instantiations: int = 0

    def __bool__(self) -> bool:
        return False

    def describe(self) -> str:
        return ", ".join(f"{k} = {format_value(v)}" for k, v in self.assignment.items())


CheckResult = Union[Holds, Counterexample]


def format_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, A.Status):
        return v.value
    if isinstance(v, tuple):
        return "(" + ", ".join(format_value(x) for x in v) + ")"
    return str(v)


def apply_conversion(v: Value, path: Sequence[tuple[int, int]]) -> Value:
    for index, arity in path:
        if not isinstance(v, tuple) or len(v) != arity:
            raise StuckProjection(f"cannot project component {index} of {format_value(v)}")
        v = v[index]
    return v


def values_of(t: A.SemType, dom: Domain, rep: Optional[A.SemType]) -> list[Value]:
    """All values of ``t`` buildable from the domain, in lexicographic order."""
    if isinstance(t, A.IntType):
        return list(dom.ints())
    if isinstance(t, A.StatusType):
        return [A.Status.SUCCESS, A.Status.NO_SUCCESS]
    if isinstance(t, A.BoolType):
        return [False, True]
    if isinstance(t, A.SelfType):
        if rep is None:
            raise UnboundConstant("cannot enumerate an abstract representation")
        return values_of(rep, dom, rep)
    parts = [values_of(c, dom, rep) for c in t.items]
    return list(itertools.product(*parts))


def _domain_size(t: A.SemType, dom: Domain, rep) -> int:
    if isinstance(t, A.IntType):
        return dom.hi - dom.lo + 1
    if isinstance(t, (A.StatusType, A.BoolType)):
        return 2
    if isinstance(t, A.SelfType):
        return _domain_size(rep, dom, rep)
    n = 1
    for c in t.items:
        n *= _domain_size(c, dom, rep)
    return n


_ARITH = {"+": operator.add, "-": operator.sub, "=": operator.eq, "<>": operator.ne,
          "<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}


def _conjuncts(t: A.Term) -> list[A.Term]:
    if isinstance(t, A.BinOp) and t.op == "&&":
        return _conjuncts(t.left) + _conjuncts(t.right)
    return [t]


def _quant_block(q: A.Quant) -> tuple[str, list[tuple[str, A.SemType]], A.Term]:
    kind, names, body = q.kind, [], q
    while isinstance(body, A.Quant) and body.kind == kind:
        names.extend((n, body.type) for n in body.names)
        body = body.body
    return kind, names, body


def _solve(kind: str, names: list[tuple[str, A.SemType]], body: A.Term):
    """Pick block variables fixed by an equation; returns (solved, enumerated).

    A variable may be solved from an expression mentioning other block
    variables as long as no dependency cycle arises; solved variables are
    returned in dependency order.
    """
    if kind == "all":
        guards = [c for a in split_implications(body)[0] for c in _conjuncts(a)]
    else:
        guards = _conjuncts(body)
    block = [n for n, _ in names]
    # a later binder shadows an earlier one with the same name
    if len(set(block)) != len(block):
        return [], names
    deps: dict[str, set[str]] = {}
    exprs: dict[str, A.Term] = {}

    def reaches(start: set[str], goal: str) -> bool:
        seen, todo = set(), list(start)
        while todo:
            u = todo.pop()
            if u == goal:
                return True
            if u in seen:
                continue
            seen.add(u)
            todo.extend(deps.get(u, ()))
        return False

    for g in guards:
        if not (isinstance(g, A.BinOp) and g.op == "="):
            continue
        for var, expr in ((g.left, g.right), (g.right, g.left)):
            if not isinstance(var, A.Var) or var.name not in block or var.name in exprs:
                continue
            used = A.free_vars(expr) & set(block)
            if var.name in used or reaches(used, var.name):
                continue
            deps[var.name] = used
            exprs[var.name] = expr
            break

    solved: list[tuple[str, A.Term]] = []
    done: set[str] = set()

    def visit(v: str):
        if v in done or v not in exprs:
            return
        done.add(v)
        for u in sorted(deps[v], key=block.index):
            visit(u)
        solved.append((v, exprs[v]))

    for v in block:
        visit(v)
    enumerated = [(n, t) for n, t in names if n not in exprs]
    return solved, enumerated


def _memoize(fn: Callable) -> Callable:
    """Bodies are pure and values hashable, so calls can be cached.  Each
    parameter has one type, so ``True``/``1`` never meet in the same slot."""
    cache: dict = {}

    def call(*args):
        try:
            return cache[args]
        except KeyError:
            v = cache[args] = fn(*args)
            return v
    return call


class Evaluator:
    """Evaluates terms against a typed product chain and constant binding."""

    def __init__(self, product: TypedModule, binding: Optional[Binding] = None,
                 domain: Optional[Domain] = None, cap: int = DEFAULT_CAP):
        self.product = product
        self.levels = {t.name: t for t in product.chain}
        self.order = [t.name for t in product.chain]
        self.binding = dict(binding or {})
        self.domain = domain or Domain(-10, 10)
        self.cap = cap
        self.count = 0
        self._functions: dict[tuple[str, str], Callable] = {}
        self._check_constants()

    def _check_constants(self):
        r = self.product.resolved
        for name, (_, sig) in r.signatures.items():
            if sig.is_constant and name not in self.binding and name not in r.implementations:
                raise UnboundConstant(f"constant {name!r} has no value; bind it with --bind")

    # -- functions
    def function(self, level: str, name: str) -> Callable:
        key = (level, name)
        fn = self._functions.get(key)
        if fn is None:
            fn = _memoize(self._build_function(level, name))
            self._functions[key] = fn
        return fn

    def _build_function(self, level: str, name: str) -> Callable:
        tm = self.levels[level]
        sig = tm.resolved.signatures.get(name)
        if sig is not None and sig[1].is_constant and name in self.binding:
            value = self.binding[name]
            return lambda *args: value
        tdef = tm.definitions.get(name)
        if tdef is not None:
            body = self.compile(tdef.body, level)
            params = [p for p, _ in tdef.params]

            def call(*args):
                return body(dict(zip(params, args)))
            return call
        idx = self.order.index(level)
        if idx == 0:
            raise UnboundConstant(f"{name!r} is declared but never defined")
        parent = self.order[idx - 1]
        inner = self.function(parent, name)
        path = self.levels[level].conversion(parent) if sig else ()
        if not path:
            return inner
        self_params = [isinstance(p, A.SelfType) for p in sig[1].params]

        def lifted(*args):
            return inner(*(apply_conversion(a, path) if s else a
                           for a, s in zip(args, self_params)))
        return lifted

    def call(self, name: str, *args: Value) -> Value:
        return self.function(self.product.name, name)(*args)

    # -- compilation
    def compile(self, t: A.Term, level: str) -> Callable[[dict], Value]:
        if isinstance(t, (A.IntLit, A.BoolLit, A.StatusLit)):
            value = t.value
            return lambda env: value
        if isinstance(t, A.Var):
            name = t.name
            tm = self.levels[level]
            if name in tm.resolved.signatures and tm.resolved.signatures[name][1].is_constant:
                fn_holder: list = []

                def var_or_const(env):
                    if name in env:
                        return env[name]
                    if not fn_holder:
                        fn_holder.append(self.function(level, name))
                    return fn_holder[0]()
                return var_or_const
            return lambda env: env[name]
        if isinstance(t, A.Call):
            args = [self.compile(a, level) for a in t.args]
            if t.func in A.BUILTINS and t.func not in self.levels[level].resolved.signatures:
                index = A.BUILTINS[t.func]
                arg = args[0]

                def project(env):
                    v = arg(env)
                    if not isinstance(v, tuple) or len(v) != 2:
                        raise StuckProjection(f"{t.func} of {format_value(v)}")
                    return v[index]
                return project
            return self._call_closure(level, t.func, args)
        if isinstance(t, A.ParentCall):
            target = self.levels[level].resolved.parent_target(t.target)
            args = [self.compile(a, level) for a in t.args]
            return self._call_closure(target, t.func, args)
        if isinstance(t, A.Convert):
            arg, path = self.compile(t.arg, level), t.path
            return lambda env: apply_conversion(arg(env), path)
        if isinstance(t, A.BinOp):
            left, right = self.compile(t.left, level), self.compile(t.right, level)
            if t.op == "&&":
                return lambda env: left(env) and right(env)
            if t.op == "||":
                return lambda env: left(env) or right(env)
            if t.op == "->":
                return lambda env: (not left(env)) or right(env)
            op = _ARITH[t.op]
            return lambda env: op(left(env), right(env))
        if isinstance(t, A.Not):
            arg = self.compile(t.arg, level)
            return lambda env: not arg(env)
        if isinstance(t, A.Neg):
            arg = self.compile(t.arg, level)
            return lambda env: -arg(env)
        if isinstance(t, A.Tuple):
            items = [self.compile(a, level) for a in t.items]
            return lambda env: tuple(i(env) for i in items)
        if isinstance(t, A.If):
            c, a, b = (self.compile(x, level) for x in (t.cond, t.then, t.orelse))
            return lambda env: a(env) if c(env) else b(env)
        if isinstance(t, A.Quant):
            run = self._compile_block(t, level)
            return lambda env: run(env, None)
        raise TypeError(f"cannot evaluate {t!r}")

    def _call_closure(self, level: str, func: str, args: list[Callable]):
        holder: list = []

        def call(env):
            if not holder:
                holder.append(self.function(level, func))
            return holder[0](*(a(env) for a in args))
        return call

    def _compile_block(self, q: A.Quant, level: str):
        kind, names, body = _quant_block(q)
        solved, enumerated = _solve(kind, names, body)
        rep = self.levels[level].representation
        domains = [values_of(t, self.domain, rep) for _, t in enumerated]
        enum_names = [n for n, _ in enumerated]
        solved_fns = [(n, self.compile(e, level)) for n, e in solved]
        body_fn = self.compile(body, level)
        all_names = [n for n, _ in names]
        universal = kind == "all"

        def run(env: dict, witness: Optional[list]) -> bool:
            saved = {n: env[n] for n in all_names if n in env}
            try:
                for combo in itertools.product(*domains):
                    self.count += 1
                    if self.count > self.cap:
                        raise DomainTooLarge(
                            f"more than {self.cap} instantiations; shrink the domain")
                    env.update(zip(enum_names, combo))
                    for n, fn in solved_fns:
                        env[n] = fn(env)
                    if body_fn(env) != universal:
                        if witness is not None:
                            witness.append({n: env[n] for n in all_names})
                        return not universal
                return universal
            finally:
                for n in all_names:
                    env.pop(n, None)
                env.update(saved)

        run.size = 1
        for _, t in enumerated:
            run.size *= _domain_size(t, self.domain, rep)
        return run

    def check(self, formula: A.Term) -> CheckResult:
        self.count = 0
        level = self.product.name
        if isinstance(formula, A.Quant) and formula.kind == "all":
            run = self._compile_block(formula, level)
            if run.size > self.cap:
                raise DomainTooLarge(
                    f"{run.size} instantiations exceed the cap of {self.cap}")
            witness: list = []
            ok = run({}, witness)
            if ok:
                return Holds(self.count)
            return Counterexample(witness[0], self.count)
        value = self.compile(formula, level)({})
        return Holds(self.count) if value else Counterexample({}, self.count)


def eval_fn(product: TypedModule, name: str, args: Sequence[Value],
            binding: Optional[Binding] = None) -> Value:
    """Call ``name`` at the product level with call-by-value semantics."""
    return Evaluator(product, binding).call(name, *args)


def check_formula(product: TypedModule, formula: A.Term, binding: Optional[Binding] = None,
                  domain: Optional[Domain] = None, cap: int = DEFAULT_CAP) -> CheckResult:
    """Exhaustively instantiate a closed, typechecked formula over the domain."""
    return Evaluator(product, binding, domain, cap).check(formula)
