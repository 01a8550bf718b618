"""Composition of the feature modules of a configuration into one product module.

Siblings (modules refining the same parent) are merged pairwise with
:func:`compose2`; a module and its own child are merged by
:func:`flatten_chain`.  :func:`compose_all` applies both bottom-up over the
selected part of the feature tree.

Redefinitions are chained mixin-style: every ``parent!f`` call in the outer
body is replaced by the inner body of ``f``.  Inlined code keeps the meaning
it had at its own level, so calls it makes to functions the other side
(re)defines are turned into parent calls or inlined as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

from . import ast as A
from .errors import (
    DistinctParents, IncompatibleRedefinition, NameClash, OrderInvalid,
    RepresentationError,
)
from .resolve import ResolvedModule, flatten_refinement, resolve

MAX_INLINE_DEPTH = 32


@dataclass(frozen=True)
class Product:
    """Result of composing a configuration: the product module and its context."""

    module: A.FeatureModule
    ancestors: tuple[A.FeatureModule, ...]
    components: Mapping[str, A.FeatureModule] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.module.name

    @property
    def chain(self) -> tuple[A.FeatureModule, ...]:
        return self.ancestors + (self.module,)

    def resolve(self) -> ResolvedModule:
        return resolve(self.module, self.ancestors, self.components)


def component_names(m: A.FeatureModule) -> tuple[str, ...]:
    return m.components or (m.name,)


# -- body rewriting -----------------------------------------------------------


class _Rewriter:
    """Rewrites a body written at one level so it can live in the composite.

    ``own`` holds the definitions of the side the body comes from.  ``taken``
    names the functions whose composite meaning differs from what the body
    saw; calls to them are inlined from ``own`` when possible and sent to
    the parent otherwise.  In ``inner`` mode the body's Self is the parent's
    representation while the composite extends it, so every call is handled
    that way.
    """

    def __init__(self, own: Mapping[str, A.FunctionDef], sigs: Mapping[str, A.Signature],
                 taken: set[str], inner: bool, retarget: Optional[str] = None):
        self.own = own
        self.sigs = sigs
        self.taken = taken
        self.inner = inner
        self.retarget = retarget

    def function(self, d: A.FunctionDef, convert: bool) -> A.Term:
        """Body of ``d`` with its parameters renamed to themselves, Self ones
        projected when ``convert`` is set."""
        sig = self.sigs[d.name]
        env = {}
        for p, t in zip(d.params, sig.params):
            arg: A.Term = A.Var(p)
            if convert and isinstance(t, A.SelfType):
                arg = A.Call("second", (arg,))
            env[p] = arg
        return self.rewrite(d.body, env, 0)

    def inline(self, d: A.FunctionDef, args: Sequence[A.Term], depth: int) -> A.Term:
        if depth > MAX_INLINE_DEPTH:
            raise IncompatibleRedefinition(f"inlining {d.name!r} does not terminate")
        return self.rewrite(d.body, dict(zip(d.params, args)), depth + 1)

    def rewrite(self, t: A.Term, env: Mapping[str, A.Term], depth: int) -> A.Term:
        if isinstance(t, A.Var):
            return env.get(t.name, t)
        if isinstance(t, A.Call) and t.func not in A.BUILTINS:
            args = tuple(self.rewrite(a, env, depth) for a in t.args)
            sig = self.sigs.get(t.func)
            if self.inner or t.func in self.taken:
                if t.func in self.own:
                    return self.inline(self.own[t.func], args, depth)
                if sig is not None and sig.is_constant:
                    return t
                return A.ParentCall(t.func, args)
            return A.Call(t.func, args)
        if isinstance(t, A.ParentCall):
            args = tuple(self.rewrite(a, env, depth) for a in t.args)
            target = t.target
            if self.retarget is not None and target == self.retarget:
                target = None
            return A.ParentCall(t.func, args, target)
        return A.map_children(t, lambda c: self.rewrite(c, env, depth))


def _splice(outer: A.Term, func: str, replacement, targets: set) -> tuple[A.Term, bool]:
    """Replace parent calls to ``func`` (with a target in ``targets``)."""
    hit = False

    def go(t: A.Term) -> A.Term:
        nonlocal hit
        if isinstance(t, A.ParentCall) and t.func == func and t.target in targets:
            hit = True
            return replacement(tuple(go(a) for a in t.args))
        return A.map_children(t, go)

    return go(outer), hit


# -- pieces shared by both merges ----------------------------------------------


def _merge_signatures(a: A.FeatureModule, b: A.FeatureModule) -> tuple[A.Signature, ...]:
    out = list(a.signatures)
    for s in b.signatures:
        prior = a.signature(s.name)
        if prior is None:
            out.append(s)
        elif prior != s:
            raise NameClash(f"{a.name} and {b.name} declare {s.name!r} differently")
    return tuple(out)


def _merge_representation(inner: A.FeatureModule, outer: A.FeatureModule):
    ri, ro = inner.representation, outer.representation
    ei, eo = isinstance(ri, A.RepExtend), isinstance(ro, A.RepExtend)
    if ei and eo:
        raise RepresentationError(
            f"{inner.name} and {outer.name} both extend the representation; "
            "composing two extensions is not supported")
    if isinstance(ri, A.RepDefine) or isinstance(ro, A.RepDefine):
        raise RepresentationError("only a root module may define its representation")
    if ei:
        return ri
    if eo:
        return ro
    if ri is None and ro is None:
        return None
    return A.RepKeep()


def _check_pair_extension(rep, name: str):
    if isinstance(rep, A.RepExtend) and len(rep.components) != 1:
        raise RepresentationError(
            f"{name} extends the representation with {len(rep.components)} components; "
            "lifting code across it needs a pair")


def _dedup(hints: Sequence[A.Hint]) -> tuple[A.Hint, ...]:
    out: list[A.Hint] = []
    for h in hints:
        if h not in out:
            out.append(h)
    return tuple(out)


def _qualify_hints(m: A.FeatureModule, hints: Sequence[A.Hint], renamed: set[str]):
    """Point hints at properties of ``m`` that no longer exist under their name
    to the component that owns them."""
    out = []
    for h in hints:
        if isinstance(h, (A.ByProperty, A.ByPredicate)) and h.name.module in (None, m.name):
            target = h.name.name
            if isinstance(h, A.ByPredicate):
                target = target[len("l_cons_"):]
            # a composite's own merged properties are not components
            if target in renamed and not m.components:
                h = type(h)(A.QualName(m.name, h.name.name))
        out.append(h)
    return out


def _proof_hints(m: A.FeatureModule, prop: str) -> tuple[A.Hint, ...]:
    pr = m.proof(prop)
    return pr.hints if pr else ()


def _definitions_by_name(m: A.FeatureModule) -> dict[str, A.FunctionDef]:
    return {d.name: d for d in m.definitions}


# -- sibling merge --------------------------------------------------------------


def _merged_property_name(pa: A.Property, a: A.FeatureModule,
                          pb: A.Property, b: A.FeatureModule, name: str) -> str:
    sa, sb = "_" + a.name, "_" + b.name
    if pa.name.endswith(sa) and pb.name.endswith(sb):
        stem = pa.name[: -len(sa)]
        if stem == pb.name[: -len(sb)]:
            return f"{stem}_{name}"
    return f"{pa.name}_{pb.name}"


def _refinements_by_base(m: A.FeatureModule, r: ResolvedModule):
    out: dict[tuple[str, str], A.Property] = {}
    for p in m.properties:
        if isinstance(p.body, A.Refinement):
            key = r.bases[p.name]
            if key in out:
                raise NameClash(f"{m.name} refines {key[0]}!{key[1]} more than once")
            out[key] = p
    return out


def compose2(a: A.FeatureModule, b: A.FeatureModule, shared_parent: ResolvedModule,
             components: Optional[Mapping[str, A.FeatureModule]] = None) -> A.FeatureModule:
    """Merge two siblings, ``a`` first.  The result refines ``shared_parent``."""
    parent = shared_parent.name
    if a.parent != parent or b.parent != parent:
        raise DistinctParents(
            f"{a.name} (parent {a.parent}) and {b.name} (parent {b.parent}) "
            f"are not both children of {parent}")
    ancestors = shared_parent.chain
    ra = resolve(a, ancestors, components)
    rb = resolve(b, ancestors, components)
    name = f"{a.name}_{b.name}"
    comps = component_names(a) + component_names(b)
    if len(set(comps)) != len(comps):
        raise NameClash(f"module {', '.join(comps)} listed twice in a composition")

    signatures = _merge_signatures(a, b)
    sigs = {n: s for n, (_, s) in rb.signatures.items()}
    sigs.update({n: s for n, (_, s) in ra.signatures.items()})
    representation = _merge_representation(a, b)

    # properties
    ref_a, ref_b = _refinements_by_base(a, ra), _refinements_by_base(b, rb)
    merged: dict[str, tuple[A.Property, A.Property, str]] = {}
    for key, pa in ref_a.items():
        if key in ref_b:
            pb = ref_b[key]
            merged[pa.name] = merged[pb.name] = (pa, pb, _merged_property_name(pa, a, pb, b, name))
    renamed_a = {pa.name for pa, _, _ in merged.values()}
    renamed_b = {pb.name for _, pb, _ in merged.values()}

    properties: list[A.Property] = []
    proofs: list[A.Proof] = []
    emitted: set[str] = set()
    b_props = {p.name: p for p in b.properties}
    for p in list(a.properties) + [p for p in b.properties if p.name not in renamed_b]:
        if p.name in merged:
            pa, pb, pname = merged[p.name]
            if pname in emitted:
                continue
            labels = [x.label for x in pa.body.premises + pb.body.premises]
            if len(set(labels)) != len(labels):
                raise NameClash(f"premise labels clash when merging {pa.name} and {pb.name}")
            owner, base = ra.bases[pa.name]
            body = A.Refinement(
                A.QualName(owner, base),
                pa.body.premises + pb.body.premises,
                pa.body.conclusions + pb.body.conclusions)
            properties.append(A.Property(pname, body))
            hints = (_qualify_hints(a, _proof_hints(a, pa.name), renamed_a)
                     + _qualify_hints(b, _proof_hints(b, pb.name), renamed_b))
            for side, prop in ((a, pa), (b, pb)):
                if not side.components:
                    hints.append(A.ByProperty(A.QualName(side.name, prop.name)))
            hints.append(A.ByProperty(A.QualName(owner, base)))
            if a.proof(pa.name) or b.proof(pb.name):
                proofs.append(A.Proof(pname, _dedup(hints)))
            emitted.add(pname)
            continue
        if p.name in emitted:
            continue
        other = b_props.get(p.name) if p in a.properties else None
        if other is not None and other != p:
            raise NameClash(f"{a.name} and {b.name} both introduce property {p.name!r}")
        properties.append(p)
        emitted.add(p.name)
        source = a if p in a.properties else b
        pr = source.proof(p.name)
        if pr is not None:
            renamed = renamed_a if source is a else renamed_b
            proofs.append(A.Proof(p.name, _dedup(_qualify_hints(source, pr.hints, renamed))))

    # definitions
    defs_a, defs_b = _definitions_by_name(a), _definitions_by_name(b)
    a_inner = isinstance(b.representation, A.RepExtend) and not isinstance(
        a.representation, A.RepExtend)
    b_inner = isinstance(a.representation, A.RepExtend) and not isinstance(
        b.representation, A.RepExtend)
    if a_inner:
        _check_pair_extension(b.representation, b.name)
    if b_inner:
        _check_pair_extension(a.representation, a.name)
    rw_a = _Rewriter(defs_a, sigs, set(defs_b), a_inner)
    rw_b = _Rewriter(defs_b, sigs, set(), b_inner)

    definitions: list[A.FunctionDef] = []
    for d in a.definitions:
        if d.name in defs_b:
            db = defs_b[d.name]
            if not (d.redefine and db.redefine):
                if d == db:
                    definitions.append(d)
                    continue
                raise NameClash(f"{a.name} and {b.name} both define {d.name!r}")
            def replacement(args, d=d):
                if a_inner:
                    args = tuple(
                        A.Call("second", (x,)) if isinstance(t, A.SelfType) else x
                        for x, t in zip(args, sigs[d.name].params))
                return rw_a.inline(d, args, 0)

            body, hit = _splice(db.body, d.name, replacement, {None, "parent", parent})
            if not hit:
                raise IncompatibleRedefinition(
                    f"{a.name} and {b.name} both redefine {d.name!r} but {b.name}'s "
                    "version never calls the parent one")
            definitions.append(A.FunctionDef(d.name, db.params, body, True))
        else:
            definitions.append(replace(d, body=rw_a.function(d, a_inner)))
    for d in b.definitions:
        if d.name in defs_a:
            continue
        if b_inner:
            definitions.append(replace(d, body=rw_b.function(d, True)))
        else:
            definitions.append(d)

    return A.FeatureModule(
        name=name,
        parent=parent,
        signatures=signatures,
        properties=tuple(properties),
        representation=representation,
        definitions=tuple(definitions),
        proofs=tuple(proofs),
        components=comps,
    )


# -- parent/child merge --------------------------------------------------------


def flatten_chain(m: A.FeatureModule, c: A.FeatureModule, m_ancestors: Sequence[A.FeatureModule],
                  components: Optional[Mapping[str, A.FeatureModule]] = None) -> A.FeatureModule:
    """Merge ``c`` into its parent ``m``; the result refines ``m``'s parent."""
    if c.parent != m.name:
        raise OrderInvalid(f"{c.name} is not a child of {m.name}")
    if m.parent is None:
        raise OrderInvalid(f"cannot flatten into the root module {m.name}")
    m_ancestors = tuple(m_ancestors)
    rm = resolve(m, m_ancestors, components)
    rc = resolve(c, m_ancestors + (m,), components)
    name = f"{m.name}_{c.name}"
    comps = component_names(m) + component_names(c)
    sigs = {n: s for n, (_, s) in rc.signatures.items()}
    signatures = _merge_signatures(m, c)
    representation = _merge_representation(m, c)
    here = {None, "parent", m.name}

    # properties: refinements of m's properties are folded into one step
    properties = list(m.properties)
    proofs = list(m.proofs)
    for p in c.properties:
        body = p.body
        hints = list(_proof_hints(c, p.name))
        if isinstance(body, A.Refinement):
            owner, base = rc.bases[p.name]
            if owner == m.name:
                mp = m.property(base)
                if isinstance(mp.body, A.NewFormula):
                    formula = flatten_refinement(
                        mp.body.formula, [x.formula for x in body.premises], body.conclusions)
                    body = A.NewFormula(formula)
                else:
                    o2, b2 = rm.bases[mp.name]
                    body = A.Refinement(A.QualName(o2, b2),
                                        mp.body.premises + body.premises,
                                        mp.body.conclusions + body.conclusions)
                hints += list(_proof_hints(m, base))
                hints.append(A.ByProperty(A.QualName(m.name, base)))
            else:
                body = replace(body, base=A.QualName(owner, base))
        body = _retarget_formulas(body, m, set(_definitions_by_name(c)))
        properties.append(A.Property(p.name, body))
        if c.proof(p.name) is not None:
            proofs.append(A.Proof(p.name, _dedup(_retarget_hints(hints, m))))

    # definitions
    defs_m, defs_c = _definitions_by_name(m), _definitions_by_name(c)
    m_inner = isinstance(c.representation, A.RepExtend) and not isinstance(
        m.representation, A.RepExtend)
    if m_inner:
        _check_pair_extension(c.representation, c.name)
    rw_m = _Rewriter(defs_m, sigs, set(defs_c), m_inner)
    rw_c = _Rewriter({}, sigs, set(), False, retarget=m.name)

    definitions: list[A.FunctionDef] = []
    for d in m.definitions:
        if d.name in defs_c:
            continue
        definitions.append(replace(d, body=rw_m.function(d, m_inner)))
    for d in c.definitions:
        body = d.body
        redefine = d.redefine
        if d.name in defs_m:
            redefine = defs_m[d.name].redefine
        body = _inline_parent_calls(body, defs_m, defs_c, sigs, m_inner, here)
        body = rw_c.rewrite(body, {}, 0)
        definitions.append(A.FunctionDef(d.name, d.params, body, redefine))

    return A.FeatureModule(
        name=name,
        parent=m.parent,
        signatures=signatures,
        properties=tuple(properties),
        representation=representation,
        definitions=tuple(definitions),
        proofs=tuple(proofs),
        components=comps,
    )


def _inline_parent_calls(body, defs_m, defs_c, sigs, m_inner, here):
    """Parent calls from the child to other functions its parent defines."""
    rw = _Rewriter(defs_m, sigs, set(defs_c), m_inner)

    def go(t: A.Term) -> A.Term:
        if isinstance(t, A.ParentCall) and t.target in here and t.func in defs_m:
            args = tuple(go(a) for a in t.args)
            if m_inner:
                args = tuple(
                    A.Call("second", (x,)) if isinstance(p, A.SelfType) else x
                    for x, p in zip(args, sigs[t.func].params))
            return rw.inline(defs_m[t.func], args, 0)
        return A.map_children(t, go)

    return go(body)


def _retarget_formulas(body, m: A.FeatureModule, redefined_by_child: set[str]):
    """``m!f`` in the child's formulas becomes plain ``f`` once ``m`` is merged."""

    def go(t: A.Term) -> A.Term:
        if isinstance(t, A.ParentCall) and t.target in (None, "parent", m.name):
            if t.func in redefined_by_child:
                raise IncompatibleRedefinition(
                    f"a formula refers to {m.name}'s version of {t.func!r}, "
                    "which the child redefines")
            return A.Call(t.func, tuple(go(a) for a in t.args))
        return A.map_children(t, go)

    if isinstance(body, A.NewFormula):
        return A.NewFormula(go(body.formula))
    return A.Refinement(
        body.base,
        tuple(A.Premise(p.label, go(p.formula)) for p in body.premises),
        tuple(go(c) for c in body.conclusions))


def _retarget_hints(hints, m: A.FeatureModule):
    out = []
    for h in hints:
        if isinstance(h, (A.ByProperty, A.ByPredicate)) and h.name.module == "parent":
            h = type(h)(A.QualName(m.name, h.name.name))
        out.append(h)
    return out


# -- whole configurations ------------------------------------------------------


def check_order(order: Sequence[str], selection: Sequence[str],
                modules: Mapping[str, A.FeatureModule]):
    """Raise :class:`OrderInvalid` unless ``order`` is a permutation of the
    selection that starts at the root and puts parents before children."""
    if not order:
        raise OrderInvalid("empty composition order")
    if len(set(order)) != len(order) or set(order) != set(selection):
        raise OrderInvalid(
            f"order {', '.join(order)} does not match the configuration {', '.join(selection)}")
    for n in order:
        if n not in modules:
            raise OrderInvalid(f"no module for feature {n!r}")
    if modules[order[0]].parent is not None:
        raise OrderInvalid(f"order must start with the root, not {order[0]}")
    seen: set[str] = set()
    for n in order:
        p = modules[n].parent
        if p is not None and p not in seen:
            raise OrderInvalid(f"{n} comes before its parent {p}")
        seen.add(n)


def compose_all(selection: Sequence[str], order: Optional[Sequence[str]],
                modules: Mapping[str, A.FeatureModule]) -> Product:
    """Compose the modules of a configuration, siblings merged in ``order``."""
    order = list(order if order is not None else selection)
    check_order(order, selection, modules)
    root = modules[order[0]]
    pos = {n: i for i, n in enumerate(order)}
    children: dict[str, list[str]] = {n: [] for n in order}
    for n in order[1:]:
        children[modules[n].parent].append(n)
    for kids in children.values():
        kids.sort(key=pos.__getitem__)
    components = {n: modules[n] for n in order[1:]}

    def chain_of(n: str) -> tuple[A.FeatureModule, ...]:
        out = []
        p = modules[n].parent
        while p is not None:
            out.append(modules[p])
            p = modules[p].parent
        return tuple(reversed(out))

    def fold_siblings(node: str) -> Optional[A.FeatureModule]:
        kids = [build(k) for k in children[node]]
        if not kids:
            return None
        shared = resolve(modules[node], chain_of(node))
        acc = kids[0]
        for k in kids[1:]:
            acc = compose2(acc, k, shared, components)
        return acc

    def build(node: str) -> A.FeatureModule:
        below = fold_siblings(node)
        if below is None:
            return modules[node]
        return flatten_chain(modules[node], below, chain_of(node), components)

    product = fold_siblings(root.name)
    if product is None:
        return Product(root, (), {})
    used = {n: components[n] for n in component_names(product) if n in components}
    return Product(product, (root,), used)
