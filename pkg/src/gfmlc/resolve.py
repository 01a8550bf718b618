"""Name resolution over a module's parent chain and property flattening."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from . import ast as A
from .errors import (
    BaseNotRefinable, CyclicParent, DuplicateName, SignatureMismatch,
    UnresolvedName,
)


@dataclass(frozen=True)
class ResolvedModule:
    """A module whose references are bound to their defining modules.

    ``signatures`` maps every visible function to ``(owner, Signature)``;
    ``implementations`` maps it to the module holding the effective
    definition (absent for functions that are only declared).  Hints are
    bound per proof, in order, to the module they refer to.
    """

    module: A.FeatureModule
    ancestors: tuple[A.FeatureModule, ...]
    signatures: Mapping[str, tuple[str, A.Signature]]
    implementations: Mapping[str, str]
    properties: Mapping[str, str]
    bases: Mapping[str, tuple[str, str]]
    hints: Mapping[str, tuple[tuple[A.Hint, str], ...]]
    inherited: frozenset[str]
    defined: frozenset[str]
    redefined: frozenset[str]
    components: Mapping[str, A.FeatureModule] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.module.name

    @property
    def chain(self) -> tuple[A.FeatureModule, ...]:
        """Ancestors followed by the module itself, root first."""
        return self.ancestors + (self.module,)

    def ancestor(self, name: str) -> A.FeatureModule:
        for m in self.ancestors:
            if m.name == name:
                return m
        raise UnresolvedName(f"{name!r} is not an ancestor of {self.name!r}")

    def parent_target(self, target: Optional[str]) -> str:
        """Module name a ``ParentCall`` target denotes."""
        if not self.ancestors:
            raise UnresolvedName(f"module {self.name!r} has no parent")
        if target is None or target == "parent":
            return self.ancestors[-1].name
        self.ancestor(target)
        return target

    def resolve_ancestor(self, name: str) -> "ResolvedModule":
        for i, m in enumerate(self.ancestors):
            if m.name == name:
                return resolve(m, self.ancestors[:i])
        raise UnresolvedName(f"{name!r} is not an ancestor of {self.name!r}")


def _check_distinct(module: A.FeatureModule):
    for label, names in (
        ("signature", [s.name for s in module.signatures]),
        ("property", [p.name for p in module.properties]),
        ("definition", [d.name for d in module.definitions]),
        ("proof", [p.of for p in module.proofs]),
    ):
        seen = set()
        for n in names:
            if n in seen:
                raise DuplicateName(f"duplicate {label} {n!r} in module {module.name!r}")
            seen.add(n)
    for p in module.properties:
        if isinstance(p.body, A.Refinement):
            labels = [prem.label for prem in p.body.premises]
            if len(set(labels)) != len(labels):
                raise DuplicateName(f"duplicate premise label in property {p.name!r}")


def _check_chain(module: A.FeatureModule, ancestors: Sequence[A.FeatureModule]):
    names = [m.name for m in ancestors] + [module.name]
    if len(set(names)) != len(names):
        raise CyclicParent(f"cyclic parent chain: {' -> '.join(names)}")
    if ancestors and ancestors[0].parent is not None:
        raise UnresolvedName(
            f"ancestor chain of {module.name!r} does not start at a root module")
    expected = None
    for m in list(ancestors) + [module]:
        if m.parent != expected:
            raise UnresolvedName(
                f"module {m.name!r} declares parent {m.parent!r}, chain provides {expected!r}")
        expected = m.name


def _find_property(chain: Sequence[A.FeatureModule], name: str) -> Optional[str]:
    for m in reversed(chain):
        if m.property(name) is not None:
            return m.name
    return None


def _called_functions(t: A.Term):
    for node in A.walk(t):
        if isinstance(node, (A.Call, A.ParentCall)):
            yield node


def resolve(
    module: A.FeatureModule,
    ancestors: Sequence[A.FeatureModule] = (),
    components: Optional[Mapping[str, A.FeatureModule]] = None,
) -> ResolvedModule:
    """Bind every name reference of ``module`` through its parent chain.

    ``components`` lets a composite module cite properties of the feature
    modules it was built from in its proof hints.
    """
    ancestors = tuple(ancestors)
    components = dict(components or {})
    _check_chain(module, ancestors)
    _check_distinct(module)

    sigs: dict[str, tuple[str, A.Signature]] = {}
    impls: dict[str, str] = {}
    for anc in ancestors:
        for s in anc.signatures:
            prior = sigs.get(s.name)
            if prior is not None and prior[1] != s:
                raise SignatureMismatch(
                    f"{anc.name} redeclares {s.name!r} with a different signature")
            if prior is None:
                sigs[s.name] = (anc.name, s)
        for d in anc.definitions:
            impls[d.name] = anc.name
    inherited = frozenset(sigs)

    for s in module.signatures:
        prior = sigs.get(s.name)
        if prior is not None and prior[1] != s:
            raise SignatureMismatch(
                f"{module.name} changes the signature of {s.name!r} declared in {prior[0]}"
                f" ({_sig_text(prior[1])} became {_sig_text(s)})")
        if prior is None:
            sigs[s.name] = (module.name, s)

    defined, redefined = set(), set()
    for d in module.definitions:
        if d.name not in sigs:
            raise UnresolvedName(f"definition of undeclared function {d.name!r}")
        sig = sigs[d.name][1]
        if len(d.params) != len(sig.params):
            raise SignatureMismatch(
                f"{d.name!r} takes {len(sig.params)} parameter(s), definition has {len(d.params)}")
        if d.redefine:
            if sigs[d.name][0] == module.name and d.name not in inherited:
                raise UnresolvedName(f"redefinition of {d.name!r} which no ancestor declares")
            redefined.add(d.name)
        else:
            if d.name in impls:
                raise DuplicateName(
                    f"{d.name!r} is already defined in {impls[d.name]}; use 'redefine'")
            defined.add(d.name)
        impls[d.name] = module.name

    visible_props: dict[str, str] = {}
    for m in ancestors + (module,):
        for p in m.properties:
            visible_props[p.name] = m.name

    bases: dict[str, tuple[str, str]] = {}
    for p in module.properties:
        if isinstance(p.body, A.Refinement):
            owner = _resolve_property(p.body.base, module, ancestors, own=False)
            if owner is None:
                raise UnresolvedName(f"property {p.name!r} refines unknown {p.body.base}")
            bases[p.name] = (owner, p.body.base.name)

    for term, where in _module_terms(module):
        for call in _called_functions(term):
            if isinstance(call, A.Call):
                if call.func not in sigs and call.func not in A.BUILTINS:
                    raise UnresolvedName(f"unknown function {call.func!r} in {where}")
            else:
                target = call.target
                if not ancestors:
                    raise UnresolvedName(f"parent call in root module ({where})")
                names = [m.name for m in ancestors]
                if target in (None, "parent"):
                    scope = ancestors
                elif target in names:
                    scope = ancestors[: names.index(target) + 1]
                else:
                    raise UnresolvedName(f"{target!r} is not an ancestor ({where})")
                if not any(s.name == call.func for m in scope for s in m.signatures):
                    raise UnresolvedName(f"parent has no function {call.func!r} ({where})")

    hints: dict[str, tuple[tuple[A.Hint, str], ...]] = {}
    for pr in module.proofs:
        if module.property(pr.of) is None:
            raise UnresolvedName(f"proof of unknown property {pr.of!r}")
        bound = []
        for h in pr.hints:
            bound.append((h, _resolve_hint(h, module, ancestors, sigs, impls, components)))
        hints[pr.of] = tuple(bound)

    return ResolvedModule(
        module=module,
        ancestors=ancestors,
        signatures=sigs,
        implementations=impls,
        properties=visible_props,
        bases=bases,
        hints=hints,
        inherited=inherited,
        defined=frozenset(defined),
        redefined=frozenset(redefined),
        components=components,
    )


def _sig_text(s: A.Signature) -> str:
    return " -> ".join(str(t) for t in (*s.params, s.result))


def _module_terms(module: A.FeatureModule):
    for p in module.properties:
        if isinstance(p.body, A.NewFormula):
            yield p.body.formula, f"property {p.name}"
        else:
            for prem in p.body.premises:
                yield prem.formula, f"premise {prem.label} of {p.name}"
            for c in p.body.conclusions:
                yield c, f"conclusion of {p.name}"
    for d in module.definitions:
        yield d.body, f"definition of {d.name}"


def _resolve_property(q: A.QualName, module, ancestors, own: bool) -> Optional[str]:
    if q.module is None:
        if own and module.property(q.name) is not None:
            return module.name
        return _find_property(ancestors, q.name)
    if q.module == "parent":
        return _find_property(ancestors, q.name)
    names = [m.name for m in ancestors]
    if q.module in names:
        return _find_property(ancestors[: names.index(q.module) + 1], q.name)
    if own and q.module == module.name and module.property(q.name) is not None:
        return module.name
    return None


def _resolve_hint(h: A.Hint, module, ancestors, sigs, impls, components) -> str:
    if isinstance(h, A.ByDefinition):
        if h.name not in sigs:
            raise UnresolvedName(f"hint refers to unknown function {h.name!r}")
        return impls.get(h.name, sigs[h.name][0])
    q = h.name
    if isinstance(h, A.ByPredicate):
        if not q.name.startswith("l_cons_"):
            raise UnresolvedName(f"predicate hint {q} is not an l_cons predicate")
        q = A.QualName(q.module, q.name[len("l_cons_"):])
    owner = _resolve_property(q, module, ancestors, own=True)
    if owner is None and q.module in components:
        if components[q.module].property(q.name) is not None:
            owner = q.module
    if owner is None:
        raise UnresolvedName(f"hint refers to unknown property {h.name}")
    return owner


# -- flattening ---------------------------------------------------------------


def split_universals(f: A.Term) -> tuple[list[A.Quant], A.Term]:
    quants = []
    while isinstance(f, A.Quant) and f.kind == "all":
        quants.append(f)
        f = f.body
    return quants, f


def split_implications(f: A.Term) -> tuple[list[A.Term], A.Term]:
    antecedents = []
    while isinstance(f, A.BinOp) and f.op == "->":
        antecedents.append(f.left)
        f = f.right
    return antecedents, f


def flatten_refinement(
    base: A.Term, premises: Sequence[A.Term], conclusions: Sequence[A.Term]
) -> A.Term:
    """Insert ``premises`` as outermost antecedents under the base's universal
    prefix and conjoin ``conclusions`` to its final conclusion."""
    quants, body = split_universals(base)
    antecedents, conclusion = split_implications(body)
    for c in conclusions:
        conclusion = A.BinOp("&&", conclusion, c)
    out = conclusion
    for a in reversed(list(premises) + antecedents):
        out = A.BinOp("->", a, out)
    for q in reversed(quants):
        out = A.Quant(q.kind, q.names, q.type, out)
    return out


def effective_formula(resolved: ResolvedModule, prop: A.Property) -> A.Term:
    if isinstance(prop.body, A.NewFormula):
        return prop.body.formula
    owner, name = resolved.bases[prop.name]
    base_module = resolved.resolve_ancestor(owner)
    base_prop = base_module.module.property(name)
    if base_prop is None:
        raise BaseNotRefinable(f"base property {owner}!{name} cannot be found")
    try:
        base = effective_formula(base_module, base_prop)
    except (UnresolvedName, KeyError) as exc:
        raise BaseNotRefinable(f"base property {owner}!{name} is unresolved: {exc}") from exc
    return flatten_refinement(
        base, [p.formula for p in prop.body.premises], prop.body.conclusions)


def effective_properties(resolved: ResolvedModule) -> list[tuple[str, A.Term]]:
    """The module's own properties with every refinement flattened."""
    return [(p.name, effective_formula(resolved, p)) for p in resolved.module.properties]


def product_properties(resolved: ResolvedModule) -> list[tuple[str, A.Term]]:
    """Everything a product ending in this module must satisfy.

    Own effective properties come first, then inherited properties that no
    module further down the chain refines, nearest ancestor first.
    """
    out = effective_properties(resolved)
    refined: set[tuple[str, str]] = set()
    for i, m in enumerate(resolved.chain):
        r = resolved if i == len(resolved.ancestors) else resolve(m, resolved.ancestors[:i])
        refined.update(r.bases.values())
    seen = {name for name, _ in out}
    for i in range(len(resolved.ancestors) - 1, -1, -1):
        anc = resolve(resolved.ancestors[i], resolved.ancestors[:i])
        for p in anc.module.properties:
            if (anc.name, p.name) in refined or p.name in seen:
                continue
            seen.add(p.name)
            out.append((p.name, effective_formula(anc, p)))
    return out
