import pytest

from gfmlc import ast as A
from gfmlc.errors import (
    CyclicParent, DuplicateName, SignatureMismatch, UnresolvedName,
)
from gfmlc.parser import parse_formula, parse_module
from gfmlc.resolve import (
    effective_properties, flatten_refinement, product_properties, resolve,
    split_implications, split_universals,
)


def child(text):
    return parse_module("module C from BA\n" + text)


def test_resolve_binds_owners(modules):
    r = resolve(modules["DL"], [modules["BA"]])
    assert r.signatures["update"][0] == "BA"
    assert r.implementations["update"] == "DL"
    assert r.implementations["balance"] == "BA"
    assert r.bases["update_succ_DL"] == ("BA", "update_succ_BA")
    assert r.redefined == {"update"} and r.defined == {"withdraw"}


def test_hints_are_bound(modules):
    r = resolve(modules["DL"], [modules["BA"]])
    owners = [owner for _, owner in r.hints["update_succ_DL"]]
    assert owners == ["DL", "DL", "BA"]


def test_let_of_inherited_function_needs_redefine(modules):
    m = child("representation = parent;\nlet update(x, a) = (x, success);\n")
    with pytest.raises(DuplicateName, match="redefine"):
        resolve(m, [modules["BA"]])


def test_changed_signature(modules):
    m = child("sig update : Self -> Self * S;\n")
    with pytest.raises(SignatureMismatch):
        resolve(m, [modules["BA"]])


def test_redefinition_arity(modules):
    m = child("representation = parent;\nredefine update(x) = (x, success);\n")
    with pytest.raises(SignatureMismatch):
        resolve(m, [modules["BA"]])


def test_unknown_base(modules):
    m = child("property p refines BA!nothing conclusion : true;\n")
    with pytest.raises(UnresolvedName):
        resolve(m, [modules["BA"]])


def test_unknown_parent_function(modules):
    m = child("representation = parent;\nredefine update(x, a) = parent!missing(x);\n")
    with pytest.raises(UnresolvedName):
        resolve(m, [modules["BA"]])


def test_unknown_hint(modules):
    m = child("property p : true;\nproof of p by property nowhere;\n")
    with pytest.raises(UnresolvedName):
        resolve(m, [modules["BA"]])


def test_predicate_hint_must_be_l_cons(modules):
    m = child("property p : true;\nproof of p by predicate update_succ_BA;\n")
    with pytest.raises(UnresolvedName):
        resolve(m, [modules["BA"]])
    ok = child("property p : true;\nproof of p by predicate BA!l_cons_update_succ_BA;\n")
    resolve(ok, [modules["BA"]])


def test_cyclic_chain():
    a = parse_module("module A\nsig f : int;\n")
    with pytest.raises(CyclicParent):
        resolve(a, [a])


def test_parent_mismatch(modules):
    with pytest.raises(UnresolvedName):
        resolve(modules["CurrencyExchange"], [modules["BA"]])


def test_duplicate_names():
    sig = A.Signature("f", (), A.INT)
    with pytest.raises(DuplicateName):
        resolve(A.FeatureModule("A", signatures=(sig, sig)))


def test_flatten_places_premises_outermost():
    base = parse_formula("all x : int, p(x) -> q(x)")
    flat = flatten_refinement(base, [parse_formula("h(x)")], [parse_formula("c(x)")])
    quants, body = split_universals(flat)
    antecedents, conclusion = split_implications(body)
    assert [q.names for q in quants] == [("x",)]
    assert antecedents == [parse_formula("h(x)"), parse_formula("p(x)")]
    assert conclusion == parse_formula("q(x) && c(x)")


def test_flatten_with_nothing_added_is_identity():
    base = parse_formula("all x : int, all y : int, x = y -> y = x")
    assert flatten_refinement(base, [], []) == base


def test_dl_effective_property(modules):
    r = resolve(modules["DL"], [modules["BA"]])
    (name, f), = effective_properties(r)
    assert name == "update_succ_DL"
    quants, body = split_universals(f)
    assert [n for q in quants for n in q.names] == ["x", "a", "r"]
    antecedents, conclusion = split_implications(body)
    h1 = modules["DL"].property("update_succ_DL").body.premises[0].formula
    assert antecedents[0] == h1
    assert conclusion.op == "&&"


def test_product_properties_skip_refined_bases(modules):
    dl = resolve(modules["DL"], [modules["BA"]])
    assert [n for n, _ in product_properties(dl)] == ["update_succ_DL"]
    cur = resolve(modules["Currency"], [modules["BA"]])
    assert [n for n, _ in product_properties(cur)] == [
        "update_keeps_balance_Currency", "update_succ_BA"]


def test_free_vars_and_substitute():
    f = parse_formula("all x : int, x = y + z")
    assert A.free_vars(f) == {"y", "z"}
    g = A.substitute(parse_formula("f(y, x)"), {"y": A.IntLit(1)})
    assert g == parse_formula("f(1, x)")
