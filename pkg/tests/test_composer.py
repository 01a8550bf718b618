import itertools
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from gfmlc import ast as A
from gfmlc.composer import compose2, compose_all, flatten_chain
from gfmlc.errors import (
    DistinctParents, IncompatibleRedefinition, NameClash, OrderInvalid, RepresentationError,
)
from gfmlc.evaluator import Domain, Evaluator, values_of
from gfmlc.parser import load_module, parse_formula, parse_module, print_module
from gfmlc.project import Project
from gfmlc.resolve import resolve, split_universals
from gfmlc.typecheck import check_chain, unfold_representation

from conftest import BINDING, FIXTURES


def refining(m, name):
    p = m.property(name)
    assert isinstance(p.body, A.Refinement)
    return p.body


def labels(m, name):
    return [x.label for x in refining(m, name).premises]


def hint_names(m, prop):
    return [h.name.name for h in m.proof(prop).hints if isinstance(h, A.ByProperty)]


@pytest.fixture(scope="module")
def ba(modules):
    return resolve(modules["BA"])


@pytest.fixture(scope="module")
def ll_dl(modules, ba):
    return compose2(modules["LL"], modules["DL"], ba, modules)


@pytest.fixture(scope="module")
def dl_ll(modules, ba):
    return compose2(modules["DL"], modules["LL"], ba, modules)


def test_ll_dl_worked_example(ll_dl):
    assert ll_dl.name == "LL_DL"
    assert ll_dl.parent == "BA"
    assert ll_dl.components == ("LL", "DL")
    assert labels(ll_dl, "update_succ_LL_DL") == ["H2", "H1"]
    assert refining(ll_dl, "update_succ_LL_DL").base == A.QualName("BA", "update_succ_BA")
    hints = hint_names(ll_dl, "update_succ_LL_DL")
    assert "update_succ_DL" in hints and "update_succ_BA" in hints


def test_reversed_order_mirrors_premises(dl_ll):
    assert dl_ll.name == "DL_LL"
    assert labels(dl_ll, "update_succ_DL_LL") == ["H1", "H2"]


def test_premise_multiset_is_order_independent(ll_dl, dl_ll):
    a = refining(ll_dl, "update_succ_LL_DL")
    b = refining(dl_ll, "update_succ_DL_LL")
    assert Counter(a.premises) == Counter(b.premises)
    assert Counter(a.conclusions) == Counter(b.conclusions)


def test_hints_have_no_duplicates(ll_dl):
    hints = ll_dl.proof("update_succ_LL_DL").hints
    assert len(hints) == len(set(hints))


def test_unshared_properties_carried(ll_dl, modules):
    assert ll_dl.property("update_no_succ_LL") == modules["LL"].property("update_no_succ_LL")
    assert ll_dl.signature("limit_low") and ll_dl.signature("limit_withdraw")


def test_merged_update_chains_both_guards(ll_dl):
    (update,) = [d for d in ll_dl.definitions if d.name == "update"]
    text = print_module(ll_dl)
    assert update.redefine
    assert "limit_withdraw" in text and "limit_low" in text
    assert text.count("parent!update") >= 1


def test_neutral_module_is_identity(modules, ba):
    plain = load_module(FIXTURES / "neutral.gfm")
    for c in (compose2(plain, modules["DL"], ba, modules),
              compose2(modules["DL"], plain, ba, modules)):
        dl = modules["DL"]
        assert c.properties == dl.properties
        assert c.definitions == dl.definitions
        assert c.signatures == dl.signatures
        assert c.representation == dl.representation
        assert c.proofs == dl.proofs


def test_neutral_module_evaluator_equal(modules, ba):
    plain = load_module(FIXTURES / "neutral.gfm")
    comps = dict(modules, Plain=plain)
    c = compose2(plain, modules["DL"], ba, comps)
    t_c = check_chain((modules["BA"], c), comps)
    t_dl = check_chain((modules["BA"], modules["DL"]))
    dom = Domain(-4, 4)
    ec, ed = Evaluator(t_c, BINDING, dom), Evaluator(t_dl, BINDING, dom)
    for x in values_of(A.SelfType(), dom, t_dl.representation):
        for a in dom.ints():
            assert ec.call("update", x, a) == ed.call("update", x, a)
        assert ec.call("balance", x) == ed.call("balance", x)


def test_single_child_is_itself(modules):
    p = compose_all(["BA", "DL"], None, modules)
    assert p.module == modules["DL"]
    assert p.ancestors == (modules["BA"],)


def test_root_only(modules):
    p = compose_all(["BA"], None, modules)
    assert p.module == modules["BA"] and p.ancestors == ()


def test_chain_flattening(modules):
    p = compose_all(["BA", "Currency", "CurrencyExchange"], None, modules)
    m = p.module
    assert m.parent == "BA"
    assert m.components == ("Currency", "CurrencyExchange")
    assert {x.name for x in m.properties} == {
        "update_keeps_balance_Currency", "exchange_monotone_CurrencyExchange"}
    original = (modules["BA"], modules["Currency"], modules["CurrencyExchange"])
    assert unfold_representation(p.chain) == unfold_representation(original)
    check_chain(p.chain, p.components)


def test_chain_flattening_requires_child(modules):
    with pytest.raises(OrderInvalid):
        flatten_chain(modules["Currency"], modules["DL"], (modules["BA"],), modules)


def test_representation_coherence(modules, ll_dl, dl_ll):
    ba = modules["BA"]
    for c, (x, y) in ((ll_dl, ("LL", "DL")), (dl_ll, ("DL", "LL"))):
        folded = unfold_representation((ba, modules[x], modules[y].__class__(
            y, x, representation=modules[y].representation)))
        assert unfold_representation((ba, c)) == folded


def test_distinct_parents(modules, ba):
    with pytest.raises(DistinctParents):
        compose2(modules["DL"], modules["CurrencyExchange"], ba, modules)


def test_incompatible_redefinition(modules, ba):
    greedy = parse_module(
        "module Greedy from BA\nrepresentation = parent;\n"
        "redefine update(x, a) = (x, no_success);\n")
    with pytest.raises(IncompatibleRedefinition):
        compose2(modules["LL"], greedy, ba, dict(modules, Greedy=greedy))


def test_name_clash(modules, ba):
    other = parse_module("module Other from BA\nsig limit_low : bool;\n")
    with pytest.raises(NameClash):
        compose2(modules["LL"], other, ba, dict(modules, Other=other))
    twin = parse_module(
        "module Twin from BA\nproperty update_no_succ_LL : all x : int, x = x;\n")
    with pytest.raises(NameClash):
        compose2(modules["LL"], twin, ba, dict(modules, Twin=twin))


def test_two_extensions_rejected(modules, ba):
    ext = parse_module("module Ext from BA\nrepresentation = bool * parent;\n")
    with pytest.raises(RepresentationError):
        compose2(modules["DL"], ext, ba, dict(modules, Ext=ext))


@pytest.mark.parametrize("order", [
    ["DL", "BA"], ["BA", "DL", "DL"], ["BA"], [], ["BA", "CurrencyExchange", "Currency"],
])
def test_order_invalid(modules, order):
    sel = sorted(set(order) | {"BA", "DL"}) if order != ["BA", "CurrencyExchange", "Currency"] \
        else ["BA", "Currency", "CurrencyExchange"]
    with pytest.raises(OrderInvalid):
        compose_all(sel, order, modules)


def test_every_configuration_composes_and_checks():
    project = Project.bundled()
    names = []
    for sel in project.configurations():
        product = project.compose(sel)
        product.resolve()
        project.typed(product)
        assert parse_module(print_module(product.module)) == product.module
        names.append(product.name)
    assert len(set(names)) == 12
    assert "LL_DL" in names


def test_three_siblings_fold_left(modules):
    p = compose_all(["BA", "LL", "DL", "Currency"], ["BA", "LL", "DL", "Currency"], modules)
    assert p.name == "LL_DL_Currency"
    assert p.module.components == ("LL", "DL", "Currency")


def test_order_equivalence_under_evaluator():
    project = Project.bundled()
    ab = project.typed(project.compose(["BA", "LL", "DL"], ["BA", "LL", "DL"]))
    ba_ = project.typed(project.compose(["BA", "LL", "DL"], ["BA", "DL", "LL"]))
    fa = dict(ab.obligations)["update_succ_LL_DL"]
    fb = dict(ba_.obligations)["update_succ_DL_LL"]
    qa, body_a = split_universals(fa)
    qb, body_b = split_universals(fb)
    assert [(q.kind, q.names, q.type) for q in qa] == [(q.kind, q.names, q.type) for q in qb]
    iff = A.BinOp("=", body_a, body_b)  # equal truth values

    def close(body):
        for q in reversed(qa):
            body = A.Quant(q.kind, q.names, q.type, body)
        return body

    # every instantiation on a small domain, then the reachable ones on the full domain
    assert Evaluator(ab, BINDING, Domain(-6, -1)).check(close(iff))
    pinned = close(A.BinOp("->", parse_formula("r = update(x, a)"), iff))
    for t in (ab, ba_):
        assert Evaluator(t, BINDING, Domain(-10, 10)).check(pinned)


# -- generated guard modules ----------------------------------------------------


def guard_module(name: str, k: int) -> A.FeatureModule:
    """A sibling of BA that refuses any amount below ``k``."""
    return parse_module(f"""
module {name} from BA
property update_succ_{name} refines BA!update_succ_BA
  premise G{name} : r = update(x, a) -> a >= {k};
representation = parent;
redefine update(x, a) = if a < {k} then (x, no_success) else parent!update(x, a);
proof of update_succ_{name} by definition of update by property BA!update_succ_BA;
""")


@settings(max_examples=25, deadline=None)
@given(st.integers(-6, 6), st.integers(-6, 6))
def test_generated_siblings_commute(modules, k1, k2):
    g1, g2 = guard_module("GA", k1), guard_module("GB", k2)
    comps = {"GA": g1, "GB": g2}
    ba = resolve(modules["BA"])
    ab, ba_ = compose2(g1, g2, ba, comps), compose2(g2, g1, ba, comps)
    pa = refining(ab, "update_succ_GA_GB")
    pb = refining(ba_, "update_succ_GB_GA")
    assert Counter(pa.premises) == Counter(pb.premises)
    dom = Domain(-8, 8)
    ta = check_chain((modules["BA"], ab), comps)
    tb = check_chain((modules["BA"], ba_), comps)
    ea, eb = Evaluator(ta, BINDING, dom), Evaluator(tb, BINDING, dom)
    for x, a in itertools.product(dom.ints(), dom.ints()):
        assert ea.call("update", x, a) == eb.call("update", x, a)
    for t in (ta, tb):
        ev = Evaluator(t, BINDING, dom)
        for _, f in t.obligations:
            assert ev.check(f)
