import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from gfmlc import ast as A
from gfmlc.errors import DomainTooLarge, StuckProjection, UnboundConstant
from gfmlc.evaluator import (
    Counterexample, Domain, Evaluator, Holds, apply_conversion, check_formula, eval_fn,
    format_value, values_of,
)
from gfmlc.parser import load_module, parse_formula
from gfmlc.project import Project
from gfmlc.typecheck import check_chain

from conftest import BINDING, MUTANTS

S, N = A.Status.SUCCESS, A.Status.NO_SUCCESS


@pytest.fixture(scope="module")
def t_ba(modules):
    return check_chain((modules["BA"],))


@pytest.fixture(scope="module")
def t_dl(modules):
    return check_chain((modules["BA"], modules["DL"]))


def test_balance_at_root(t_ba):
    assert eval_fn(t_ba, "balance", [100], BINDING) == 100


def test_withdraw_is_first_component(t_dl):
    assert eval_fn(t_dl, "withdraw", [(-30, 100)], BINDING) == -30


def test_constant_reads_binding(t_dl):
    assert eval_fn(t_dl, "limit_withdraw", [], BINDING) == -7
    assert eval_fn(t_dl, "over", [], {**BINDING, "over": 3}) == 3


def test_root_update(t_ba):
    assert eval_fn(t_ba, "update", [0, -3], BINDING) == (-3, S)
    assert eval_fn(t_ba, "update", [0, -6], BINDING) == (0, N)


def test_dl_update_keeps_books(t_dl):
    assert eval_fn(t_dl, "update", [(0, 0), -3], BINDING) == ((-3, -3), S)
    # the daily limit refuses before the overdraft floor is consulted
    assert eval_fn(t_dl, "update", [(-5, 10), -3], BINDING) == ((-5, 10), N)
    # the parent refuses: books still move, balance does not
    assert eval_fn(t_dl, "update", [(0, 0), -6], BINDING) == ((-6, 0), N)


def test_lifted_balance(t_dl):
    assert eval_fn(t_dl, "balance", [(-30, 100)], BINDING) == 100


def test_update_succ_ba_holds(t_ba):
    (formula,) = [f for n, f in t_ba.obligations if n == "update_succ_BA"]
    assert isinstance(check_formula(t_ba, formula, BINDING, Domain(-10, 10)), Holds)


def test_reflexive_equality(t_ba):
    assert check_formula(t_ba, parse_formula("all x : int, x = x"), BINDING)


def test_first_counterexample_is_lexicographic(t_ba):
    f = parse_formula("all x y : int, x + y < 3")
    dom = Domain(-2, 2)
    r = check_formula(t_ba, f, BINDING, dom)
    expected = next((x, y) for x, y in itertools.product(dom.ints(), dom.ints()) if x + y >= 3)
    assert isinstance(r, Counterexample)
    assert r.assignment == {"x": expected[0], "y": expected[1]}
    assert r == check_formula(t_ba, f, BINDING, dom)


def test_existential_and_status_quantifiers(t_ba):
    assert check_formula(t_ba, parse_formula("all s : S, s = success || s = no_success"), BINDING)
    assert check_formula(t_ba, parse_formula("all x : int, ex y : int, x + y = 0"), BINDING, Domain(-3, 3))
    assert not check_formula(t_ba, parse_formula("ex y : int, y > 100"), BINDING)


def test_one_point_rule_reaches_outside_domain(t_ba):
    f = parse_formula("all x : int, all y : int, y = x + 50 -> y > x")
    r = check_formula(t_ba, f, BINDING, Domain(-2, 2))
    assert r and r.instantiations == 5


def test_domain_too_large(t_dl):
    (f,) = [f for n, f in t_dl.obligations if n == "update_succ_DL"]
    with pytest.raises(DomainTooLarge):
        check_formula(t_dl, f, BINDING, Domain(-10, 10), cap=100)


def test_unbound_constant(t_ba):
    with pytest.raises(UnboundConstant):
        Evaluator(t_ba, {})


def test_stuck_projection():
    with pytest.raises(StuckProjection):
        apply_conversion((1, 2), [(1, 3)])
    assert apply_conversion((1, (2, 3)), [(1, 2), (0, 2)]) == 2


@pytest.mark.parametrize("lo,hi", [(1, 0), (0, 65)])
def test_domain_bounds(lo, hi):
    with pytest.raises(ValueError):
        Domain(lo, hi)


def test_values_of_self(t_dl):
    vals = values_of(A.SelfType(), Domain(0, 1), t_dl.representation)
    assert vals == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert format_value(((1, -2), N)) == "((1, -2), no_success)"


def test_every_product_property_holds():
    project = Project.bundled()
    for sel in project.configurations():
        for report in project.verify(project.typed(project.compose(sel))):
            assert report.holds, (sel, report.name, report.result)


MUTANT_CONFIGS = {
    "dl_no_bookkeeping": ["BA", "DL"],
    "dl_strict_limit": ["BA", "DL"],
    "ba_wrong_balance": ["BA"],
    "ba_off_by_one": ["BA"],
    "ll_no_guard": ["BA", "LL"],
    "ll_reversed_guard": ["BA", "LL"],
    "currencyexchange_decreasing": ["BA", "Currency", "CurrencyExchange"],
}


@pytest.mark.parametrize("mutant", sorted(MUTANT_CONFIGS))
def test_mutant_is_caught(mutant):
    m = load_module(MUTANTS / f"{mutant}.gfm")
    project = Project.bundled({m.name: m})
    reports = project.verify(project.typed(project.compose(MUTANT_CONFIGS[mutant])))
    failing = [r for r in reports if not r.holds]
    assert failing
    assert all(isinstance(r.result, Counterexample) and r.result.assignment for r in failing)


def test_mutant_fixtures_all_listed():
    assert {p.stem for p in MUTANTS.glob("*.gfm")} == set(MUTANT_CONFIGS)


def test_conversion_coherence():
    """Carried functions commute with the conversion to every ancestor."""
    project = Project.bundled()
    rng = random.Random(20261016)
    checked = 0
    for sel in project.configurations():
        typed = project.typed(project.compose(sel))
        if len(typed.chain) < 2:
            continue
        ev = Evaluator(typed, BINDING)
        for _ in range(100):
            v = _sample(typed.representation, rng)
            for anc in typed.ancestors:
                path = typed.conversion(anc.name)
                for name in typed.lifted:
                    sig = typed.resolved.signatures[name][1]
                    if sig.params != (A.SelfType(),):
                        continue
                    assert ev.call(name, v) == ev.function(anc.name, name)(apply_conversion(v, path))
                    checked += 1
    assert checked >= 1000


def _sample(t, rng):
    if isinstance(t, A.IntType):
        return rng.randint(-1000, 1000)
    if isinstance(t, A.StatusType):
        return rng.choice([S, N])
    if isinstance(t, A.BoolType):
        return rng.random() < 0.5
    return tuple(_sample(c, rng) for c in t.items)


ops = st.sampled_from(["+", "-"])


@st.composite
def arith(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(st.one_of(st.integers(-20, 20).map(str), st.sampled_from(["x", "y"])))
    return f"({draw(arith(depth - 1))} {draw(ops)} {draw(arith(depth - 1))})"


@settings(max_examples=100, deadline=None)
@given(arith(), arith())
def test_arithmetic_agrees_with_python(t_ba, left, right):
    f = parse_formula(f"all x y : int, {left} <= {right}")
    dom = Domain(-2, 2)
    expected = next(({"x": x, "y": y} for x, y in itertools.product(dom.ints(), dom.ints())
                     if not eval(left, {}, {"x": x, "y": y}) <= eval(right, {}, {"x": x, "y": y})),
                    None)
    r = check_formula(t_ba, f, BINDING, dom)
    assert (r.assignment if isinstance(r, Counterexample) else None) == expected
