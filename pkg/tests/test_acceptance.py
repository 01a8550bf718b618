"""Acceptance criteria 1-8.  Each test prints one PASS/FAIL line with its
runtime against the pinned limit, whatever pytest's capture mode."""

import itertools
import json
import os
import pprint
import random
import time
from collections import Counter
from contextlib import contextmanager

import pytest

from gfmlc import ast as A
from gfmlc.cli import main
from gfmlc.composer import compose2
from gfmlc.evaluator import Counterexample, Domain, Evaluator, apply_conversion
from gfmlc.featuremodel import Excludes, Implies, load_diagram
from gfmlc.focalize import lint_program, parse_fcl
from gfmlc.parser import load_module, parse_formula, parse_module, print_module
from gfmlc.project import Project
from gfmlc.resolve import resolve, split_universals
from gfmlc.typecheck import check_chain

from conftest import BINDING, CORPUS, CORPUS_FILES, GOLDEN, MUTANTS

UPDATE = os.environ.get("GFMLC_UPDATE_GOLDEN")

H1 = ("r = update(x,a) -> (a <= 0) -> (all n_w w : int, all n_s : S, withdraw (x) = w "
      "&& w + a = n_w && second(BA!update(x,a)) = n_s -> (n_w >= limit_withdraw) && (n_s = success))")
H2 = "r = update(x,a) -> ((a >= 0) || (a <= limit_low))"

MUTANT_CONFIGS = {
    "dl_no_bookkeeping": ["BA", "DL"],
    "dl_strict_limit": ["BA", "DL"],
    "ba_wrong_balance": ["BA"],
    "ba_off_by_one": ["BA"],
    "ll_no_guard": ["BA", "LL"],
    "ll_reversed_guard": ["BA", "LL"],
    "currencyexchange_decreasing": ["BA", "Currency", "CurrencyExchange"],
}


@contextmanager
def criterion(capsys, number: int, title: str, limit: float):
    start = time.perf_counter()
    status = "FAIL"
    try:
        yield
        elapsed = time.perf_counter() - start
        assert elapsed < limit, f"took {elapsed:.2f}s, limit {limit}s"
        status = "PASS"
    finally:
        elapsed = time.perf_counter() - start
        with capsys.disabled():
            print(f"\ncriterion {number} {status}: {title} ({elapsed:.2f}s, limit {limit:g}s)")


def premise_labels(m, prop):
    return [p.label for p in m.property(prop).body.premises]


def test_criterion_1_corpus_fidelity(capsys):
    with criterion(capsys, 1, "corpus fidelity", 1.0):
        mods = {n: load_module(CORPUS / f"{n}.gfm") for n in ("ba", "dl", "ll")}
        for n, m in mods.items():
            path = GOLDEN / f"ast_{n}.txt"
            text = pprint.pformat(m, width=100) + "\n"
            if UPDATE:
                path.write_text(text, encoding="utf-8")
            assert text == path.read_text(encoding="utf-8"), n
        (h1,) = mods["dl"].property("update_succ_DL").body.premises
        assert (h1.label, h1.formula) == ("H1", parse_formula(H1))
        (h2,) = mods["ll"].property("update_succ_LL").body.premises
        assert (h2.label, h2.formula) == ("H2", parse_formula(H2))
        assert mods["ba"].representation == A.RepDefine(A.IntType())
        assert mods["dl"].representation == A.RepExtend((A.IntType(),))


def test_criterion_2_translation_scheme(capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    with criterion(capsys, 2, "translation scheme", 1.0):
        texts = []
        for run in ("a", "b"):
            assert main(["translate", str(CORPUS / "ba.gfm"), str(CORPUS / "dl.gfm"),
                         "--out", run]) == 0
            texts.append({p.name: p.read_bytes() for p in (tmp_path / run).iterdir()})
        capsys.readouterr()
        assert texts[0] == texts[1]
        files = [(n, texts[0][n].decode()) for n in ("ba.fcl", "dl.fcl")]
        assert lint_program(files) == []
        species = {s.name: s for _, t in files for s in parse_fcl(t)[0]}
        assert {"Inh_BA", "Reu_BA", "Imp_BA", "Inh_DL", "Reu_DL", "Imp_DL"} <= set(species)
        assert any(i.startswith("logical let l_cons_update_succ_BA")
                   for i in species["Inh_BA"].items)
        assert species["Inh_DL"].inherits == ["Inh_BA"]
        assert species["Imp_DL"].parameters == [("BA", "Reu_BA")]
        (proof,) = [i for i in species["Imp_DL"].items if i.startswith("proof of update_succ_DL")]
        assert "BA!update_succ_BA" in proof and "l_cons_update_succ_BA" in proof


def test_criterion_3_composition_example(capsys):
    with criterion(capsys, 3, "composition worked example", 1.0):
        project = Project.bundled()
        sel = ["BA", "LL", "DL"]
        ab = project.compose(sel, ["BA", "LL", "DL"])
        ba = project.compose(sel, ["BA", "DL", "LL"])
        assert ab.name == "LL_DL" and ba.name == "DL_LL"
        assert premise_labels(ab.module, "update_succ_LL_DL") == ["H2", "H1"]
        assert premise_labels(ba.module, "update_succ_DL_LL") == ["H1", "H2"]
        hints = {h.name.name for h in ab.module.proof("update_succ_LL_DL").hints
                 if isinstance(h, A.ByProperty)}
        assert {"update_succ_DL", "update_succ_BA"} <= hints

        ta, tb = project.typed(ab), project.typed(ba)
        qa, fa = split_universals(dict(ta.obligations)["update_succ_LL_DL"])
        _, fb = split_universals(dict(tb.obligations)["update_succ_DL_LL"])
        same = A.BinOp("=", fa, fb)  # equal truth values
        same = A.BinOp("->", parse_formula("r = update(x, a)"), same)
        for q in reversed(qa):
            same = A.Quant(q.kind, q.names, q.type, same)
        assert Evaluator(ta, BINDING, Domain(-10, 10)).check(same)


def brute_force_configs(d):
    out = set()
    for bits in itertools.product([False, True], repeat=len(d.features)):
        s = {f for f, b in zip(d.features, bits) if b}
        ok = d.root in s
        ok = ok and all(d.parent_of[f] in s for f in s if f != d.root)
        ok = ok and all(f in s for f in d.features
                        if f != d.root and f not in d.optional and d.parent_of[f] in s)
        for c in d.constraints:
            if isinstance(c, Implies):
                ok = ok and (c.a not in s or c.b in s)
            elif isinstance(c, Excludes):
                ok = ok and not (c.a in s and c.b in s)
        if ok:
            out.add(frozenset(s))
    return out


def test_criterion_4_enumeration(capsys):
    with criterion(capsys, 4, "configuration enumeration", 1.0):
        assert main(["list-configs", "--json"]) == 0
        data = json.loads(capsys.readouterr().out)
        expected = brute_force_configs(load_diagram(CORPUS / "bank.fdiag"))
        assert len(data["configs"]) == 12 == len(expected)
        assert {frozenset(c) for c in data["configs"]} == expected


def pipeline(project):
    out = {}
    for name in CORPUS_FILES:
        project.check(load_module(CORPUS / f"{name}.gfm"))
    for sel in project.configurations():
        product = project.compose(sel)
        typed = project.typed(product)
        files = project.emit(typed)
        assert lint_program(files) == []
        out[tuple(sel)] = files
    return out


def test_criterion_5_pipeline_closure(capsys):
    with criterion(capsys, 5, "pipeline closure", 10.0):
        first = pipeline(Project.bundled())
        second = pipeline(Project.bundled())
        assert len(first) == 12
        assert first == second


def test_criterion_6_bounded_correctness(capsys):
    with criterion(capsys, 6, "bounded correctness", 60.0):
        project = Project.bundled()
        assert project.manifest.domain == Domain(-10, 10)
        assert project.binding() == BINDING
        for sel in project.configurations():
            for r in project.verify(project.typed(project.compose(sel))):
                assert r.holds, (sel, r.name, r.result)
        caught = 0
        for name, sel in MUTANT_CONFIGS.items():
            m = load_module(MUTANTS / f"{name}.gfm")
            mutated = Project.bundled({m.name: m})
            reports = mutated.verify(mutated.typed(mutated.compose(sel)))
            if any(isinstance(r.result, Counterexample) for r in reports):
                caught += 1
        assert caught == len(MUTANT_CONFIGS) >= 5


def test_criterion_7_round_trip(capsys):
    with criterion(capsys, 7, "round trip", 1.0):
        project = Project.bundled()
        modules = [load_module(CORPUS / f"{n}.gfm") for n in CORPUS_FILES]
        modules += [project.compose(sel).module for sel in project.configurations()]
        for m in modules:
            assert parse_module(print_module(m)) == m, m.name


def test_criterion_8_invariants(capsys):
    with criterion(capsys, 8, "invariant suites", 30.0):
        project = Project.bundled()
        products = [project.typed(project.compose(sel)) for sel in project.configurations()]

        # redefinitions keep the signature they redefine
        for typed in products:
            for t in typed.chain:
                r = t.resolved
                for d in t.module.definitions:
                    owner, sig = r.signatures[d.name]
                    assert len(d.params) == len(sig.params), (t.name, d.name)
                    td = t.definitions[d.name]
                    assert [ty for _, ty in td.params] == [
                        concrete(ty, t.representation) for ty in sig.params]
                    assert td.result == concrete(sig.result, t.representation)
                    if d.redefine:
                        assert owner != t.name

        # carried functions commute with conversion
        rng = random.Random(8)
        samples = 0
        deep = [t for t in products if t.ancestors]
        while samples < 1000:
            typed = rng.choice(deep)
            ev = Evaluator(typed, BINDING)
            v = sample(typed.representation, rng)
            for anc in typed.ancestors:
                path = typed.conversion(anc.name)
                for name in typed.lifted:
                    if typed.resolved.signatures[name][1].params == (A.SelfType(),):
                        assert ev.call(name, v) == ev.function(anc.name, name)(
                            apply_conversion(v, path))
            samples += 1

        # premise multisets do not depend on the order
        mods = {n: load_module(CORPUS / f"{n.lower()}.gfm") for n in ("BA", "LL", "DL", "Currency")}
        ba = resolve(mods["BA"])
        for x, y in itertools.combinations(["LL", "DL", "Currency"], 2):
            xy = compose2(mods[x], mods[y], ba, mods)
            yx = compose2(mods[y], mods[x], ba, mods)
            refs = lambda m: Counter(p for q in m.properties if isinstance(q.body, A.Refinement)
                                     for p in q.body.premises)
            assert refs(xy) == refs(yx)
            check_chain((mods["BA"], xy), mods)


def concrete(t, rep):
    if isinstance(t, A.SelfType):
        return rep
    if isinstance(t, A.ProductType):
        return A.ProductType(tuple(concrete(c, rep) for c in t.items))
    return t


def sample(t, rng):
    if isinstance(t, A.IntType):
        return rng.randint(-1000, 1000)
    if isinstance(t, A.StatusType):
        return rng.choice(list(A.Status))
    if isinstance(t, A.BoolType):
        return rng.random() < 0.5
    return tuple(sample(c, rng) for c in t.items)
