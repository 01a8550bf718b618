"""Simple feature diagrams: optional/mandatory children, implies and excludes."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .errors import DiagramError, Span, TooManyFeatures, UnknownFeature

MAX_FEATURES = 20


@dataclass(frozen=True)
class Implies:
    a: str
    b: str


@dataclass(frozen=True)
class Excludes:
    a: str
    b: str


Constraint = Union[Implies, Excludes]


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.message}"


@dataclass(frozen=True)
class Configuration:
    selected: tuple[str, ...]

    def __contains__(self, name: str) -> bool:
        return name in self.selected


@dataclass
class FeatureDiagram:
    root: str
    features: list[str] = field(default_factory=list)
    parent_of: dict[str, str] = field(default_factory=dict)
    optional: set[str] = field(default_factory=set)
    constraints: list[Constraint] = field(default_factory=list)
    module_of: dict[str, str] = field(default_factory=dict)
    source: Optional[Path] = None

    def __post_init__(self):
        if self.root not in self.features:
            self.features.insert(0, self.root)
        self._check()

    def _check(self):
        known = set(self.features)
        if len(known) != len(self.features):
            raise DiagramError("a feature is declared twice")
        if self.root in self.parent_of:
            raise DiagramError(f"root {self.root} cannot have a parent")
        for f in self.features:
            if f != self.root and f not in self.parent_of:
                raise DiagramError(f"feature {f} is neither the root nor a child")
        for child, parent in self.parent_of.items():
            if child not in known or parent not in known:
                raise DiagramError(f"child-of edge {child} -> {parent} names an unknown feature")
        for f in self.features:
            seen, cur = set(), f
            while cur != self.root:
                if cur in seen:
                    raise DiagramError(f"feature {f} is on a parent cycle")
                seen.add(cur)
                cur = self.parent_of[cur]
        for c in self.constraints:
            for end in (c.a, c.b):
                if end not in known:
                    raise DiagramError(f"constraint mentions unknown feature {end}")

    def children(self, name: str) -> list[str]:
        return [f for f in self.features if self.parent_of.get(f) == name]

    def preorder(self) -> list[str]:
        out: list[str] = []

        def visit(n: str):
            out.append(n)
            for c in self.children(n):
                visit(c)

        visit(self.root)
        return out

    def default_order(self, selection: Iterable[str]) -> list[str]:
        """Preorder of the tree restricted to ``selection``."""
        chosen = set(selection)
        for f in chosen:
            if f not in self.parent_of and f != self.root:
                raise UnknownFeature(f"unknown feature {f!r}")
        return [f for f in self.preorder() if f in chosen]


def parse_diagram(text: str, path: str = "<diagram>") -> FeatureDiagram:
    root = None
    features: list[str] = []
    parents: dict[str, str] = {}
    optional: set[str] = set()
    constraints: list[Constraint] = []
    modules: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("--", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        where = Span(path, lineno, 1)
        head = words[0]
        if head in ("implies", "excludes"):
            if len(words) != 3:
                raise DiagramError(f"'{head}' takes two features", where)
            constraints.append((Implies if head == "implies" else Excludes)(words[1], words[2]))
            continue
        if head != "feature" or len(words) < 2:
            raise DiagramError(f"cannot read line: {raw.strip()!r}", where)
        name, rest = words[1], words[2:]
        i = 0
        while i < len(rest):
            w = rest[i]
            if w == "optional":
                optional.add(name)
                i += 1
            elif w in ("child-of", "module") and i + 1 < len(rest):
                (parents if w == "child-of" else modules)[name] = rest[i + 1]
                i += 2
            else:
                raise DiagramError(f"unexpected {w!r} in feature {name}", where)
        if name not in parents:
            if root is not None:
                raise DiagramError(f"second root {name} (root is {root})", where)
            root = name
        features.append(name)
    if root is None:
        raise DiagramError(f"{path}: no root feature")
    if root in optional:
        raise DiagramError(f"root {root} cannot be optional")
    return FeatureDiagram(root, features, parents, optional, constraints, modules)


def load_diagram(path: Union[str, Path]) -> FeatureDiagram:
    path = Path(path)
    d = parse_diagram(path.read_text(encoding="utf-8"), str(path))
    d.source = path
    return d


def validate(diagram: FeatureDiagram, configuration: Union[Configuration, Sequence[str]]
             ) -> list[Violation]:
    """Violated rules, in a fixed order; an empty list means valid."""
    selected = configuration.selected if isinstance(configuration, Configuration) \
        else tuple(configuration)
    known = set(diagram.features)
    for f in selected:
        if f not in known:
            raise UnknownFeature(f"unknown feature {f!r}")
    chosen = set(selected)
    out: list[Violation] = []
    if diagram.root not in chosen:
        out.append(Violation("root-required", f"root feature {diagram.root} must be selected"))
    for f in diagram.features:
        parent = diagram.parent_of.get(f)
        if f in chosen and parent is not None and parent not in chosen:
            out.append(Violation("child-without-parent", f"{f} is selected without its parent {parent}"))
        if parent in chosen and f not in diagram.optional and f not in chosen:
            out.append(Violation("mandatory-missing", f"{f} is mandatory under {parent}"))
    for c in diagram.constraints:
        if isinstance(c, Implies) and c.a in chosen and c.b not in chosen:
            out.append(Violation("implies", f"{c.a} requires {c.b}"))
        if isinstance(c, Excludes) and c.a in chosen and c.b in chosen:
            out.append(Violation("excludes", f"{c.a} and {c.b} cannot be selected together"))
    return out


def enumerate_valid(diagram: FeatureDiagram) -> list[Configuration]:
    """All valid configurations, each in preorder.

    Configurations are listed by size, then by the preorder positions of
    their features.
    """
    if len(diagram.features) > MAX_FEATURES:
        raise TooManyFeatures(
            f"{len(diagram.features)} features; exhaustive enumeration stops at {MAX_FEATURES}")
    order = diagram.preorder()
    pos = {f: i for i, f in enumerate(order)}
    others = order[1:]
    found = []
    for mask in itertools.product((False, True), repeat=len(others)):
        chosen = [diagram.root] + [f for f, on in zip(others, mask) if on]
        if not validate(diagram, chosen):
            found.append(tuple(chosen))
    found.sort(key=lambda c: (len(c), [pos[f] for f in c]))
    return [Configuration(c) for c in found]
