"""Project manifests and the check/compose/translate/verify pipeline."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from . import ast as A
from .composer import Product, compose_all
from .errors import (
    Diagnostic, InvalidConfiguration, ManifestError, ParseError, Span, UnresolvedName,
)
from .evaluator import DEFAULT_CAP, CheckResult, Domain, Evaluator
from .featuremodel import FeatureDiagram, enumerate_valid, load_diagram, validate
from .focalize import emit_program, lint_program
from .parser import SourceFile, load_module, parse_module, tokenize
from .typecheck import TypedModule, check_chain

CORPUS = Path(__file__).resolve().parent / "corpus"
MANIFEST_NAME = "gfmlc.json"


def bundled_corpus() -> Path:
    return CORPUS


@dataclass
class Manifest:
    base: Path
    diagram: Path
    search_paths: list[Path] = field(default_factory=list)
    order: Union[str, list[str]] = "preorder"
    bindings: dict[str, object] = field(default_factory=dict)
    out: Path = Path("build")
    domain: Domain = Domain(-10, 10)

    @classmethod
    def from_dict(cls, data: Mapping, base: Path) -> "Manifest":
        try:
            diagram = base / data["diagram"]
        except KeyError:
            raise ManifestError("manifest needs a 'diagram' entry") from None
        if not diagram.is_file():
            raise ManifestError(f"diagram {diagram} does not exist")
        paths = [base / p for p in data.get("search_paths", ["."])]
        for p in paths:
            if not p.is_dir():
                raise ManifestError(f"search path {p} is not a directory")
        order = data.get("order", "preorder")
        if order != "preorder" and not (isinstance(order, list) and all(isinstance(x, str) for x in order)):
            raise ManifestError("'order' must be \"preorder\" or a list of feature names")
        domain = Domain.parse(data["domain"]) if "domain" in data else Domain(-10, 10)
        return cls(base, diagram, paths, order, dict(data.get("bindings", {})),
                   base / data.get("out", "build"), domain)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Manifest":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"cannot read manifest {path}: {exc}") from None
        return cls.from_dict(data, path.resolve().parent)

    @classmethod
    def bundled(cls) -> "Manifest":
        return cls.load(CORPUS / MANIFEST_NAME)


def is_blank(text: str) -> bool:
    """True when a source has nothing but whitespace and comments."""
    return len(tokenize(text)) == 1


@dataclass(frozen=True)
class PropertyReport:
    name: str
    result: CheckResult
    seconds: float

    @property
    def holds(self) -> bool:
        return bool(self.result)


class Project:
    """A feature diagram plus the modules it names, with per-name overrides."""

    def __init__(self, manifest: Manifest, overrides: Optional[Mapping[str, A.FeatureModule]] = None):
        self.manifest = manifest
        self.diagram: FeatureDiagram = load_diagram(manifest.diagram)
        self._modules: dict[str, A.FeatureModule] = dict(overrides or {})

    @classmethod
    def bundled(cls, overrides=None) -> "Project":
        return cls(Manifest.bundled(), overrides)

    def add(self, module: A.FeatureModule):
        self._modules[module.name] = module

    def module(self, name: str) -> A.FeatureModule:
        if name in self._modules:
            return self._modules[name]
        candidates = []
        rel = self.diagram.module_of.get(name)
        if rel is not None:
            candidates.append(self.manifest.diagram.parent / rel)
        candidates += [p / f"{name.lower()}.gfm" for p in self.manifest.search_paths]
        for path in candidates:
            if path.is_file():
                m = load_module(path)
                if m.name != name:
                    raise UnresolvedName(f"{path} holds module {m.name}, expected {name}")
                self._modules[name] = m
                return m
        raise UnresolvedName(f"no module named {name!r} in the search paths")

    def ancestors(self, module: A.FeatureModule) -> tuple[A.FeatureModule, ...]:
        out = []
        seen = {module.name}
        parent = module.parent
        while parent is not None:
            if parent in seen:
                break  # the resolver reports the cycle
            seen.add(parent)
            m = self.module(parent)
            out.append(m)
            parent = m.parent
        return tuple(reversed(out))

    def check(self, module: A.FeatureModule) -> TypedModule:
        return check_chain(self.ancestors(module) + (module,))

    # -- configurations
    def order_for(self, selection: Sequence[str], order: Optional[Sequence[str]] = None) -> list[str]:
        if order:
            return list(order)
        policy = self.manifest.order
        if policy == "preorder":
            return self.diagram.default_order(selection)
        chosen = set(selection)
        listed = [f for f in policy if f in chosen]
        return listed + [f for f in self.diagram.default_order(selection) if f not in listed]

    def configurations(self) -> list[list[str]]:
        return [list(c.selected) for c in enumerate_valid(self.diagram)]

    def compose(self, selection: Sequence[str], order: Optional[Sequence[str]] = None) -> Product:
        violations = validate(self.diagram, selection)
        if violations:
            raise InvalidConfiguration(
                f"configuration {','.join(selection) or '(empty)'} is not valid", violations)
        ordered = self.order_for(selection, order)
        modules = {n: self.module(n) for n in selection}
        return compose_all(list(selection), ordered, modules)

    def typed(self, product: Product) -> TypedModule:
        return check_chain(product.chain, product.components)

    def binding(self, extra: Optional[Mapping[str, object]] = None) -> dict[str, object]:
        out = dict(self.manifest.bindings)
        out.update(extra or {})
        return out

    def emit(self, typed: TypedModule, binding=None) -> list[tuple[str, str]]:
        files = emit_program(typed, self.binding(binding))
        problems = lint_program(files)
        if problems:
            raise LintFailure(problems)
        return files

    def verify(self, typed: TypedModule, binding=None, domain: Optional[Domain] = None,
               cap: int = DEFAULT_CAP) -> list[PropertyReport]:
        ev = Evaluator(typed, self.binding(binding), domain or self.manifest.domain, cap)
        out = []
        for name, formula in typed.obligations:
            start = time.perf_counter()
            result = ev.check(formula)
            out.append(PropertyReport(name, result, time.perf_counter() - start))
        return out


class LintFailure(Exception):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


def load_source(path: Union[str, Path]) -> Optional[A.FeatureModule]:
    """Parse a module file; ``None`` for a file with no module in it."""
    try:
        src = SourceFile.read(path)
    except UnicodeDecodeError as exc:
        raise ParseError([Diagnostic(
            "error", f"input is not valid UTF-8 ({exc.reason})", Span(str(path), 1, 1))]) from None
    if is_blank(src.text):
        return None
    return parse_module(src)

