"""Diagnostics and the exception hierarchy used across the toolchain."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class Span:
    path: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.path}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str
    span: Optional[Span] = None

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        return f"{where}{self.severity}: {self.message}"


class GfmlError(Exception):
    """Base class; ``kind`` is the stable error name reported by the CLI."""

    def __init__(self, message: str, span: Optional[Span] = None):
        super().__init__(message)
        self.message = message
        self.span = span

    @property
    def kind(self) -> str:
        return type(self).__name__

    @property
    def diagnostics(self) -> list[Diagnostic]:
        return [Diagnostic("error", f"{self.kind}: {self.message}", self.span)]


class ParseError(GfmlError):
    def __init__(self, diagnostics: list[Diagnostic]):
        first = diagnostics[0]
        super().__init__(first.message, first.span)
        self._diagnostics = list(diagnostics)

    @property
    def diagnostics(self) -> list[Diagnostic]:
        return list(self._diagnostics)


# resolution
class UnresolvedName(GfmlError): ...
class SignatureMismatch(GfmlError): ...
class CyclicParent(GfmlError): ...
class DuplicateName(GfmlError): ...
class BaseNotRefinable(GfmlError): ...


# typing
class TypeMismatch(GfmlError): ...
class UnboundVariable(GfmlError): ...
class ProjectionOnNonProduct(GfmlError): ...
class ParentCallArity(GfmlError): ...
class MissingRootDefine(GfmlError): ...
class RepresentationError(GfmlError): ...


# feature models
class UnknownFeature(GfmlError): ...
class TooManyFeatures(GfmlError): ...
class DiagramError(GfmlError): ...


# composition
class DistinctParents(GfmlError): ...
class IncompatibleRedefinition(GfmlError): ...
class NameClash(GfmlError): ...
class OrderInvalid(GfmlError): ...


# emission
class UnemittableProof(GfmlError): ...


# evaluation
class StuckProjection(GfmlError): ...
class DomainTooLarge(GfmlError): ...
class UnboundConstant(GfmlError): ...


# pipeline
class InvalidConfiguration(GfmlError):
    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = list(violations)

    @property
    def diagnostics(self) -> list[Diagnostic]:
        if not self.violations:
            return super().diagnostics
        return [Diagnostic("error", f"{self.kind}: {v}") for v in self.violations]


class ManifestError(GfmlError): ...
