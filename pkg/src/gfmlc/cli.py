"""Command-line driver: ``gfmlc check|translate|compose|build-product|verify|list-configs``.

Exit codes: 0 success, 1 user or input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import ast as A
from .errors import GfmlError
from .evaluator import Counterexample, Domain, format_value
from .focalize import run_focalizec, write_program
from .parser import print_module
from .project import MANIFEST_NAME, LintFailure, Manifest, Project, load_source


class UsageError(GfmlError): ...


def _csv(text: Optional[str]) -> Optional[list[str]]:
    if text is None:
        return None
    return [x.strip() for x in text.split(",") if x.strip()]


def _binding_value(text: str):
    low = text.strip().lower()
    if low in ("true", "false"):
        return low == "true"
    if low == "success":
        return A.Status.SUCCESS
    if low == "no_success":
        return A.Status.NO_SUCCESS
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"cannot read binding value {text!r}") from None


def _bindings(items: Sequence[str]) -> dict[str, object]:
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise UsageError(f"--bind expects name=value, got {item!r}")
        out[name.strip()] = _binding_value(value)
    return out


def _domain(text: Optional[str]) -> Optional[Domain]:
    if text is None:
        return None
    try:
        return Domain.parse(text)
    except ValueError as exc:
        raise UsageError(f"bad --domain {text!r}: {exc}") from None


class _Output:
    """Human lines on stdout, or one JSON object at the end with ``--json``."""

    def __init__(self, command: str, as_json: bool):
        self.as_json = as_json
        self.record: dict = {"command": command}

    def line(self, text: str):
        if not self.as_json:
            print(text)

    def error(self, text: str):
        print(text, file=sys.stderr)

    def finish(self, ok: bool, **fields) -> int:
        if self.as_json:
            self.record.update(fields)
            self.record["ok"] = ok
            print(json.dumps(self.record, sort_keys=True))
        return 0 if ok else 1


def _project(args) -> Project:
    if args.project:
        manifest = Manifest.load(args.project)
    elif Path(MANIFEST_NAME).is_file():
        manifest = Manifest.load(MANIFEST_NAME)
    else:
        manifest = Manifest.bundled()
    project = Project(manifest)
    for path in args.module or ():
        m = load_source(path)
        if m is None:
            raise UsageError(f"{path} holds no module")
        project.add(m)
    return project


def _selections(args, project: Project) -> list[list[str]]:
    if args.all:
        if args.config:
            raise UsageError("--config and --all are exclusive")
        return project.configurations()
    config = _csv(args.config)
    if config is None:
        raise UsageError("give --config f1,f2,... or --all")
    return [config]


# -- commands -----------------------------------------------------------------


def cmd_check(args, out: _Output) -> int:
    project = _project(args)
    results = []
    ok = True
    for path in args.paths:
        entry = {"path": path, "errors": []}
        try:
            m = load_source(path)
            if m is None:
                entry["module"] = None
                out.line(f"{path}: empty, nothing to check")
            else:
                entry["module"] = m.name
                project.add(m)
                typed = project.check(m)
                entry["properties"] = [n for n, _ in typed.properties]
                out.line(f"{path}: {m.name} ok")
        except GfmlError as exc:
            ok = False
            entry["errors"] = [str(d) for d in exc.diagnostics]
            for d in exc.diagnostics:
                out.error(f"{path}: {d}" if d.span is None else str(d))
        results.append(entry)
    return out.finish(ok, files=results)


def _emit(project: Project, typed, out_dir: Path, binding, out: _Output) -> list[str]:
    files = project.emit(typed, binding)
    written = write_program(files, out_dir)
    for p in written:
        out.line(f"wrote {p}")
    problems = run_focalizec(written)
    if problems:
        raise UsageError("; ".join(problems))
    return [str(p) for p in written]


def cmd_translate(args, out: _Output) -> int:
    project = _project(args)
    out_dir = Path(args.out) if args.out else project.manifest.out
    binding = _bindings(args.bind)
    written = []
    for path in args.paths:
        m = load_source(path)
        if m is None:
            out.line(f"{path}: empty, nothing to translate")
            continue
        project.add(m)
        written += _emit(project, project.check(m), out_dir, binding, out)
    return out.finish(True, files=written)


def cmd_compose(args, out: _Output, translate: bool = False) -> int:
    project = _project(args)
    order = _csv(args.order)
    binding = _bindings(getattr(args, "bind", None))
    products = []
    ok = True
    out_dir = Path(args.out) if args.out else (project.manifest.out if translate else None)
    for selection in _selections(args, project):
        try:
            product = project.compose(selection, order)
            typed = project.typed(product)
        except GfmlError as exc:
            ok = False
            for d in exc.diagnostics:
                out.error(str(d))
            products.append({"config": selection, "errors": [str(d) for d in exc.diagnostics]})
            continue
        text = print_module(product.module)
        entry = {"config": selection, "module": product.name, "parent": product.module.parent}
        if translate:
            entry["files"] = _emit(project, typed, out_dir, binding, out)
        elif out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            path = out_dir / f"{product.name.lower()}.gfm"
            path.write_text(text, encoding="utf-8")
            entry["path"] = str(path)
            out.line(f"wrote {path}")
        else:
            entry["text"] = text
            out.line(text)
        products.append(entry)
    return out.finish(ok, products=products)


def cmd_build_product(args, out: _Output) -> int:
    return cmd_compose(args, out, translate=True)


def cmd_verify(args, out: _Output) -> int:
    project = _project(args)
    order = _csv(args.order)
    binding = _bindings(args.bind)
    domain = _domain(args.domain)
    reports = []
    ok = True
    for selection in _selections(args, project):
        try:
            product = project.compose(selection, order)
            results = project.verify(project.typed(product), binding, domain)
        except GfmlError as exc:
            ok = False
            for d in exc.diagnostics:
                out.error(str(d))
            reports.append({"config": selection, "errors": [str(d) for d in exc.diagnostics]})
            continue
        out.line(f"{product.name} [{','.join(selection)}]")
        props = []
        for r in results:
            entry = {"property": r.name, "holds": r.holds,
                     "instantiations": r.result.instantiations}
            if isinstance(r.result, Counterexample):
                ok = False
                entry["counterexample"] = {k: format_value(v) for k, v in r.result.assignment.items()}
                out.line(f"  {r.name}: Counterexample {r.result.describe()}")
            else:
                out.line(f"  {r.name}: Holds ({r.result.instantiations} instantiations)")
            props.append(entry)
        reports.append({"config": selection, "module": product.name, "properties": props})
    return out.finish(ok, reports=reports)


def cmd_list_configs(args, out: _Output) -> int:
    project = _project(args)
    configs = project.configurations()
    for c in configs:
        out.line(",".join(c))
    return out.finish(True, configs=configs)


# -- argument parsing ----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Bad usage is a user error: exit 1, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="print one JSON object")
    common.add_argument("--project", metavar="FILE",
                        help=f"project manifest (default: ./{MANIFEST_NAME}, else the bundled corpus)")
    common.add_argument("--module", action="append", metavar="FILE",
                        help="use this module file instead of the one the project names")

    p = _Parser(prog="gfmlc", description="Feature-module compiler and composer.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="parse, resolve and typecheck modules")
    c.add_argument("paths", nargs="+")
    c.set_defaults(func=cmd_check)

    t = sub.add_parser("translate", parents=[common], help="emit FoCaLiZe for modules")
    t.add_argument("paths", nargs="+")
    t.add_argument("--out", metavar="DIR")
    t.add_argument("--bind", action="append", metavar="K=V")
    t.set_defaults(func=cmd_translate)

    def config_flags(q):
        q.add_argument("--config", metavar="CSV")
        q.add_argument("--all", action="store_true", help="every valid configuration")
        q.add_argument("--order", metavar="CSV", help="composition order")

    k = sub.add_parser("compose", parents=[common], help="compose a configuration")
    config_flags(k)
    k.add_argument("--out", metavar="DIR")
    k.set_defaults(func=cmd_compose)

    b = sub.add_parser("build-product", parents=[common], help="compose and translate")
    config_flags(b)
    b.add_argument("--out", metavar="DIR")
    b.add_argument("--bind", action="append", metavar="K=V")
    b.set_defaults(func=cmd_build_product)

    v = sub.add_parser("verify", parents=[common], help="bounded check of product properties")
    config_flags(v)
    v.add_argument("--domain", metavar="LO:HI")
    v.add_argument("--bind", action="append", metavar="K=V")
    v.set_defaults(func=cmd_verify)

    lc = sub.add_parser("list-configs", parents=[common], help="enumerate valid configurations")
    lc.set_defaults(func=cmd_list_configs)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    out = _Output(args.command, args.json)
    try:
        return args.func(args, out)
    except GfmlError as exc:
        for d in exc.diagnostics:
            out.error(str(d))
        return out.finish(False, errors=[str(d) for d in exc.diagnostics])
    except (OSError, UnicodeDecodeError) as exc:
        out.error(f"error: {exc}")
        return out.finish(False, errors=[str(exc)])
    except LintFailure as exc:
        for p in exc.problems:
            out.error(f"internal error: emitted FoCaLiZe is malformed: {p}")
        out.finish(False, errors=exc.problems)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort report
        out.error(f"internal error: {type(exc).__name__}: {exc}")
        out.finish(False, errors=[f"{type(exc).__name__}: {exc}"])
        return 2


if __name__ == "__main__":
    sys.exit(main())
