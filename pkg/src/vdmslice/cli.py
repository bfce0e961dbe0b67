"""Command line interface.

Exit codes:
  0   success
  1   source errors (parse or name resolution), or a check disagreement
  2   unusable criterion (unknown operation, bad position, missing conjunct)
  3   an assertion failed while running (invariant, pre- or postcondition)
  4   the run itself failed (division by zero, missing map entry, ...)
  64  bad command line
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .binder import BindFailure, SymbolTable, bind
from .interp import (
    AssertionViolation,
    CompletedVoid,
    FrozenMap,
    Interpreter,
    QuoteVal,
    RecordVal,
    Returned,
    RuntimeErrorOutcome,
    TupleVal,
    check_criterion,
    outcome_text,
)
from .parser import ParseFailure, SourceError, parse, parse_expression_text
from .slicer import (
    CriterionError,
    backward_slice,
    parse_criterion,
    payload_json,
    result_payload,
)
from .syntax import (
    Document,
    Literal,
    MapEnum,
    RecordConstructor,
    SeqEnum,
    SetEnum,
    TupleConstructor,
    UnaryExp,
)

EXIT_OK = 0
EXIT_SOURCE = 1
EXIT_CRITERION = 2
EXIT_ASSERTION = 3
EXIT_RUNTIME = 4
EXIT_USAGE = 64


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_arg_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="vdmslice",
        description="Slice, run and check small state-based documents.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub: argparse.ArgumentParser, criterion: bool) -> None:
        sub.add_argument("file", help="the source file")
        sub.add_argument("--operation", required=True, help="the operation of interest")
        if criterion:
            sub.add_argument(
                "--criterion",
                required=True,
                help="result | state:NAME | post:N | at:LINE:COLUMN",
            )
            sub.add_argument(
                "--mode",
                choices=("weak", "strong"),
                default="weak",
                help="how assignments through accessors are treated (default weak)",
            )

    sliced = commands.add_parser("slice", help="compute a backward slice")
    common(sliced, criterion=True)
    sliced.add_argument(
        "--format",
        choices=("json", "text"),
        default="json",
        help="json payload (default) or annotated source text",
    )

    runner = commands.add_parser("run", help="run one operation from the initial state")
    common(runner, criterion=False)
    runner.add_argument(
        "--arg",
        action="append",
        default=[],
        metavar="EXPR",
        help="a literal argument value; repeat once per parameter",
    )
    runner.add_argument("--max-steps", type=int, default=200_000)
    runner.add_argument(
        "--no-assertions",
        action="store_true",
        help="do not evaluate the invariant, pre- or postconditions",
    )

    checker = commands.add_parser(
        "check", help="compare original and sliced behaviour on random inputs"
    )
    common(checker, criterion=True)
    checker.add_argument("--trials", type=int, default=20)
    checker.add_argument("--seed", type=int, default=0)
    checker.add_argument("--max-steps", type=int, default=200_000)

    server = commands.add_parser("serve", help="serve the document over HTTP")
    server.add_argument("file", help="the source file")
    server.add_argument("--host", default="127.0.0.1")
    server.add_argument("--port", type=int, default=8472)
    server.add_argument(
        "--ui", default=None, metavar="DIR", help="also serve a static UI from DIR"
    )

    return parser


def _print_source_errors(file_label: str, errors: list[SourceError]) -> None:
    for error in errors:
        position = error.span.start
        print(
            f"{file_label}:{position.line}:{position.column}: {error.message}",
            file=sys.stderr,
        )


def _load(file_label: str):
    try:
        source = Path(file_label).read_text()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None
    try:
        document = parse(source)
    except ParseFailure as failure:
        _print_source_errors(file_label, failure.errors)
        return None
    try:
        table = bind(document)
    except BindFailure as failure:
        _print_source_errors(file_label, failure.errors)
        return None
    return document, table


def render_text(payload: dict, source_text: str) -> str:
    """The slice painted onto the source: '>' criterion lines, '*' slice lines."""

    def lines_of(entries) -> set[int]:
        covered: set[int] = set()
        for entry in entries:
            covered.update(range(entry["start"]["line"], entry["end"]["line"] + 1))
        return covered

    slice_lines = lines_of(payload["slice"])
    criterion_lines = lines_of(payload["criterionNodes"])
    out = []
    for number, text in enumerate(source_text.splitlines(), 1):
        if number in criterion_lines:
            marker = ">"
        elif number in slice_lines:
            marker = "*"
        else:
            marker = " "
        out.append(f"{number:4} {marker} {text}")
    return "\n".join(out) + "\n"


def _literal_value(expr, document: Document):
    """Evaluate a closed literal expression given on the command line."""
    if isinstance(expr, Literal):
        if expr.kind == "quote":
            return QuoteVal(expr.value)
        return expr.value
    if isinstance(expr, UnaryExp) and expr.op == "-":
        inner = _literal_value(expr.operand, document)
        if isinstance(inner, bool) or not isinstance(inner, int):
            raise ValueError("'-' needs a number")
        return -inner
    if isinstance(expr, SetEnum):
        return frozenset(_literal_value(e, document) for e in expr.elements)
    if isinstance(expr, SeqEnum):
        return tuple(_literal_value(e, document) for e in expr.elements)
    if isinstance(expr, MapEnum):
        return FrozenMap(
            (_literal_value(k, document), _literal_value(v, document))
            for k, v in expr.pairs
        )
    if isinstance(expr, TupleConstructor):
        return TupleVal(tuple(_literal_value(a, document) for a in expr.arguments))
    if isinstance(expr, RecordConstructor):
        fields = tuple(_literal_value(a, document) for a in expr.arguments)
        state = document.state
        if state is not None and expr.type_name == state.name:
            if len(fields) != len(state.fields):
                raise ValueError(f"mk_{state.name} needs {len(state.fields)} field(s)")
            return RecordVal(state.name, fields, tuple(f.name for f in state.fields))
        return RecordVal(expr.type_name, fields)
    raise ValueError("argument expressions must be literal values")


def _cmd_slice(args, document: Document, table: SymbolTable) -> int:
    try:
        criterion = parse_criterion(args.operation, args.criterion)
        result = backward_slice(document, table, criterion, mode=args.mode)
    except CriterionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CRITERION
    payload = result_payload(document, result, file_label=args.file)
    if args.format == "text":
        sys.stdout.write(render_text(payload, document.source_text))
    else:
        sys.stdout.write(payload_json(payload))
    return EXIT_OK


def _cmd_run(args, document: Document, table: SymbolTable) -> int:
    if document.operation(args.operation) is None:
        print(f"error: unknown operation '{args.operation}'", file=sys.stderr)
        return EXIT_CRITERION
    values = []
    for text in args.arg:
        try:
            values.append(_literal_value(parse_expression_text(text), document))
        except (ParseFailure, ValueError) as exc:
            message = exc.errors[0].message if isinstance(exc, ParseFailure) else str(exc)
            print(f"error: bad argument {text!r}: {message}", file=sys.stderr)
            return EXIT_USAGE
    interp = Interpreter(
        document,
        table,
        step_limit=args.max_steps,
        check_assertions=not args.no_assertions,
    )
    outcome = interp.run_operation(args.operation, values)
    print(outcome_text(outcome))
    if isinstance(outcome, (Returned, CompletedVoid)):
        return EXIT_OK
    if isinstance(outcome, AssertionViolation):
        return EXIT_ASSERTION
    assert isinstance(outcome, RuntimeErrorOutcome)
    return EXIT_RUNTIME


def _cmd_check(args, document: Document, table: SymbolTable) -> int:
    try:
        criterion = parse_criterion(args.operation, args.criterion)
        report = check_criterion(
            document,
            table,
            criterion,
            mode=args.mode,
            trials=args.trials,
            seed=args.seed,
            step_limit=args.max_steps,
        )
    except CriterionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CRITERION
    print(
        f"{args.operation} {args.criterion}: "
        f"{report.executed} compared, {report.skipped} skipped"
    )
    for failure in report.failures:
        print(f"  {failure}")
    if report.passed:
        print("agreement")
        return EXIT_OK
    print("disagreement")
    return EXIT_SOURCE


def _cmd_serve(args, document: Document, table: SymbolTable) -> int:
    from .api import serve

    try:
        serve(
            document,
            table,
            file_label=args.file,
            host=args.host,
            port=args.port,
            ui_dir=args.ui,
        )
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    loaded = _load(args.file)
    if loaded is None:
        return EXIT_SOURCE
    document, table = loaded
    if args.command == "slice":
        return _cmd_slice(args, document, table)
    if args.command == "run":
        return _cmd_run(args, document, table)
    if args.command == "check":
        return _cmd_check(args, document, table)
    assert args.command == "serve"
    return _cmd_serve(args, document, table)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
