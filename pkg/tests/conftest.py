"""Shared fixtures and helpers: corpus loading, node lookup by source text,
structural AST comparison, and an unparser used for reparse round-trips."""

from __future__ import annotations

from dataclasses import fields

import pytest

import vdmslice as v
from vdmslice.syntax import (
    Apply,
    Assign,
    BinExp,
    Block,
    Call,
    DontCarePattern,
    FieldAccess,
    FieldRef,
    If,
    IfExpr,
    LetExpr,
    LetStmt,
    Literal,
    MapEnum,
    MapType,
    MatchValuePattern,
    Name,
    Node,
    OldName,
    OptionalType,
    PatternIdentifier,
    ProductType,
    RecordConstructor,
    RecordPattern,
    ResultName,
    Return,
    SeqEnum,
    SeqType,
    SetEnum,
    SetType,
    SetUnionPattern,
    Skip,
    TupleConstructor,
    TuplePattern,
    TypeName,
    UnaryExp,
    While,
    iter_nodes,
)

CORPUS_FILES = [
    "twoops.vdmsl",
    "memberbook_bad.vdmsl",
    "memberbook_fixed.vdmsl",
    "memberbook_refactored.vdmsl",
    "memberbook_simplified.vdmsl",
    "valuesem.vdmsl",
]

_cache: dict[str, tuple] = {}


def load_corpus(name: str):
    """Parsed and bound corpus document, cached per session."""
    if name not in _cache:
        document = v.parse(v.corpus_path(name).read_text())
        _cache[name] = (document, v.bind(document))
    return _cache[name]


def load_source(source: str):
    document = v.parse(source)
    return document, v.bind(document)


def named_criteria(document) -> list[tuple[str, str]]:
    """Every (operation, criterion spelling) an exit-time slice can target."""
    out = []
    for op in document.operations:
        if op.result_type is not None:
            out.append((op.name, "result"))
        if document.state is not None:
            for field in document.state.fields:
                out.append((op.name, f"state:{field.name}"))
        if op.postcondition is not None:
            conjuncts = v.post_conjuncts(op.postcondition)
            out.extend((op.name, f"post:{i}") for i in range(1, len(conjuncts) + 1))
    return out


# ---------------- source and node lookup ----------------

def _offsets(source: str) -> list[int]:
    offsets = [0]
    for line in source.split("\n"):
        offsets.append(offsets[-1] + len(line) + 1)
    return offsets


def text_of(document, node) -> str:
    """The exact source text a node's span covers."""
    offsets = _offsets(document.source_text)
    span = node.span
    start = offsets[span.start.line - 1] + span.start.column - 1
    end = offsets[span.end.line - 1] + span.end.column - 1
    return document.source_text[start:end]


def find_nodes(document, text: str, kind: str | None = None) -> list:
    return [
        node
        for node in iter_nodes(document)
        if text_of(document, node) == text
        and (kind is None or type(node).__name__ == kind)
    ]


def find_node(document, text: str, kind: str | None = None, index: int = 0):
    nodes = find_nodes(document, text, kind)
    assert nodes, f"no {kind or 'node'} spans {text!r}"
    return nodes[index]


def slice_texts(document, result) -> set[tuple[str, str]]:
    """(kind, source text) for every node in a slice; spans make these unique
    enough for the corpus-sized goldens used in the tests."""
    index = {n.node_id: n for n in iter_nodes(document)}
    return {
        (type(index[i]).__name__, text_of(document, index[i]))
        for i in result.node_ids
    }


def run_slice(document, table, operation: str, criterion: str, mode: str = "weak"):
    return v.backward_slice(
        document, table, v.parse_criterion(operation, criterion), mode=mode
    )


# ---------------- structural comparison ----------------

_IGNORED_FIELDS = {
    "node_id",
    "span",
    "base_span",
    "name_span",
    "keyword_span",
    "from_elseif",
    "source_text",
}


def structural_equal(a, b) -> bool:
    """Tree equality ignoring ids, spans and rendering-only flags."""
    if isinstance(a, Node):
        if type(a) is not type(b):
            return False
        for f in fields(a):
            if f.name in _IGNORED_FIELDS:
                continue
            if not structural_equal(getattr(a, f.name), getattr(b, f.name)):
                return False
        return True
    if isinstance(a, (list, tuple)):
        if not isinstance(b, (list, tuple)) or len(a) != len(b):
            return False
        return all(structural_equal(x, y) for x, y in zip(a, b))
    return type(a) is type(b) and a == b


# ---------------- unparser ----------------
# Expressions come back fully parenthesized; parentheses are transparent to
# the parser, so parse(unparse(tree)) is structurally the original tree.

def unparse_type(t) -> str:
    if isinstance(t, TypeName):
        return t.name
    if isinstance(t, OptionalType):
        return f"[{unparse_type(t.inner)}]"
    if isinstance(t, SeqType):
        return f"seq of ({unparse_type(t.element)})"
    if isinstance(t, SetType):
        return f"set of ({unparse_type(t.element)})"
    if isinstance(t, MapType):
        return f"map ({unparse_type(t.key)}) to ({unparse_type(t.value)})"
    assert isinstance(t, ProductType)
    return " * ".join(f"({unparse_type(p)})" for p in t.items)


def _escape_text(text: str) -> str:
    return (
        text.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\t", "\\t")
    )


def unparse_pattern(p) -> str:
    if isinstance(p, PatternIdentifier):
        return p.name
    if isinstance(p, DontCarePattern):
        return "-"
    if isinstance(p, MatchValuePattern):
        return f"({unparse_expr(p.expression)})"
    if isinstance(p, SetUnionPattern):
        return f"{unparse_pattern(p.left)} union {unparse_pattern(p.right)}"
    if isinstance(p, TuplePattern):
        return "mk_(" + ", ".join(unparse_pattern(s) for s in p.subpatterns) + ")"
    assert isinstance(p, RecordPattern)
    return f"mk_{p.type_name}(" + ", ".join(unparse_pattern(s) for s in p.subpatterns) + ")"


def unparse_expr(e) -> str:
    if isinstance(e, Literal):
        if e.kind == "int":
            return str(e.value)
        if e.kind == "bool":
            return "true" if e.value else "false"
        if e.kind == "nil":
            return "nil"
        if e.kind == "text":
            return f'"{_escape_text(e.value)}"'
        if e.kind == "char":
            escaped = _escape_text(e.value).replace("'", "\\'")
            return f"'{escaped}'"
        assert e.kind == "quote"
        return f"<{e.value}>"
    if isinstance(e, Name):
        return e.identifier
    if isinstance(e, OldName):
        return f"{e.identifier}~"
    if isinstance(e, ResultName):
        return "RESULT"
    if isinstance(e, BinExp):
        return f"({unparse_expr(e.left)} {e.op} {unparse_expr(e.right)})"
    if isinstance(e, UnaryExp):
        return f"({e.op} {unparse_expr(e.operand)})"
    if isinstance(e, Apply):
        args = ", ".join(unparse_expr(a) for a in e.arguments)
        return f"{unparse_expr(e.callee)}({args})"
    if isinstance(e, FieldRef):
        return f"{unparse_expr(e.record)}.{e.field}"
    if isinstance(e, LetExpr):
        bindings = ", ".join(
            f"{unparse_pattern(p)} = {unparse_expr(x)}" for p, x in e.bindings
        )
        return f"(let {bindings} in {unparse_expr(e.body)})"
    if isinstance(e, IfExpr):
        return (
            f"(if {unparse_expr(e.condition)} then {unparse_expr(e.then_expr)}"
            f" else {unparse_expr(e.else_expr)})"
        )
    if isinstance(e, SetEnum):
        return "{" + ", ".join(unparse_expr(x) for x in e.elements) + "}"
    if isinstance(e, SeqEnum):
        return "[" + ", ".join(unparse_expr(x) for x in e.elements) + "]"
    if isinstance(e, MapEnum):
        if not e.pairs:
            return "{|->}"
        pairs = ", ".join(
            f"{unparse_expr(k)} |-> {unparse_expr(x)}" for k, x in e.pairs
        )
        return "{" + pairs + "}"
    if isinstance(e, RecordConstructor):
        return f"mk_{e.type_name}(" + ", ".join(unparse_expr(a) for a in e.arguments) + ")"
    assert isinstance(e, TupleConstructor)
    return "mk_(" + ", ".join(unparse_expr(a) for a in e.arguments) + ")"


def unparse_stmt(s) -> str:
    if isinstance(s, Block):
        parts = [
            f"dcl {item.name} : ({unparse_type(item.type)})"
            + (f" := {unparse_expr(item.init)}" if item.init is not None else "")
            for item in s.declarations
        ]
        parts.extend(unparse_stmt(inner) for inner in s.statements)
        return "(" + "; ".join(parts) + ")"
    if isinstance(s, Assign):
        designator = s.designator.base_name
        for accessor in s.designator.accessors:
            if isinstance(accessor, FieldAccess):
                designator += f".{accessor.field}"
            else:
                designator += f"({unparse_expr(accessor.index)})"
        return f"{designator} := {unparse_expr(s.expression)}"
    if isinstance(s, If):
        text = f"if {unparse_expr(s.condition)} then {unparse_stmt(s.then_stmt)}"
        if s.else_stmt is not None:
            text += f" else {unparse_stmt(s.else_stmt)}"
        return text
    if isinstance(s, While):
        return f"while {unparse_expr(s.condition)} do {unparse_stmt(s.body)}"
    if isinstance(s, Call):
        return f"{s.callee_name}(" + ", ".join(unparse_expr(a) for a in s.arguments) + ")"
    if isinstance(s, LetStmt):
        bindings = ", ".join(
            f"{unparse_pattern(p)} = {unparse_expr(x)}" for p, x in s.bindings
        )
        return f"let {bindings} in {unparse_stmt(s.body)}"
    if isinstance(s, Return):
        if s.expression is None:
            return "return"
        return f"return {unparse_expr(s.expression)}"
    assert isinstance(s, Skip)
    return "skip"


def _signature_types(types) -> str:
    if not types:
        return "()"
    return " * ".join(f"({unparse_type(t)})" for t in types)


def unparse_document(d) -> str:
    lines: list[str] = []
    if d.state is not None:
        lines.append(f"state {d.state.name} of")
        for field in d.state.fields:
            lines.append(f"    {field.name} : ({unparse_type(field.type)})")
        if d.state.invariant is not None:
            pat, expr = d.state.invariant
            lines.append(f"inv {unparse_pattern(pat)} == {unparse_expr(expr)}")
        if d.state.init is not None:
            pat, expr = d.state.init
            lines.append(f"init {unparse_pattern(pat)} == {unparse_expr(expr)}")
        lines.append("end")
    if d.values:
        lines.append("values")
        for value in d.values:
            lines.append(
                f"    {unparse_pattern(value.pattern)} = {unparse_expr(value.expression)};"
            )
    if d.functions:
        lines.append("functions")
        for fn in d.functions:
            lines.append(
                f"    {fn.name} : {_signature_types(fn.param_types)}"
                f" -> ({unparse_type(fn.result_type)})"
            )
            params = ", ".join(unparse_pattern(p) for p in fn.params)
            lines.append(f"    {fn.name}({params}) == {unparse_expr(fn.body)}")
            if fn.precondition is not None:
                lines.append(f"    pre {unparse_expr(fn.precondition)}")
            if fn.postcondition is not None:
                lines.append(f"    post {unparse_expr(fn.postcondition)}")
            lines.append("    ;")
    if d.operations:
        lines.append("operations")
        for op in d.operations:
            result = f"({unparse_type(op.result_type)})" if op.result_type is not None else "()"
            lines.append(f"    {op.name} : {_signature_types(op.param_types)} ==> {result}")
            params = ", ".join(unparse_pattern(p) for p in op.params)
            lines.append(f"    {op.name}({params}) == {unparse_stmt(op.body)}")
            if op.precondition is not None:
                lines.append(f"    pre {unparse_expr(op.precondition)}")
            if op.postcondition is not None:
                lines.append(f"    post {unparse_expr(op.postcondition)}")
            lines.append("    ;")
    return "\n".join(lines) + "\n"


# ---------------- acceptance reporting ----------------

def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for the run's closing summary."""

    class _Recorder:
        def __init__(self):
            self.label = None

        def __call__(self, label: str):
            self.label = label
            return self

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            verdict = "PASS" if exc_type is None else "FAIL"
            request.config._acceptance_lines.append(f"{verdict}  {self.label}")
            return False

    return _Recorder()
