"""Backward slicing, execution and checking for small state-based models."""

from importlib import resources as _resources

from .binder import (
    BindFailure,
    Declaration,
    DependencyToken,
    EntryToken,
    ExprToken,
    ParamToken,
    ResultToken,
    SymbolTable,
    VarToken,
    bind,
    tokens_read_by,
    value_token,
)
from .interp import (
    AssertionViolation,
    CheckReport,
    CompletedVoid,
    FrozenMap,
    Interpreter,
    Outcome,
    QuoteVal,
    RecordVal,
    Returned,
    RuntimeErrorOutcome,
    TupleVal,
    check_criterion,
    generate_value,
    outcome_text,
    render_value,
    run_reduced,
    values_equal,
)
from .parser import (
    ParseFailure,
    SourceError,
    parse,
    parse_expression_text,
    parse_pattern_text,
    parse_position,
    parse_statement_text,
    parse_type_text,
)
from .slicer import (
    Criterion,
    CriterionError,
    SliceResult,
    SliceStats,
    backward_slice,
    parse_criterion,
    payload_json,
    post_conjuncts,
    result_payload,
)
from .syntax import Document, Node, Position, Span

__version__ = "0.1.0"


def corpus_path(name: str):
    """Path to one of the bundled example documents."""
    return _resources.files(__package__) / "corpus" / name


__all__ = [
    "AssertionViolation",
    "BindFailure",
    "CheckReport",
    "CompletedVoid",
    "Criterion",
    "CriterionError",
    "Declaration",
    "DependencyToken",
    "Document",
    "EntryToken",
    "ExprToken",
    "FrozenMap",
    "Interpreter",
    "Node",
    "Outcome",
    "ParamToken",
    "ParseFailure",
    "Position",
    "QuoteVal",
    "RecordVal",
    "ResultToken",
    "Returned",
    "RuntimeErrorOutcome",
    "SliceResult",
    "SliceStats",
    "SourceError",
    "Span",
    "SymbolTable",
    "TupleVal",
    "VarToken",
    "backward_slice",
    "bind",
    "check_criterion",
    "corpus_path",
    "generate_value",
    "outcome_text",
    "parse",
    "parse_criterion",
    "parse_expression_text",
    "parse_pattern_text",
    "parse_position",
    "parse_statement_text",
    "parse_type_text",
    "payload_json",
    "post_conjuncts",
    "render_value",
    "result_payload",
    "run_reduced",
    "tokens_read_by",
    "value_token",
    "values_equal",
]
