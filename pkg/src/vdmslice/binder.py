"""Name resolution and context checking.

The binder turns every name in a parsed document into a reference to a
:class:`Declaration` and enforces the visibility rules of the language:

* state variables are visible only inside operations;
* functions see values, functions and their own parameters;
* operations may only be called from operation bodies;
* ``RESULT`` appears only in postconditions (of something that returns);
* old values (``x~``) appear only in operation postconditions and only for
  state variables;
* assignment targets are state variables or ``dcl`` locals, nothing else.

It also defines the dependency-token vocabulary shared by the slicer: a
token names one unit of data a computation can read or write.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .parser import SourceError
from .syntax import (
    Apply,
    ApplyAccess,
    Assign,
    Block,
    Call,
    DclItem,
    Document,
    Expression,
    FieldRef,
    FunctionDefinition,
    If,
    LetExpr,
    LetStmt,
    Literal,
    Name,
    Node,
    OldName,
    OperationDefinition,
    Pattern,
    PatternIdentifier,
    MatchValuePattern,
    ResultName,
    Return,
    Skip,
    Statement,
    StateDesignator,
    ValueDefinition,
    While,
    children_of,
)


class BindFailure(Exception):
    """Raised when a document breaks the visibility or usage rules."""

    def __init__(self, errors: list[SourceError]):
        self.errors = list(errors)
        super().__init__("; ".join(e.message for e in self.errors))


# ======================================================================
# declarations
# ======================================================================

# Declaration kinds:
#   state      a state variable (record field of the state definition)
#   value      a top-level value binder
#   function   a function definition
#   operation  an operation definition
#   param      a parameter binder
#   local      a dcl-declared block local
#   binder     a let / invariant / initialiser binder
@dataclass(frozen=True)
class Declaration:
    decl_id: int
    name: str
    kind: str
    node: Node
    field_index: int = -1  # position within the state record, for kind 'state'


_KIND_PHRASE = {
    "param": "a parameter",
    "value": "a value definition",
    "binder": "a let binder",
    "function": "a function",
    "operation": "an operation",
}


# ======================================================================
# dependency tokens
# ======================================================================

@dataclass(frozen=True)
class VarToken:
    """The current value of a named variable (state, param, local, binder)."""

    decl_id: int


@dataclass(frozen=True)
class ResultToken:
    """The value returned by an operation or function."""

    decl_id: int


@dataclass(frozen=True)
class EntryToken:
    """The value a state variable held when the operation started (``x~``)."""

    decl_id: int


@dataclass(frozen=True)
class ExprToken:
    """The value of one specific compound expression occurrence."""

    node_id: int


@dataclass(frozen=True)
class ParamToken:
    """The value fed into parameter ``index`` of a callable; used to route
    argument dependencies through call summaries."""

    decl_id: int
    index: int


DependencyToken = VarToken | ResultToken | EntryToken | ExprToken | ParamToken


# ======================================================================
# symbol table
# ======================================================================

@dataclass
class SymbolTable:
    document: Document
    decls: list[Declaration]
    state_field_ids: dict[str, int]
    state_field_order: list[int]
    globals_by_name: dict[str, int]
    name_targets: dict[int, int] = field(default_factory=dict)
    oldname_targets: dict[int, int] = field(default_factory=dict)
    result_owners: dict[int, int] = field(default_factory=dict)
    call_targets: dict[int, int] = field(default_factory=dict)
    designator_targets: dict[int, int] = field(default_factory=dict)
    declaring_nodes: dict[int, int] = field(default_factory=dict)
    callable_decls: dict[int, int] = field(default_factory=dict)

    def decl(self, decl_id: int) -> Declaration:
        return self.decls[decl_id]

    def decl_of(self, node: Node) -> Declaration:
        """Declaration introduced by a PatternIdentifier or DclItem."""
        return self.decls[self.declaring_nodes[node.node_id]]

    def target_of_name(self, node: Name) -> Declaration:
        return self.decls[self.name_targets[node.node_id]]

    def callable_decl_of(self, definition: Node) -> Declaration:
        return self.decls[self.callable_decls[definition.node_id]]

    def resolves_to_callable(self, node: Name) -> bool:
        decl_id = self.name_targets.get(node.node_id)
        return decl_id is not None and self.decls[decl_id].kind in ("function", "operation")

    def state_fields(self) -> list[Declaration]:
        return [self.decls[i] for i in self.state_field_order]

    def lookup_global(self, name: str) -> Declaration | None:
        decl_id = self.globals_by_name.get(name)
        return None if decl_id is None else self.decls[decl_id]


# ======================================================================
# token extraction helpers
# ======================================================================

def value_token(table: SymbolTable, expr: Expression) -> DependencyToken | None:
    """The token carrying the value of ``expr``; None for constants."""
    if isinstance(expr, Literal):
        return None
    if isinstance(expr, Name):
        return VarToken(table.name_targets[expr.node_id])
    if isinstance(expr, OldName):
        return EntryToken(table.oldname_targets[expr.node_id])
    if isinstance(expr, ResultName):
        return ResultToken(table.result_owners[expr.node_id])
    return ExprToken(expr.node_id)


def tokens_read_by(table: SymbolTable, root: Node) -> set[DependencyToken]:
    """Every variable-like token whose value ``root`` consumes.

    Callee names of function and operation applications are skipped: applying
    a callable reads its arguments, not a variable named after it.
    """
    out: set[DependencyToken] = set()

    def visit(node: Node) -> None:
        if isinstance(node, Apply):
            callee = node.callee
            if not (isinstance(callee, Name) and table.resolves_to_callable(callee)):
                visit(callee)
            for arg in node.arguments:
                visit(arg)
            return
        if isinstance(node, Name):
            decl_id = table.name_targets.get(node.node_id)
            if decl_id is not None:
                out.add(VarToken(decl_id))
            return
        if isinstance(node, OldName):
            decl_id = table.oldname_targets.get(node.node_id)
            if decl_id is not None:
                out.add(EntryToken(decl_id))
            return
        if isinstance(node, ResultName):
            decl_id = table.result_owners.get(node.node_id)
            if decl_id is not None:
                out.add(ResultToken(decl_id))
            return
        for child in children_of(node):
            visit(child)

    visit(root)
    return out


# ======================================================================
# binder
# ======================================================================

class _Binder:
    def __init__(self, document: Document):
        self.document = document
        self.errors: list[SourceError] = []
        self.decls: list[Declaration] = []
        self.scope: list[dict[str, int]] = []
        self.context = "value"
        self.current_callable: int | None = None
        self.table = SymbolTable(
            document=document,
            decls=self.decls,
            state_field_ids={},
            state_field_order=[],
            globals_by_name={},
        )

    # ---------------- plumbing ----------------

    def _err(self, message: str, span) -> None:
        self.errors.append(SourceError(message, span))

    def _new_decl(self, name: str, kind: str, node: Node, field_index: int = -1) -> int:
        decl_id = len(self.decls)
        self.decls.append(Declaration(decl_id, name, kind, node, field_index))
        return decl_id

    def _push(self) -> dict[str, int]:
        layer: dict[str, int] = {}
        self.scope.append(layer)
        return layer

    def _pop(self) -> None:
        self.scope.pop()

    def _resolve(self, name: str) -> int | None:
        for layer in reversed(self.scope):
            if name in layer:
                return layer[name]
        return None

    # ---------------- patterns ----------------

    def _bind_pattern(self, pat: Pattern, kind: str, declare: bool = True) -> None:
        if isinstance(pat, PatternIdentifier):
            if declare:
                decl_id = self._new_decl(pat.name, kind, pat)
                self.scope[-1][pat.name] = decl_id
                self.table.declaring_nodes[pat.node_id] = decl_id
            return
        if isinstance(pat, MatchValuePattern):
            self.bind_expression(pat.expression)
            return
        for child in children_of(pat):
            if isinstance(child, Pattern):
                self._bind_pattern(child, kind, declare)
            elif isinstance(child, Expression):
                self.bind_expression(child)

    # ---------------- expressions ----------------

    def bind_expression(self, expr: Expression, is_callee: bool = False) -> None:
        if isinstance(expr, Name):
            decl_id = self._resolve(expr.identifier)
            if decl_id is None:
                if expr.identifier in self.table.state_field_ids:
                    self._err(
                        f"state variable '{expr.identifier}' is only visible inside operations",
                        expr.span,
                    )
                else:
                    self._err(f"unknown name '{expr.identifier}'", expr.span)
                return
            decl = self.decls[decl_id]
            if decl.kind in ("function", "operation"):
                if not is_callee:
                    self._err(f"cannot use '{expr.identifier}' as a value", expr.span)
                    return
                if decl.kind == "operation" and self.context != "op_body":
                    self._err(
                        "operations may only be called inside operation bodies", expr.span
                    )
                    return
            self.table.name_targets[expr.node_id] = decl_id
            return
        if isinstance(expr, OldName):
            if self.context != "op_post":
                self._err(
                    "old values (x~) are only available in operation postconditions",
                    expr.span,
                )
                return
            decl_id = self.table.state_field_ids.get(expr.identifier)
            if decl_id is None:
                self._err(
                    f"only state variables have old values; '{expr.identifier}' is not one",
                    expr.span,
                )
                return
            self.table.oldname_targets[expr.node_id] = decl_id
            return
        if isinstance(expr, ResultName):
            owner = self.current_callable
            if self.context == "op_post":
                assert owner is not None
                op = self.decls[owner].node
                assert isinstance(op, OperationDefinition)
                if op.result_type is None:
                    self._err("RESULT is not available for a void operation", expr.span)
                    return
            elif self.context != "function_post":
                self._err("RESULT is only available in postconditions", expr.span)
                return
            assert owner is not None
            self.table.result_owners[expr.node_id] = owner
            return
        if isinstance(expr, Apply):
            self.bind_expression(expr.callee, is_callee=isinstance(expr.callee, Name))
            for arg in expr.arguments:
                self.bind_expression(arg)
            return
        if isinstance(expr, LetExpr):
            for _, bound in expr.bindings:
                self.bind_expression(bound)
            self._push()
            for pat, _ in expr.bindings:
                self._bind_pattern(pat, "binder")
            self.bind_expression(expr.body)
            self._pop()
            return
        if isinstance(expr, FieldRef):
            self.bind_expression(expr.record)
            return
        for child in children_of(expr):
            if isinstance(child, Expression):
                self.bind_expression(child)

    # ---------------- statements ----------------

    def bind_statement(self, stmt: Statement) -> None:
        if isinstance(stmt, Block):
            layer = self._push()
            for item in stmt.declarations:
                if item.init is not None:
                    self.bind_expression(item.init)
                if item.name in layer:
                    self._err(f"duplicate local '{item.name}'", item.span)
                    continue
                decl_id = self._new_decl(item.name, "local", item)
                layer[item.name] = decl_id
                self.table.declaring_nodes[item.node_id] = decl_id
            for inner in stmt.statements:
                self.bind_statement(inner)
            self._pop()
            return
        if isinstance(stmt, Assign):
            designator = stmt.designator
            decl_id = self._resolve(designator.base_name)
            if decl_id is None:
                self._err(f"unknown assignment target '{designator.base_name}'", designator.base_span)
            else:
                decl = self.decls[decl_id]
                if decl.kind not in ("state", "local"):
                    phrase = _KIND_PHRASE.get(decl.kind, decl.kind)
                    self._err(
                        f"'{designator.base_name}' is not assignable (it is {phrase})",
                        designator.base_span,
                    )
                else:
                    self.table.designator_targets[designator.node_id] = decl_id
            for accessor in designator.accessors:
                if isinstance(accessor, ApplyAccess):
                    self.bind_expression(accessor.index)
            self.bind_expression(stmt.expression)
            return
        if isinstance(stmt, If):
            self.bind_expression(stmt.condition)
            self.bind_statement(stmt.then_stmt)
            if stmt.else_stmt is not None:
                self.bind_statement(stmt.else_stmt)
            return
        if isinstance(stmt, While):
            self.bind_expression(stmt.condition)
            self.bind_statement(stmt.body)
            return
        if isinstance(stmt, Call):
            decl_id = self._resolve(stmt.callee_name)
            if decl_id is None:
                self._err(f"unknown operation '{stmt.callee_name}'", stmt.name_span)
            elif self.decls[decl_id].kind != "operation":
                self._err(f"'{stmt.callee_name}' is not an operation", stmt.name_span)
            else:
                self.table.call_targets[stmt.node_id] = decl_id
            for arg in stmt.arguments:
                self.bind_expression(arg)
            return
        if isinstance(stmt, LetStmt):
            for _, bound in stmt.bindings:
                self.bind_expression(bound)
            self._push()
            for pat, _ in stmt.bindings:
                self._bind_pattern(pat, "binder")
            self.bind_statement(stmt.body)
            self._pop()
            return
        if isinstance(stmt, Return):
            if stmt.expression is not None:
                owner = self.current_callable
                if owner is not None:
                    op = self.decls[owner].node
                    if isinstance(op, OperationDefinition) and op.result_type is None:
                        self._err("a void operation cannot return a value", stmt.span)
                self.bind_expression(stmt.expression)
            return
        if isinstance(stmt, Skip):
            return
        raise TypeError(f"unknown statement class {type(stmt).__name__}")

    # ---------------- definitions ----------------

    def _declare_toplevel(self) -> None:
        doc = self.document
        if doc.state is not None:
            for index, fld in enumerate(doc.state.fields):
                decl_id = self._new_decl(fld.name, "state", fld, index)
                self.table.state_field_ids[fld.name] = decl_id
                self.table.state_field_order.append(decl_id)
                self.table.declaring_nodes[fld.node_id] = decl_id
        for value in doc.values:
            self._declare_value_pattern(value.pattern)
        for function in doc.functions:
            decl_id = self._new_decl(function.name, "function", function)
            self.table.globals_by_name[function.name] = decl_id
            self.table.callable_decls[function.node_id] = decl_id
        for operation in doc.operations:
            decl_id = self._new_decl(operation.name, "operation", operation)
            self.table.globals_by_name[operation.name] = decl_id
            self.table.callable_decls[operation.node_id] = decl_id

    def _declare_value_pattern(self, pat: Pattern) -> None:
        if isinstance(pat, PatternIdentifier):
            decl_id = self._new_decl(pat.name, "value", pat)
            self.table.globals_by_name[pat.name] = decl_id
            self.table.declaring_nodes[pat.node_id] = decl_id
            return
        for child in children_of(pat):
            if isinstance(child, Pattern):
                self._declare_value_pattern(child)

    def _bind_state(self) -> None:
        state = self.document.state
        if state is None:
            return
        for clause, context in ((state.invariant, "state_inv"), (state.init, "state_init")):
            if clause is None:
                continue
            pat, expr = clause
            self.context = context
            self._push()
            self._bind_pattern(pat, "binder")
            self.bind_expression(expr)
            self._pop()

    def _bind_values(self) -> None:
        self.context = "value"
        for value in self.document.values:
            self._bind_pattern(value.pattern, "value", declare=False)
            self.bind_expression(value.expression)

    def _bind_function(self, function: FunctionDefinition) -> None:
        self.current_callable = self.table.callable_decls[function.node_id]
        self._push()
        for pat in function.params:
            self._bind_pattern(pat, "param")
        self.context = "function_body"
        self.bind_expression(function.body)
        if function.precondition is not None:
            self.context = "function_pre"
            self.bind_expression(function.precondition)
        if function.postcondition is not None:
            self.context = "function_post"
            self.bind_expression(function.postcondition)
        self._pop()
        self.current_callable = None

    def _bind_operation(self, operation: OperationDefinition) -> None:
        self.current_callable = self.table.callable_decls[operation.node_id]
        state_layer = self._push()
        state_layer.update(self.table.state_field_ids)
        self._push()
        for pat in operation.params:
            self._bind_pattern(pat, "param")
        if operation.precondition is not None:
            self.context = "op_pre"
            self.bind_expression(operation.precondition)
        self.context = "op_body"
        self.bind_statement(operation.body)
        if operation.postcondition is not None:
            self.context = "op_post"
            self.bind_expression(operation.postcondition)
        self._pop()
        self._pop()
        self.current_callable = None

    def run(self) -> SymbolTable:
        self._declare_toplevel()
        self.scope = [self.table.globals_by_name]
        self._bind_state()
        self._bind_values()
        for function in self.document.functions:
            self._bind_function(function)
        for operation in self.document.operations:
            self._bind_operation(operation)
        if self.errors:
            raise BindFailure(self.errors)
        return self.table


def bind(document: Document) -> SymbolTable:
    """Resolve every name in ``document``; raises BindFailure on rule breaks."""
    return _Binder(document).run()
