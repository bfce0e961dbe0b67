"""Abstract syntax for the executable VDM-SL subset.

Every construct the toolkit understands is a :class:`Node` carrying a dense
integer ``node_id`` (assigned in parse order) and a half-open source
:class:`Span`.  Nodes compare by identity; the ``node_id`` is the stable
handle used by the slicer, the reduction oracle and the JSON output.

The tree is immutable after parsing.  Traversal helpers at the bottom of the
module (``children_of``, ``iter_nodes``, ``build_parent_map``,
``smallest_node_covering``) are the only way the rest of the package walks
the structure, so child ordering is defined in exactly one place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


# ======================================================================
# positions and spans
# ======================================================================

@dataclass(frozen=True, order=True)
class Position:
    """1-based line/column pair."""

    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class Span:
    """Half-open source region: ``start`` inclusive, ``end`` exclusive."""

    start: Position
    end: Position

    def contains(self, pos: Position) -> bool:
        return self.start <= pos < self.end

    def __str__(self) -> str:
        return f"{self.start}-{self.end}"


# ======================================================================
# node base classes
# ======================================================================

@dataclass(eq=False)
class Node:
    node_id: int
    span: Span


@dataclass(eq=False)
class Expression(Node):
    pass


@dataclass(eq=False)
class Statement(Node):
    pass


@dataclass(eq=False)
class Pattern(Node):
    pass


@dataclass(eq=False)
class TypeExpr(Node):
    pass


# ======================================================================
# types (uninterpreted shapes; names are not resolved)
# ======================================================================

@dataclass(eq=False)
class TypeName(TypeExpr):
    name: str


@dataclass(eq=False)
class OptionalType(TypeExpr):
    inner: TypeExpr


@dataclass(eq=False)
class SeqType(TypeExpr):
    element: TypeExpr


@dataclass(eq=False)
class SetType(TypeExpr):
    element: TypeExpr


@dataclass(eq=False)
class MapType(TypeExpr):
    key: TypeExpr
    value: TypeExpr


@dataclass(eq=False)
class ProductType(TypeExpr):
    """A tuple type; in signatures only inside brackets, since a bare
    star separates parameters."""

    items: list[TypeExpr]


# ======================================================================
# patterns
# ======================================================================

@dataclass(eq=False)
class PatternIdentifier(Pattern):
    name: str


@dataclass(eq=False)
class DontCarePattern(Pattern):
    pass


@dataclass(eq=False)
class MatchValuePattern(Pattern):
    """``( expression )`` in pattern position; matches only that value."""

    expression: Expression


@dataclass(eq=False)
class SetUnionPattern(Pattern):
    left: Pattern
    right: Pattern


@dataclass(eq=False)
class RecordPattern(Pattern):
    type_name: str
    subpatterns: list[Pattern]


@dataclass(eq=False)
class TuplePattern(Pattern):
    subpatterns: list[Pattern]


# ======================================================================
# expressions
# ======================================================================

@dataclass(eq=False)
class Literal(Expression):
    """Int, bool, text, char, quote or nil constant.

    ``kind`` is one of ``int bool text char quote nil``; ``value`` holds the
    Python payload (``None`` for nil, the quote name for quotes).
    """

    kind: str
    value: object


@dataclass(eq=False)
class Name(Expression):
    identifier: str


@dataclass(eq=False)
class OldName(Expression):
    """``X~``: the entry value of state variable X; postconditions only."""

    identifier: str


@dataclass(eq=False)
class ResultName(Expression):
    """``RESULT``: the returned value; postconditions only."""


@dataclass(eq=False)
class BinExp(Expression):
    op: str
    left: Expression
    right: Expression


@dataclass(eq=False)
class UnaryExp(Expression):
    op: str
    operand: Expression


@dataclass(eq=False)
class Apply(Expression):
    """Call of a function/operation, or map/sequence application."""

    callee: Expression
    arguments: list[Expression]


@dataclass(eq=False)
class FieldRef(Expression):
    record: Expression
    field: str


@dataclass(eq=False)
class LetExpr(Expression):
    bindings: list[tuple[Pattern, Expression]]
    body: Expression


@dataclass(eq=False)
class IfExpr(Expression):
    condition: Expression
    then_expr: Expression
    else_expr: Expression


@dataclass(eq=False)
class SetEnum(Expression):
    elements: list[Expression]


@dataclass(eq=False)
class SeqEnum(Expression):
    elements: list[Expression]


@dataclass(eq=False)
class MapEnum(Expression):
    pairs: list[tuple[Expression, Expression]]


@dataclass(eq=False)
class RecordConstructor(Expression):
    type_name: str
    arguments: list[Expression]


@dataclass(eq=False)
class TupleConstructor(Expression):
    arguments: list[Expression]


# ======================================================================
# state designators (assignment targets)
# ======================================================================

@dataclass(eq=False)
class Accessor(Node):
    pass


@dataclass(eq=False)
class FieldAccess(Accessor):
    field: str


@dataclass(eq=False)
class ApplyAccess(Accessor):
    index: Expression


@dataclass(eq=False)
class StateDesignator(Node):
    base_name: str
    base_span: Span
    accessors: list[Accessor]


# ======================================================================
# statements
# ======================================================================

@dataclass(eq=False)
class DclItem(Node):
    """One ``name : type [:= init]`` item of a block's dcl clause."""

    name: str
    type: TypeExpr
    init: Optional[Expression]


@dataclass(eq=False)
class Block(Statement):
    declarations: list[DclItem]
    statements: list[Statement]


@dataclass(eq=False)
class Assign(Statement):
    designator: StateDesignator
    expression: Expression


@dataclass(eq=False)
class If(Statement):
    condition: Expression
    then_stmt: Statement
    else_stmt: Optional[Statement]
    # Span of the introducing keyword; used for display so a reported If
    # marks its header line rather than flooding both branches.
    keyword_span: Span = None  # type: ignore[assignment]
    from_elseif: bool = False


@dataclass(eq=False)
class While(Statement):
    condition: Expression
    body: Statement
    keyword_span: Span = None  # type: ignore[assignment]


@dataclass(eq=False)
class Call(Statement):
    callee_name: str
    name_span: Span
    arguments: list[Expression] = field(default_factory=list)


@dataclass(eq=False)
class LetStmt(Statement):
    bindings: list[tuple[Pattern, Expression]]
    body: Statement


@dataclass(eq=False)
class Return(Statement):
    expression: Optional[Expression]


@dataclass(eq=False)
class Skip(Statement):
    pass


# ======================================================================
# definitions and the document
# ======================================================================

@dataclass(eq=False)
class StateField(Node):
    name: str
    type: TypeExpr


@dataclass(eq=False)
class StateDefinition(Node):
    name: str
    fields: list[StateField]
    invariant: Optional[tuple[Pattern, Expression]]
    init: Optional[tuple[Pattern, Expression]]


@dataclass(eq=False)
class ValueDefinition(Node):
    pattern: Pattern
    expression: Expression


@dataclass(eq=False)
class FunctionDefinition(Node):
    name: str
    param_types: list[TypeExpr]
    result_type: TypeExpr
    params: list[Pattern]
    body: Expression
    precondition: Optional[Expression]
    postcondition: Optional[Expression]


@dataclass(eq=False)
class OperationDefinition(Node):
    name: str
    param_types: list[TypeExpr]
    result_type: Optional[TypeExpr]  # None means the operation is void
    params: list[Pattern]
    body: Statement
    precondition: Optional[Expression]
    postcondition: Optional[Expression]


Definition = Union[StateDefinition, ValueDefinition, FunctionDefinition, OperationDefinition]


@dataclass(eq=False)
class Document(Node):
    state: Optional[StateDefinition]
    values: list[ValueDefinition]
    functions: list[FunctionDefinition]
    operations: list[OperationDefinition]
    source_text: str

    def definitions(self) -> list[Definition]:
        """All definitions in source order."""
        defs: list[Definition] = []
        if self.state is not None:
            defs.append(self.state)
        defs.extend(self.values)
        defs.extend(self.functions)
        defs.extend(self.operations)
        defs.sort(key=lambda d: d.span.start)
        return defs

    def operation(self, name: str) -> Optional[OperationDefinition]:
        for op in self.operations:
            if op.name == name:
                return op
        return None


# ======================================================================
# traversal
# ======================================================================

def _binding_children(bindings: list[tuple[Pattern, Expression]]) -> list[Node]:
    out: list[Node] = []
    for pat, expr in bindings:
        out.append(pat)
        out.append(expr)
    return out


def children_of(node: Node) -> list[Node]:
    """Direct children in source order.

    This is the single definition of tree shape used by span checks, the
    covering-node search and the reduction transformer.
    """
    match node:
        case Document():
            return list(node.definitions())
        case StateDefinition():
            out: list[Node] = list(node.fields)
            if node.invariant is not None:
                out.extend(node.invariant)
            if node.init is not None:
                out.extend(node.init)
            return out
        case StateField():
            return [node.type]
        case ValueDefinition():
            return [node.pattern, node.expression]
        case FunctionDefinition() | OperationDefinition():
            out = list(node.param_types)
            if node.result_type is not None:
                out.append(node.result_type)
            out.extend(node.params)
            out.append(node.body)
            if node.precondition is not None:
                out.append(node.precondition)
            if node.postcondition is not None:
                out.append(node.postcondition)
            return out
        case TypeName():
            return []
        case OptionalType():
            return [node.inner]
        case SeqType() | SetType():
            return [node.element]
        case MapType():
            return [node.key, node.value]
        case ProductType():
            return list(node.items)
        case PatternIdentifier() | DontCarePattern():
            return []
        case MatchValuePattern():
            return [node.expression]
        case SetUnionPattern():
            return [node.left, node.right]
        case RecordPattern() | TuplePattern():
            return list(node.subpatterns)
        case Literal() | Name() | OldName() | ResultName():
            return []
        case BinExp():
            return [node.left, node.right]
        case UnaryExp():
            return [node.operand]
        case Apply():
            return [node.callee, *node.arguments]
        case FieldRef():
            return [node.record]
        case LetExpr():
            return [*_binding_children(node.bindings), node.body]
        case IfExpr():
            return [node.condition, node.then_expr, node.else_expr]
        case SetEnum() | SeqEnum():
            return list(node.elements)
        case MapEnum():
            out = []
            for k, v in node.pairs:
                out.append(k)
                out.append(v)
            return out
        case RecordConstructor() | TupleConstructor():
            return list(node.arguments)
        case FieldAccess():
            return []
        case ApplyAccess():
            return [node.index]
        case StateDesignator():
            return list(node.accessors)
        case DclItem():
            return [node.type] + ([node.init] if node.init is not None else [])
        case Block():
            return [*node.declarations, *node.statements]
        case Assign():
            return [node.designator, node.expression]
        case If():
            out = [node.condition, node.then_stmt]
            if node.else_stmt is not None:
                out.append(node.else_stmt)
            return out
        case While():
            return [node.condition, node.body]
        case Call():
            return list(node.arguments)
        case LetStmt():
            return [*_binding_children(node.bindings), node.body]
        case Return():
            return [node.expression] if node.expression is not None else []
        case Skip():
            return []
    raise TypeError(f"unknown node class {type(node).__name__}")


def iter_nodes(root: Node) -> Iterator[Node]:
    """Depth-first, preorder, source order."""
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children_of(node)))


def node_index(root: Node) -> dict[int, Node]:
    return {n.node_id: n for n in iter_nodes(root)}


def build_parent_map(root: Node) -> dict[int, Node]:
    """node_id -> parent node, for every node except the root."""
    parents: dict[int, Node] = {}
    for node in iter_nodes(root):
        for child in children_of(node):
            parents[child.node_id] = node
    return parents


def smallest_node_covering(document: Document, position: Position) -> Optional[Node]:
    """Deepest node whose span contains ``position``.

    The document root itself never counts as a cover, so positions in the
    whitespace between definitions report no node.
    """
    current: Optional[Node] = None
    for definition in document.definitions():
        if definition.span.contains(position):
            current = definition
            break
    if current is None:
        return None
    while True:
        for child in children_of(current):
            if child.span.contains(position):
                current = child
                break
        else:
            return current


def ancestor_chain(document: Document, node: Node) -> list[Node]:
    """Path from the document root down to ``node`` (inclusive)."""
    parents = build_parent_map(document)
    chain = [node]
    while chain[0].node_id in parents:
        chain.insert(0, parents[chain[0].node_id])
    return chain


def display_span(node: Node) -> Span:
    """Span used when reporting a node in slice output.

    Branching statements report their keyword span so a marked If/While does
    not visually swallow branches that are not in the slice.
    """
    if isinstance(node, (If, While)) and node.keyword_span is not None:
        return node.keyword_span
    return node.span
