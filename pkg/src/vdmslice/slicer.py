"""Static backward slicing over bound documents.

A slice answers: which parts of an operation can influence the chosen
criterion (its result, one state variable at exit, one postcondition
conjunct, or the expression at a source position)?

The engine walks statements in reverse execution order carrying an agenda of
demanded dependency tokens.  Each step owns a write set and a read set; when
a step writes a demanded token it joins the slice and its reads join the
agenda.  Branches are processed per-arm from the same entry agenda and the
outcomes are unioned; loops run body passes from an accumulated agenda until
nothing grows.  Calls are handled through per-(callee, token) summaries that
are memoized and recomputed to a global fixed point, which keeps recursion
finite and lets one summary serve many call sites.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .binder import (
    DependencyToken,
    EntryToken,
    ExprToken,
    ParamToken,
    ResultToken,
    SymbolTable,
    VarToken,
    tokens_read_by,
    value_token,
)
from .parser import parse_position
from .syntax import (
    Apply,
    ApplyAccess,
    Assign,
    BinExp,
    Block,
    Call,
    DclItem,
    Document,
    DontCarePattern,
    Expression,
    FunctionDefinition,
    If,
    LetExpr,
    LetStmt,
    Literal,
    MatchValuePattern,
    Name,
    Node,
    OldName,
    OperationDefinition,
    Pattern,
    PatternIdentifier,
    ResultName,
    Return,
    Skip,
    Statement,
    While,
    build_parent_map,
    children_of,
    display_span,
    node_index,
    smallest_node_covering,
)


class CriterionError(Exception):
    """The requested slicing criterion does not name anything usable."""


# ======================================================================
# criteria
# ======================================================================

@dataclass(frozen=True)
class Criterion:
    """What to slice with respect to, at the exit of ``operation``.

    kind 'result' : the returned value (detail empty)
    kind 'state'  : one state variable at exit (detail = its name)
    kind 'post'   : one postcondition conjunct (detail = 1-based index)
    kind 'at'     : the expression at a position (detail = LINE:COLUMN)
    """

    operation: str
    kind: str
    detail: str = ""


def parse_criterion(operation: str, text: str) -> Criterion:
    """Turn a command-line criterion spelling into a Criterion."""
    if text == "result":
        return Criterion(operation, "result")
    for prefix, kind in (("state:", "state"), ("post:", "post"), ("at:", "at")):
        if text.startswith(prefix):
            detail = text[len(prefix):]
            if not detail:
                raise CriterionError(f"criterion '{text}' is missing its argument")
            return Criterion(operation, kind, detail)
    raise CriterionError(
        f"unknown criterion '{text}' (expected result, state:NAME, post:N or at:LINE:COLUMN)"
    )


def post_conjuncts(expr: Expression) -> list[Expression]:
    """Split a postcondition into its top-level conjuncts."""
    if isinstance(expr, BinExp) and expr.op == "and":
        return post_conjuncts(expr.left) + [expr.right]
    return [expr]


# ======================================================================
# results
# ======================================================================

@dataclass
class SliceStats:
    """Effort counters, mainly for tests that bound the fixed points."""

    while_iterations: int = 0
    summaries_computed: int = 0
    toplevel_passes: int = 0
    stabilize_passes: int = 0


@dataclass(frozen=True)
class SliceResult:
    criterion: Criterion
    mode: str
    node_ids: frozenset[int]
    criterion_node_ids: tuple[int, ...]
    visited_definitions: tuple[str, ...]
    stats: SliceStats


@dataclass(frozen=True)
class _Summary:
    """What one callee does for one demanded token.

    inputs : tokens at the callee boundary the demanded token depends on
             (parameter slots and state variables)
    nodes  : node ids inside the callee that join the caller's slice
    hit    : whether the callee writes the demanded token at all
    visited: declaration ids of every definition the summary walked
    """

    inputs: frozenset[DependencyToken]
    nodes: frozenset[int]
    hit: bool
    visited: frozenset[int]


_EMPTY_SUMMARY = _Summary(frozenset(), frozenset(), False, frozenset())


# ======================================================================
# the engine
# ======================================================================

class _Slicer:
    def __init__(
        self,
        document: Document,
        table: SymbolTable,
        mode: str,
        summaries: dict[tuple[int, DependencyToken], _Summary],
        stats: SliceStats,
        enclosing_id: int = -1,
    ):
        self.document = document
        self.table = table
        self.mode = mode
        self.summaries = summaries
        self.stats = stats
        self.agenda: set[DependencyToken] = set()
        self.slice_nodes: set[int] = set()
        self.visited: set[int] = set()
        # node_id of the definition whose body is being walked
        self._enclosing_id = enclosing_id

    # ---------------- the core dependency step ----------------

    def _depend(
        self,
        node: Node,
        writes: set[DependencyToken],
        reads: set[DependencyToken],
        consume: bool = True,
    ) -> bool:
        common = self.agenda & writes
        if not common:
            return False
        if consume:
            self.agenda -= common
        self.agenda |= reads
        self.slice_nodes.add(node.node_id)
        return True

    def _value_token(self, expr: Expression) -> DependencyToken | None:
        return value_token(self.table, expr)

    def _opt(self, expr: Expression | None) -> set[DependencyToken]:
        if expr is None:
            return set()
        token = self._value_token(expr)
        return set() if token is None else {token}

    # ---------------- statements ----------------

    def process_statement(self, stmt: Statement) -> None:
        if isinstance(stmt, Block):
            for inner in reversed(stmt.statements):
                self.process_statement(inner)
            for item in reversed(stmt.declarations):
                self._process_dcl(item)
            return
        if isinstance(stmt, Assign):
            self._process_assign(stmt)
            return
        if isinstance(stmt, If):
            self._process_if(stmt)
            return
        if isinstance(stmt, While):
            self._process_while(stmt)
            return
        if isinstance(stmt, Call):
            callee = self.table.call_targets.get(stmt.node_id)
            if callee is not None:
                self._process_call_like(stmt, callee, stmt.arguments, None)
            return
        if isinstance(stmt, LetStmt):
            self.process_statement(stmt.body)
            self._process_bindings(stmt.bindings)
            return
        if isinstance(stmt, Return):
            if stmt.expression is not None:
                owner = self.table.callable_decls[self._enclosing_id]
                # several returns can reach the exit, so the demand survives
                self._depend(
                    stmt, {ResultToken(owner)}, self._opt(stmt.expression), consume=False
                )
                self.process_expression(stmt.expression)
            return
        if isinstance(stmt, Skip):
            return
        raise TypeError(f"unknown statement class {type(stmt).__name__}")

    def _process_dcl(self, item: DclItem) -> None:
        decl = self.table.decl_of(item)
        self._depend(item, {VarToken(decl.decl_id)}, self._opt(item.init))
        if item.init is not None:
            self.process_expression(item.init)

    def _process_assign(self, stmt: Assign) -> None:
        target = self.table.designator_targets.get(stmt.designator.node_id)
        if target is None:
            return
        reads = self._opt(stmt.expression)
        accessors = stmt.designator.accessors
        for accessor in accessors:
            if isinstance(accessor, ApplyAccess):
                reads |= self._opt(accessor.index)
        if accessors and self.mode == "weak":
            # an indexed or field update keeps the rest of the old value
            reads.add(VarToken(target))
        self._depend(stmt, {VarToken(target)}, reads)
        self.process_expression(stmt.expression)
        for accessor in reversed(accessors):
            if isinstance(accessor, ApplyAccess):
                self.process_expression(accessor.index)

    def _run_branch(self, entry: frozenset, stmt: Statement | None, parent: If) -> set:
        self.agenda = set(entry)
        before = len(self.slice_nodes)
        if stmt is not None:
            self.process_statement(stmt)
        if self.agenda != set(entry) or len(self.slice_nodes) > before:
            self.agenda |= self._opt(parent.condition)
            self.slice_nodes.add(parent.node_id)
            self.process_expression(parent.condition)
        return self.agenda

    def _process_if(self, stmt: If) -> None:
        entry = frozenset(self.agenda)
        else_out = self._run_branch(entry, stmt.else_stmt, stmt)
        then_out = self._run_branch(entry, stmt.then_stmt, stmt)
        self.agenda = then_out | else_out

    def _process_while(self, stmt: While) -> None:
        # the exit test always runs, so applies inside it keep their effects
        self.process_expression(stmt.condition)
        accumulated = set(self.agenda)
        while True:
            self.stats.while_iterations += 1
            self.agenda = set(accumulated)
            before = len(self.slice_nodes)
            self.process_statement(stmt.body)
            hit = self.agenda != accumulated or len(self.slice_nodes) > before
            if hit:
                self.agenda |= self._opt(stmt.condition)
                self.slice_nodes.add(stmt.node_id)
                self.process_expression(stmt.condition)
            grown = accumulated | self.agenda
            if grown == accumulated:
                break
            accumulated = grown
        self.agenda = accumulated

    def _process_bindings(self, bindings: list[tuple[Pattern, Expression]]) -> None:
        for pat, expr in reversed(bindings):
            self.process_pattern(pat, self._opt(expr))
            self.process_expression(expr)

    # ---------------- patterns ----------------

    def process_pattern(self, pat: Pattern, sources: set[DependencyToken]) -> None:
        if isinstance(pat, PatternIdentifier):
            decl = self.table.decl_of(pat)
            self._depend(pat, {VarToken(decl.decl_id)}, sources)
            return
        if isinstance(pat, DontCarePattern):
            return
        if isinstance(pat, MatchValuePattern):
            reads = sources | self._opt(pat.expression)
            self._depend(pat, {ExprToken(pat.node_id)}, reads)
            self.process_expression(pat.expression)
            return
        own = ExprToken(pat.node_id)
        subpatterns = [c for c in children_of(pat) if isinstance(c, Pattern)]
        plain = [c for c in subpatterns if not isinstance(c, MatchValuePattern)]
        guards = [c for c in subpatterns if isinstance(c, MatchValuePattern)]
        for child in reversed(plain):
            self.process_pattern(child, {own})
        self._depend(pat, {own}, sources | {ExprToken(g.node_id) for g in guards})
        for guard in guards:
            self.process_pattern(guard, {own})

    def _process_toplevel_params(self, definition) -> None:
        owner = self.table.callable_decls[definition.node_id]
        for index, pat in reversed(list(enumerate(definition.params))):
            self.process_pattern(pat, {ParamToken(owner, index)})

    # ---------------- expressions ----------------

    def process_expression(self, expr: Expression) -> None:
        if isinstance(expr, (Literal, Name, OldName, ResultName)):
            return
        if isinstance(expr, Apply):
            callee = expr.callee
            if isinstance(callee, Name) and self.table.resolves_to_callable(callee):
                decl = self.table.target_of_name(callee)
                self._process_call_like(expr, decl.decl_id, expr.arguments, ExprToken(expr.node_id))
                return
            # data application: reads the applied value and the arguments
            reads = self._opt(callee)
            for arg in expr.arguments:
                reads |= self._opt(arg)
            self._depend(expr, {ExprToken(expr.node_id)}, reads)
            for arg in reversed(expr.arguments):
                self.process_expression(arg)
            self.process_expression(callee)
            return
        if isinstance(expr, LetExpr):
            self._depend(expr, {ExprToken(expr.node_id)}, self._opt(expr.body))
            self.process_expression(expr.body)
            self._process_bindings(expr.bindings)
            return
        children = [c for c in children_of(expr) if isinstance(c, Expression)]
        reads: set[DependencyToken] = set()
        for child in children:
            reads |= self._opt(child)
        self._depend(expr, {ExprToken(expr.node_id)}, reads)
        for child in reversed(children):
            self.process_expression(child)

    # ---------------- calls and summaries ----------------

    def _process_call_like(
        self,
        node: Node,
        callee: int,
        arguments: list[Expression],
        demand: ExprToken | None,
    ) -> None:
        decl = self.table.decl(callee)
        requested: list[DependencyToken] = []
        if decl.kind == "operation":
            for field_id in self.table.state_field_order:
                token = VarToken(field_id)
                if token in self.agenda:
                    requested.append(token)
        returns = (
            decl.node.result_type is not None
            if isinstance(decl.node, OperationDefinition)
            else True
        )
        if demand is not None and demand in self.agenda and returns:
            requested.append(ResultToken(callee))
        hits = []
        for token in requested:
            summary = self._summary(callee, token)
            if summary.hit:
                hits.append((token, summary))
        if hits:
            consumed: set[DependencyToken] = set()
            added: set[DependencyToken] = set()
            for token, summary in hits:
                consumed.add(demand if isinstance(token, ResultToken) else token)
                for inp in summary.inputs:
                    if isinstance(inp, ParamToken):
                        if inp.index < len(arguments):
                            seed = self._value_token(arguments[inp.index])
                            if seed is not None:
                                added.add(seed)
                    else:
                        added.add(inp)
                self.slice_nodes |= summary.nodes
                self.visited |= summary.visited
            self.agenda -= consumed
            self.agenda |= added
            self.slice_nodes.add(node.node_id)
            self.visited.add(callee)
        for arg in reversed(arguments):
            self.process_expression(arg)

    def _summary(self, callee: int, token: DependencyToken) -> _Summary:
        key = (callee, token)
        existing = self.summaries.get(key)
        if existing is not None:
            return existing
        # provisional entry so recursive callees terminate; fixed below
        self.summaries[key] = _EMPTY_SUMMARY
        result = self._compute_summary(callee, token)
        self.summaries[key] = result
        return result

    def _compute_summary(self, callee: int, token: DependencyToken) -> _Summary:
        self.stats.summaries_computed += 1
        decl = self.table.decl(callee)
        definition = decl.node
        sub = _Slicer(
            self.document, self.table, self.mode, self.summaries, self.stats,
            enclosing_id=definition.node_id,
        )
        sub.agenda = {token}
        if isinstance(definition, OperationDefinition):
            sub.process_statement(definition.body)
        else:
            assert isinstance(definition, FunctionDefinition)
            body = definition.body
            sub._depend(body, {ResultToken(callee)}, sub._opt(body))
            sub.process_expression(body)
        sub._process_toplevel_params(definition)
        inputs = frozenset(
            t
            for t in sub.agenda
            if (isinstance(t, ParamToken) and t.decl_id == callee)
            or (isinstance(t, VarToken) and self.table.decl(t.decl_id).kind == "state")
        )
        nodes = frozenset(sub.slice_nodes)
        return _Summary(inputs, nodes, bool(nodes), frozenset({callee}) | sub.visited)

    def _stabilize(self) -> None:
        while True:
            self.stats.stabilize_passes += 1
            before = dict(self.summaries)
            for key in list(self.summaries):
                self.summaries[key] = self._compute_summary(*key)
            if self.summaries == before:
                return


# ======================================================================
# criterion seeding and the public entry point
# ======================================================================

def _find_operation(document: Document, table: SymbolTable, name: str) -> OperationDefinition:
    operation = document.operation(name)
    if operation is None:
        raise CriterionError(f"unknown operation '{name}'")
    return operation


def _seed(
    document: Document, table: SymbolTable, criterion: Criterion
) -> tuple[OperationDefinition, set[DependencyToken], list[int]]:
    operation = _find_operation(document, table, criterion.operation)
    owner = table.callable_decls[operation.node_id]
    if criterion.kind == "result":
        if operation.result_type is None:
            raise CriterionError(f"operation '{operation.name}' does not return a value")
        return operation, {ResultToken(owner)}, []
    if criterion.kind == "state":
        decl_id = table.state_field_ids.get(criterion.detail)
        if decl_id is None:
            raise CriterionError(f"unknown state variable '{criterion.detail}'")
        return operation, {VarToken(decl_id)}, [table.decl(decl_id).node.node_id]
    if criterion.kind == "post":
        if operation.postcondition is None:
            raise CriterionError(f"operation '{operation.name}' has no postcondition")
        conjuncts = post_conjuncts(operation.postcondition)
        try:
            index = int(criterion.detail)
        except ValueError:
            raise CriterionError(f"postcondition conjunct index must be a number, got '{criterion.detail}'") from None
        if not 1 <= index <= len(conjuncts):
            raise CriterionError(
                f"the postcondition has {len(conjuncts)} conjunct(s); {index} is out of range"
            )
        conjunct = conjuncts[index - 1]
        return operation, set(tokens_read_by(table, conjunct)), [conjunct.node_id]
    if criterion.kind == "at":
        try:
            position = parse_position(criterion.detail)
        except ValueError as exc:
            raise CriterionError(str(exc)) from None
        covering = smallest_node_covering(document, position)
        node = covering
        parents = build_parent_map(document)
        while node is not None and not isinstance(node, Expression):
            node = parents.get(node.node_id)
        if node is None:
            raise CriterionError(f"no expression at {criterion.detail}")
        scope = node
        while scope is not None and scope.node_id != operation.node_id:
            scope = parents.get(scope.node_id)
        if scope is None:
            raise CriterionError(
                f"position {criterion.detail} is not inside operation '{operation.name}'"
            )
        token = value_token(table, node)
        return operation, (set() if token is None else {token}), [node.node_id]
    raise CriterionError(f"unknown criterion kind '{criterion.kind}'")


def _ancestor_ids(parents: dict[int, Node], node: Node) -> set[int]:
    ids = {node.node_id}
    current = parents.get(node.node_id)
    while current is not None:
        ids.add(current.node_id)
        current = parents.get(current.node_id)
    return ids


def _run_prefix(slicer: _Slicer, stmt: Statement, on_path: set[int]) -> None:
    """Process the parts of ``stmt`` that execute before the criterion.

    ``stmt`` is an ancestor of the criterion expression.  Inner prefixes are
    processed first, matching reverse execution order.
    """
    if isinstance(stmt, Block):
        split = None
        for index, child in enumerate(stmt.statements):
            if child.node_id in on_path:
                split = index
                break
        if split is not None:
            _run_prefix(slicer, stmt.statements[split], on_path)
            for child in reversed(stmt.statements[:split]):
                slicer.process_statement(child)
            for item in reversed(stmt.declarations):
                slicer._process_dcl(item)
            return
        for index, item in enumerate(stmt.declarations):
            if item.node_id in on_path:
                for earlier in reversed(stmt.declarations[:index]):
                    slicer._process_dcl(earlier)
                return
        return
    if isinstance(stmt, If):
        for branch in (stmt.then_stmt, stmt.else_stmt):
            if branch is not None and branch.node_id in on_path:
                _run_prefix(slicer, branch, on_path)
                slicer.agenda |= slicer._opt(stmt.condition)
                slicer.slice_nodes.add(stmt.node_id)
                slicer.process_expression(stmt.condition)
                return
        return  # criterion in the condition: nothing runs before it here
    if isinstance(stmt, While):
        if stmt.body.node_id in on_path:
            _run_prefix(slicer, stmt.body, on_path)
            slicer.agenda |= slicer._opt(stmt.condition)
            slicer.slice_nodes.add(stmt.node_id)
            slicer.process_expression(stmt.condition)
        # earlier iterations may feed the criterion: run the full loop
        slicer._process_while(stmt)
        return
    if isinstance(stmt, LetStmt):
        if stmt.body.node_id in on_path:
            _run_prefix(slicer, stmt.body, on_path)
            slicer._process_bindings(stmt.bindings)
            return
        for index, (pat, expr) in enumerate(stmt.bindings):
            if pat.node_id in on_path or expr.node_id in on_path:
                slicer._process_bindings(stmt.bindings[:index])
                return
        return
    # Assign / Return / Call / Skip: nothing inside them runs before the
    # criterion expression they contain
    return


def backward_slice(
    document: Document,
    table: SymbolTable,
    criterion: Criterion,
    mode: str = "weak",
    stats: SliceStats | None = None,
) -> SliceResult:
    """Compute the backward slice for ``criterion``; raises CriterionError."""
    if mode not in ("weak", "strong"):
        raise ValueError(f"unknown update mode '{mode}' (expected 'weak' or 'strong')")
    operation, seed_agenda, criterion_nodes = _seed(document, table, criterion)
    stats = stats if stats is not None else SliceStats()
    summaries: dict[tuple[int, DependencyToken], _Summary] = {}
    parents = build_parent_map(document)
    index = node_index(document)

    criterion_expr: Expression | None = None
    region = "exit"
    if criterion.kind == "at":
        criterion_expr = index[criterion_nodes[0]]  # type: ignore[assignment]
        on_path = _ancestor_ids(parents, criterion_expr)
        if operation.precondition is not None and operation.precondition.node_id in on_path:
            region = "pre"
        elif operation.postcondition is not None and operation.postcondition.node_id in on_path:
            region = "post"
        else:
            region = "body"

    previous: dict | None = None
    while True:
        stats.toplevel_passes += 1
        slicer = _Slicer(
            document, table, mode, summaries, stats, enclosing_id=operation.node_id
        )
        slicer.agenda = set(seed_agenda)
        if criterion.kind == "at":
            assert criterion_expr is not None
            slicer.process_expression(criterion_expr)
            if region == "body":
                on_path = _ancestor_ids(parents, criterion_expr)
                _run_prefix(slicer, operation.body, on_path)
            elif region == "post":
                slicer.process_statement(operation.body)
            # region 'pre': nothing of the body has run yet
        else:
            slicer.process_statement(operation.body)
        slicer._process_toplevel_params(operation)
        slicer._stabilize()
        snapshot = dict(summaries)
        if snapshot == previous:
            break
        previous = snapshot

    visited_ids = set(slicer.visited) | {table.callable_decls[operation.node_id]}
    visited = tuple(sorted(table.decl(d).name for d in visited_ids))
    return SliceResult(
        criterion=criterion,
        mode=mode,
        node_ids=frozenset(slicer.slice_nodes),
        criterion_node_ids=tuple(criterion_nodes),
        visited_definitions=visited,
        stats=stats,
    )


# ======================================================================
# shared serialisation
# ======================================================================

def _span_fields(node: Node) -> dict:
    span = display_span(node)
    return {
        "start": {"line": span.start.line, "column": span.start.column},
        "end": {"line": span.end.line, "column": span.end.column},
    }


def _node_entries(index: dict[int, Node], ids) -> list[dict]:
    entries = []
    for node_id in ids:
        node = index[node_id]
        entry = {"nodeId": node_id, "kind": type(node).__name__}
        entry.update(_span_fields(node))
        entries.append(entry)
    entries.sort(
        key=lambda e: (
            e["start"]["line"],
            e["start"]["column"],
            e["end"]["line"],
            e["end"]["column"],
            e["nodeId"],
        )
    )
    return entries


def result_payload(
    document: Document, result: SliceResult, file_label: str
) -> dict:
    """The JSON-ready dict shared by the command line and the server."""
    index = node_index(document)
    return {
        "file": file_label,
        "operation": result.criterion.operation,
        "criterion": {"kind": result.criterion.kind, "detail": result.criterion.detail},
        "mode": result.mode,
        "slice": _node_entries(index, result.node_ids),
        "criterionNodes": _node_entries(index, result.criterion_node_ids),
        "visitedDefinitions": list(result.visited_definitions),
    }


def payload_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
