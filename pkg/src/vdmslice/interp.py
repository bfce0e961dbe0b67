"""Reference interpreter, slice-guided reduction and criterion checking.

Values are immutable (numbers, booleans, nil, text, quotes, tuples for
sequences, frozensets, hashable maps and records), so assignment never
aliases: copying a sequence and updating one copy leaves the other alone.
Conjunction, disjunction and implication short-circuit.

``run_reduced`` rebuilds a document keeping only the statements a slice
selected, replacing the rest with skips; declarations and let bindings stay
so every name still exists.  One deliberate asymmetry: in a reduced run an
operation that finishes without returning yields an undefined placeholder
instead of failing, because the reduction may legitimately drop a return
whose value nothing demanded; any attempt to *use* the placeholder still
fails, so genuine slicing mistakes remain observable.

``check_criterion`` compares the original and the reduced document on random
inputs: for each trial both are run from a fresh initial state and the value
named by the criterion is observed at exit.  Trials where the original run
itself fails are skipped; a reduced run that fails or disagrees is a check
failure.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .binder import SymbolTable
from .slicer import Criterion, CriterionError, backward_slice, post_conjuncts
from .syntax import (
    Apply,
    ApplyAccess,
    Assign,
    BinExp,
    Block,
    Call,
    Document,
    DontCarePattern,
    Expression,
    FieldAccess,
    FieldRef,
    FunctionDefinition,
    If,
    IfExpr,
    LetExpr,
    LetStmt,
    Literal,
    MapEnum,
    MapType,
    MatchValuePattern,
    Name,
    OldName,
    OperationDefinition,
    OptionalType,
    Pattern,
    PatternIdentifier,
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
    Statement,
    TupleConstructor,
    TuplePattern,
    TypeExpr,
    TypeName,
    UnaryExp,
    While,
    iter_nodes,
)


# ======================================================================
# values
# ======================================================================

class _Undefined:
    __slots__ = ()

    def __repr__(self) -> str:
        return "undefined"


UNDEFINED = _Undefined()


class _Void:
    __slots__ = ()

    def __repr__(self) -> str:
        return "void"


VOID = _Void()


@dataclass(frozen=True)
class QuoteVal:
    name: str


@dataclass(frozen=True)
class TupleVal:
    items: tuple


class RecordVal:
    """A record value; field names are carried only for the state record,
    which is the one record type whose fields are declared in the document."""

    __slots__ = ("type_name", "fields", "field_names")

    def __init__(self, type_name: str, fields: tuple, field_names: tuple | None = None):
        self.type_name = type_name
        self.fields = fields
        self.field_names = field_names

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, RecordVal)
            and self.type_name == other.type_name
            and self.fields == other.fields
        )

    def __hash__(self) -> int:
        return hash(("record", self.type_name, self.fields))

    def __repr__(self) -> str:
        return f"mk_{self.type_name}{self.fields!r}"


class FrozenMap:
    """Immutable hashable finite map."""

    __slots__ = ("_data",)

    def __init__(self, items=()):
        self._data = dict(items)

    def get(self, key, default=None):
        return self._data.get(key, default)

    def __contains__(self, key) -> bool:
        return key in self._data

    def __len__(self) -> int:
        return len(self._data)

    def items(self):
        return self._data.items()

    def keys(self):
        return self._data.keys()

    def values(self):
        return self._data.values()

    def set(self, key, value) -> "FrozenMap":
        updated = dict(self._data)
        updated[key] = value
        return FrozenMap(updated)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FrozenMap) and self._data == other._data

    def __hash__(self) -> int:
        return hash(frozenset(self._data.items()))

    def __repr__(self) -> str:
        return f"FrozenMap({self._data!r})"


def render_value(value) -> str:
    """Canonical text for a value; also the basis of value equality."""
    if value is None:
        return "nil"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, QuoteVal):
        return f"<{value.name}>"
    if isinstance(value, tuple):
        return "[" + ", ".join(render_value(v) for v in value) + "]"
    if isinstance(value, frozenset):
        return "{" + ", ".join(sorted(render_value(v) for v in value)) + "}"
    if isinstance(value, FrozenMap):
        if len(value) == 0:
            return "{|->}"
        pairs = sorted(
            (render_value(k), render_value(v)) for k, v in value.items()
        )
        return "{" + ", ".join(f"{k} |-> {v}" for k, v in pairs) + "}"
    if isinstance(value, TupleVal):
        return "mk_(" + ", ".join(render_value(v) for v in value.items) + ")"
    if isinstance(value, RecordVal):
        return f"mk_{value.type_name}(" + ", ".join(render_value(v) for v in value.fields) + ")"
    if value is UNDEFINED:
        return "undefined"
    return repr(value)


def values_equal(a, b) -> bool:
    """Equality that keeps booleans and numbers apart."""
    return render_value(a) == render_value(b)


# ======================================================================
# outcomes
# ======================================================================

@dataclass(frozen=True)
class Returned:
    value: object


@dataclass(frozen=True)
class CompletedVoid:
    pass


@dataclass(frozen=True)
class AssertionViolation:
    kind: str  # 'invariant' | 'precondition' | 'postcondition'
    conjunct: int | None = None  # 1-based, for postconditions


@dataclass(frozen=True)
class RuntimeErrorOutcome:
    message: str


Outcome = Returned | CompletedVoid | AssertionViolation | RuntimeErrorOutcome


def outcome_text(outcome: Outcome) -> str:
    if isinstance(outcome, Returned):
        return f"returned {render_value(outcome.value)}"
    if isinstance(outcome, CompletedVoid):
        return "completed"
    if isinstance(outcome, AssertionViolation):
        where = f" conjunct {outcome.conjunct}" if outcome.conjunct is not None else ""
        return f"assertion violation: {outcome.kind}{where}"
    return f"runtime error: {outcome.message}"


class EvaluationError(Exception):
    pass


class AssertionStop(Exception):
    def __init__(self, kind: str, conjunct: int | None = None):
        super().__init__(kind)
        self.kind = kind
        self.conjunct = conjunct


# ======================================================================
# frames
# ======================================================================

@dataclass
class Frame:
    vars: dict[int, object] = field(default_factory=dict)
    old: dict[int, object] | None = None
    result: object = UNDEFINED


_MAX_CALL_DEPTH = 200


# ======================================================================
# the interpreter
# ======================================================================

class Interpreter:
    def __init__(
        self,
        document: Document,
        table: SymbolTable,
        step_limit: int = 200_000,
        check_assertions: bool = True,
        allow_missing_return: bool = False,
    ):
        self.document = document
        self.table = table
        self.step_limit = step_limit
        self.check_assertions = check_assertions
        self.allow_missing_return = allow_missing_return
        self.values: dict[int, object] = {}
        self.state: dict[int, object] = {}
        self.steps = 0
        self.depth = 0
        self.last_post_frame: Frame | None = None
        self._started = False

    # ---------------- start-up ----------------

    def _start(self) -> None:
        if self._started:
            return
        self._started = True
        for definition in self.document.values:
            value = self.evaluate(definition.expression, Frame())
            if not self._match(definition.pattern, value, self.values):
                raise EvaluationError(
                    f"value definition pattern does not match {render_value(value)}"
                )
        state = self.document.state
        if state is None:
            return
        for decl in self.table.state_fields():
            self.state[decl.decl_id] = UNDEFINED
        if state.init is not None:
            pat, expr = state.init
            if not (
                isinstance(pat, PatternIdentifier)
                and isinstance(expr, BinExp)
                and expr.op == "="
                and isinstance(expr.left, Name)
                and self.table.name_targets.get(expr.left.node_id)
                == self.table.declaring_nodes.get(pat.node_id)
            ):
                raise EvaluationError(
                    "the state initialiser must have the form  s == s = expression"
                )
            value = self.evaluate(expr.right, Frame())
            if not (
                isinstance(value, RecordVal)
                and value.type_name == state.name
                and len(value.fields) == len(state.fields)
            ):
                raise EvaluationError(
                    f"the state initialiser must build a mk_{state.name} record"
                )
            for decl, fld in zip(self.table.state_fields(), value.fields):
                self.state[decl.decl_id] = fld
            self._check_invariant()

    def state_record(self) -> RecordVal:
        state = self.document.state
        assert state is not None
        return RecordVal(
            state.name,
            tuple(self.state[d.decl_id] for d in self.table.state_fields()),
            tuple(f.name for f in state.fields),
        )

    def _check_invariant(self) -> None:
        state = self.document.state
        if state is None or state.invariant is None or not self.check_assertions:
            return
        pat, expr = state.invariant
        bindings: dict[int, object] = {}
        if not self._match(pat, self.state_record(), bindings):
            raise EvaluationError("the invariant pattern does not match the state")
        holds = self.evaluate(expr, Frame(vars=bindings))
        if not isinstance(holds, bool):
            raise EvaluationError("the invariant must be a boolean")
        if not holds:
            raise AssertionStop("invariant")

    # ---------------- public entry points ----------------

    def run_operation(self, name: str, arguments: list) -> Outcome:
        operation = self.document.operation(name)
        if operation is None:
            return RuntimeErrorOutcome(f"unknown operation '{name}'")
        try:
            self._start()
            value = self.call(operation, list(arguments))
        except AssertionStop as stop:
            return AssertionViolation(stop.kind, stop.conjunct)
        except EvaluationError as exc:
            return RuntimeErrorOutcome(str(exc))
        except RecursionError:
            return RuntimeErrorOutcome("evaluation nested too deeply")
        if operation.result_type is None:
            return CompletedVoid()
        return Returned(value)

    # ---------------- calls ----------------

    def call(self, operation: OperationDefinition, arguments: list):
        self.depth += 1
        if self.depth > _MAX_CALL_DEPTH:
            self.depth -= 1
            raise EvaluationError("call depth exceeded")
        try:
            frame = Frame()
            self._bind_arguments(operation, arguments, frame)
            old = dict(self.state)
            if self.check_assertions and operation.precondition is not None:
                if self._truth(operation.precondition, frame) is False:
                    raise AssertionStop("precondition")
            signal = self.execute(operation.body, frame)
            if signal is not None:
                result = signal[1]
            else:
                result = VOID
            if operation.result_type is not None and result is VOID:
                if self.allow_missing_return:
                    result = UNDEFINED
                else:
                    raise EvaluationError(
                        f"operation '{operation.name}' finished without returning a value"
                    )
            post_frame = Frame(vars=dict(frame.vars), old=old, result=result)
            if self.check_assertions and operation.postcondition is not None:
                for index, conjunct in enumerate(post_conjuncts(operation.postcondition), 1):
                    if self._truth(conjunct, post_frame) is False:
                        raise AssertionStop("postcondition", index)
            self.last_post_frame = post_frame
            return result
        finally:
            self.depth -= 1

    def _call_function(self, function: FunctionDefinition, arguments: list):
        self.depth += 1
        if self.depth > _MAX_CALL_DEPTH:
            self.depth -= 1
            raise EvaluationError("call depth exceeded")
        try:
            frame = Frame()
            self._bind_arguments(function, arguments, frame)
            if self.check_assertions and function.precondition is not None:
                if self._truth(function.precondition, frame) is False:
                    raise AssertionStop("precondition")
            value = self.evaluate(function.body, frame)
            if self.check_assertions and function.postcondition is not None:
                frame.result = value
                if self._truth(function.postcondition, frame) is False:
                    raise AssertionStop("postcondition")
            return value
        finally:
            self.depth -= 1

    def _bind_arguments(self, definition, arguments: list, frame: Frame) -> None:
        if len(arguments) != len(definition.params):
            raise EvaluationError(
                f"'{definition.name}' expects {len(definition.params)} argument(s),"
                f" got {len(arguments)}"
            )
        for pat, value in zip(definition.params, arguments):
            if not self._match(pat, value, frame.vars):
                raise EvaluationError(
                    f"argument {render_value(value)} does not match the parameter pattern"
                )

    def _truth(self, expr: Expression, frame: Frame) -> bool:
        value = self.evaluate(expr, frame)
        if not isinstance(value, bool):
            raise EvaluationError("an assertion must evaluate to a boolean")
        return value

    # ---------------- statements ----------------

    def execute(self, stmt: Statement, frame: Frame):
        """Run one statement; returns None or ('return', value)."""
        self._step()
        if isinstance(stmt, Block):
            for item in stmt.declarations:
                value = self.evaluate(item.init, frame) if item.init is not None else UNDEFINED
                frame.vars[self.table.decl_of(item).decl_id] = value
            for inner in stmt.statements:
                signal = self.execute(inner, frame)
                if signal is not None:
                    return signal
            return None
        if isinstance(stmt, Assign):
            self._assign(stmt, frame)
            return None
        if isinstance(stmt, If):
            condition = self.evaluate(stmt.condition, frame)
            if not isinstance(condition, bool):
                raise EvaluationError("a condition must be a boolean")
            if condition:
                return self.execute(stmt.then_stmt, frame)
            if stmt.else_stmt is not None:
                return self.execute(stmt.else_stmt, frame)
            return None
        if isinstance(stmt, While):
            while True:
                self._step()
                condition = self.evaluate(stmt.condition, frame)
                if not isinstance(condition, bool):
                    raise EvaluationError("a condition must be a boolean")
                if not condition:
                    return None
                signal = self.execute(stmt.body, frame)
                if signal is not None:
                    return signal
        if isinstance(stmt, Call):
            target = self.table.call_targets.get(stmt.node_id)
            if target is None:
                raise EvaluationError(f"unknown operation '{stmt.callee_name}'")
            operation = self.table.decl(target).node
            assert isinstance(operation, OperationDefinition)
            arguments = [self.evaluate(a, frame) for a in stmt.arguments]
            self.call(operation, arguments)
            return None
        if isinstance(stmt, LetStmt):
            self._bind_let(stmt.bindings, frame)
            return self.execute(stmt.body, frame)
        if isinstance(stmt, Return):
            if stmt.expression is None:
                return ("return", VOID)
            return ("return", self.evaluate(stmt.expression, frame))
        if isinstance(stmt, Skip):
            return None
        raise EvaluationError(f"cannot execute {type(stmt).__name__}")

    def _bind_let(self, bindings, frame: Frame) -> None:
        evaluated = [(pat, self.evaluate(expr, frame)) for pat, expr in bindings]
        for pat, value in evaluated:
            if not self._match(pat, value, frame.vars):
                raise EvaluationError(
                    f"let pattern does not match {render_value(value)}"
                )

    def _assign(self, stmt: Assign, frame: Frame) -> None:
        rhs = self.evaluate(stmt.expression, frame)
        designator = stmt.designator
        decl_id = self.table.designator_targets.get(designator.node_id)
        if decl_id is None:
            raise EvaluationError(f"cannot assign to '{designator.base_name}'")
        decl = self.table.decl(decl_id)
        store = self.state if decl.kind == "state" else frame.vars
        if designator.accessors:
            current = store.get(decl_id, UNDEFINED)
            if current is UNDEFINED:
                raise EvaluationError(
                    f"'{designator.base_name}' is undefined, cannot update part of it"
                )
            new_value = self._updated(current, designator.accessors, 0, rhs, frame)
        else:
            new_value = rhs
        store[decl_id] = new_value
        if decl.kind == "state":
            self._check_invariant()

    def _updated(self, value, accessors, index: int, rhs, frame: Frame):
        if index == len(accessors):
            return rhs
        accessor = accessors[index]
        if isinstance(accessor, ApplyAccess):
            key = self.evaluate(accessor.index, frame)
            if isinstance(value, FrozenMap):
                if index + 1 == len(accessors):
                    return value.set(key, rhs)
                if key not in value:
                    raise EvaluationError(
                        f"map has no entry for {render_value(key)}"
                    )
                return value.set(
                    key, self._updated(value.get(key), accessors, index + 1, rhs, frame)
                )
            if isinstance(value, tuple):
                if not isinstance(key, int) or isinstance(key, bool):
                    raise EvaluationError("a sequence index must be a number")
                if not 1 <= key <= len(value):
                    raise EvaluationError(f"sequence index {key} is out of range")
                element = self._updated(value[key - 1], accessors, index + 1, rhs, frame)
                return value[: key - 1] + (element,) + value[key:]
            raise EvaluationError("only maps and sequences can be updated by index")
        assert isinstance(accessor, FieldAccess)
        if not (isinstance(value, RecordVal) and value.field_names is not None):
            raise EvaluationError("only state records can be updated by field")
        if accessor.field not in value.field_names:
            raise EvaluationError(
                f"record {value.type_name} has no field '{accessor.field}'"
            )
        position = value.field_names.index(accessor.field)
        fields = list(value.fields)
        fields[position] = self._updated(fields[position], accessors, index + 1, rhs, frame)
        return RecordVal(value.type_name, tuple(fields), value.field_names)

    # ---------------- expressions ----------------

    def _step(self) -> None:
        self.steps += 1
        if self.steps > self.step_limit:
            raise EvaluationError("step limit exceeded")

    def evaluate(self, expr: Expression, frame: Frame):
        self._step()
        if isinstance(expr, Literal):
            if expr.kind == "quote":
                return QuoteVal(expr.value)  # type: ignore[arg-type]
            return expr.value
        if isinstance(expr, Name):
            decl_id = self.table.name_targets.get(expr.node_id)
            if decl_id is None:
                raise EvaluationError(f"unknown name '{expr.identifier}'")
            decl = self.table.decl(decl_id)
            if decl.kind == "state":
                value = self.state.get(decl_id, UNDEFINED)
            elif decl.kind == "value":
                if decl_id not in self.values:
                    raise EvaluationError(
                        f"value '{expr.identifier}' is used before its definition"
                    )
                value = self.values[decl_id]
            else:
                value = frame.vars.get(decl_id, UNDEFINED)
            if value is UNDEFINED:
                raise EvaluationError(f"'{expr.identifier}' is used before it has a value")
            return value
        if isinstance(expr, OldName):
            decl_id = self.table.oldname_targets[expr.node_id]
            if frame.old is None:
                raise EvaluationError("old values are only available in postconditions")
            value = frame.old.get(decl_id, UNDEFINED)
            if value is UNDEFINED:
                raise EvaluationError(f"'{expr.identifier}~' is undefined")
            return value
        if isinstance(expr, ResultName):
            if frame.result is UNDEFINED:
                raise EvaluationError("RESULT is undefined")
            return frame.result
        if isinstance(expr, BinExp):
            return self._binary(expr, frame)
        if isinstance(expr, UnaryExp):
            return self._unary(expr, frame)
        if isinstance(expr, Apply):
            return self._apply(expr, frame)
        if isinstance(expr, FieldRef):
            record = self.evaluate(expr.record, frame)
            if not (isinstance(record, RecordVal) and record.field_names is not None):
                raise EvaluationError("only state records support field access")
            if expr.field not in record.field_names:
                raise EvaluationError(
                    f"record {record.type_name} has no field '{expr.field}'"
                )
            return record.fields[record.field_names.index(expr.field)]
        if isinstance(expr, LetExpr):
            inner = Frame(vars=dict(frame.vars), old=frame.old, result=frame.result)
            self._bind_let(expr.bindings, inner)
            return self.evaluate(expr.body, inner)
        if isinstance(expr, IfExpr):
            condition = self.evaluate(expr.condition, frame)
            if not isinstance(condition, bool):
                raise EvaluationError("a condition must be a boolean")
            branch = expr.then_expr if condition else expr.else_expr
            return self.evaluate(branch, frame)
        if isinstance(expr, SetEnum):
            return frozenset(self.evaluate(e, frame) for e in expr.elements)
        if isinstance(expr, SeqEnum):
            return tuple(self.evaluate(e, frame) for e in expr.elements)
        if isinstance(expr, MapEnum):
            data: dict = {}
            for key_expr, value_expr in expr.pairs:
                key = self.evaluate(key_expr, frame)
                value = self.evaluate(value_expr, frame)
                if key in data and not values_equal(data[key], value):
                    raise EvaluationError(
                        f"map enumeration repeats key {render_value(key)} with different values"
                    )
                data[key] = value
            return FrozenMap(data)
        if isinstance(expr, RecordConstructor):
            arguments = tuple(self.evaluate(a, frame) for a in expr.arguments)
            state = self.document.state
            if state is not None and expr.type_name == state.name:
                if len(arguments) != len(state.fields):
                    raise EvaluationError(
                        f"mk_{state.name} needs {len(state.fields)} field(s)"
                    )
                return RecordVal(
                    state.name, arguments, tuple(f.name for f in state.fields)
                )
            return RecordVal(expr.type_name, arguments)
        if isinstance(expr, TupleConstructor):
            return TupleVal(tuple(self.evaluate(a, frame) for a in expr.arguments))
        raise EvaluationError(f"cannot evaluate {type(expr).__name__}")

    def _apply(self, expr: Apply, frame: Frame):
        callee = expr.callee
        if isinstance(callee, Name) and self.table.resolves_to_callable(callee):
            decl = self.table.target_of_name(callee)
            arguments = [self.evaluate(a, frame) for a in expr.arguments]
            if isinstance(decl.node, FunctionDefinition):
                return self._call_function(decl.node, arguments)
            assert isinstance(decl.node, OperationDefinition)
            if decl.node.result_type is None:
                raise EvaluationError(
                    f"operation '{decl.name}' does not return a value"
                )
            return self.call(decl.node, arguments)
        container = self.evaluate(callee, frame)
        if len(expr.arguments) != 1:
            raise EvaluationError("application to data takes exactly one argument")
        key = self.evaluate(expr.arguments[0], frame)
        if isinstance(container, FrozenMap):
            if key not in container:
                raise EvaluationError(f"map has no entry for {render_value(key)}")
            return container.get(key)
        if isinstance(container, tuple):
            if not isinstance(key, int) or isinstance(key, bool):
                raise EvaluationError("a sequence index must be a number")
            if not 1 <= key <= len(container):
                raise EvaluationError(f"sequence index {key} is out of range")
            return container[key - 1]
        raise EvaluationError("only maps and sequences can be applied to a value")

    def _binary(self, expr: BinExp, frame: Frame):
        op = expr.op
        if op in ("and", "or", "=>"):
            left = self.evaluate(expr.left, frame)
            if not isinstance(left, bool):
                raise EvaluationError(f"'{op}' needs booleans")
            if op == "and" and not left:
                return False
            if op == "or" and left:
                return True
            if op == "=>" and not left:
                return True
            right = self.evaluate(expr.right, frame)
            if not isinstance(right, bool):
                raise EvaluationError(f"'{op}' needs booleans")
            return right
        left = self.evaluate(expr.left, frame)
        right = self.evaluate(expr.right, frame)
        if op == "=":
            return values_equal(left, right)
        if op == "<>":
            return not values_equal(left, right)
        if op in ("+", "-", "*", "div", "mod", "<", "<=", ">", ">="):
            if not self._is_number(left) or not self._is_number(right):
                raise EvaluationError(f"'{op}' needs numbers")
            if op == "+":
                return left + right
            if op == "-":
                return left - right
            if op == "*":
                return left * right
            if op == "div":
                if right == 0:
                    raise EvaluationError("division by zero")
                quotient = abs(left) // abs(right)
                return -quotient if (left < 0) != (right < 0) else quotient
            if op == "mod":
                if right == 0:
                    raise EvaluationError("division by zero")
                return left % right
            if op == "<":
                return left < right
            if op == "<=":
                return left <= right
            if op == ">":
                return left > right
            return left >= right
        if op == "^":
            if not isinstance(left, tuple) or not isinstance(right, tuple):
                raise EvaluationError("'^' needs sequences")
            return left + right
        if op in ("union", "inter", "\\", "subset", "psubset"):
            if not isinstance(left, frozenset) or not isinstance(right, frozenset):
                raise EvaluationError(f"'{op}' needs sets")
            if op == "union":
                return left | right
            if op == "inter":
                return left & right
            if op == "\\":
                return left - right
            if op == "subset":
                return left <= right
            return left < right
        if op in ("in set", "not in set"):
            if not isinstance(right, frozenset):
                raise EvaluationError(f"'{op}' needs a set on the right")
            return (left in right) == (op == "in set")
        if op in ("munion", "++"):
            if not isinstance(left, FrozenMap) or not isinstance(right, FrozenMap):
                raise EvaluationError(f"'{op}' needs maps")
            merged = dict(left.items())
            for key, value in right.items():
                if op == "munion" and key in merged and not values_equal(merged[key], value):
                    raise EvaluationError(
                        f"munion merges maps that disagree at {render_value(key)}"
                    )
                merged[key] = value
            return FrozenMap(merged)
        raise EvaluationError(f"unknown operator '{op}'")

    @staticmethod
    def _is_number(value) -> bool:
        return isinstance(value, int) and not isinstance(value, bool)

    def _unary(self, expr: UnaryExp, frame: Frame):
        value = self.evaluate(expr.operand, frame)
        op = expr.op
        if op == "not":
            if not isinstance(value, bool):
                raise EvaluationError("'not' needs a boolean")
            return not value
        if op == "-":
            if not self._is_number(value):
                raise EvaluationError("'-' needs a number")
            return -value
        if op in ("dom", "rng"):
            if not isinstance(value, FrozenMap):
                raise EvaluationError(f"'{op}' needs a map")
            return frozenset(value.keys() if op == "dom" else value.values())
        if op == "card":
            if not isinstance(value, frozenset):
                raise EvaluationError("'card' needs a set")
            return len(value)
        if op in ("len", "hd", "tl", "elems", "inds"):
            if not isinstance(value, tuple):
                raise EvaluationError(f"'{op}' needs a sequence")
            if op == "len":
                return len(value)
            if op == "elems":
                return frozenset(value)
            if op == "inds":
                return frozenset(range(1, len(value) + 1))
            if not value:
                raise EvaluationError(f"'{op}' of an empty sequence")
            return value[0] if op == "hd" else value[1:]
        raise EvaluationError(f"unknown operator '{op}'")

    # ---------------- pattern matching ----------------

    def _match(self, pat: Pattern, value, bindings: dict[int, object]) -> bool:
        if isinstance(pat, PatternIdentifier):
            bindings[self.table.declaring_nodes[pat.node_id]] = value
            return True
        if isinstance(pat, DontCarePattern):
            return True
        if isinstance(pat, MatchValuePattern):
            expected = self.evaluate(pat.expression, Frame(vars=dict(bindings)))
            return values_equal(expected, value)
        if isinstance(pat, TuplePattern):
            if not isinstance(value, TupleVal) or len(value.items) != len(pat.subpatterns):
                return False
            return all(
                self._match(p, v, bindings)
                for p, v in zip(pat.subpatterns, value.items)
            )
        if isinstance(pat, RecordPattern):
            if not (
                isinstance(value, RecordVal)
                and value.type_name == pat.type_name
                and len(value.fields) == len(pat.subpatterns)
            ):
                return False
            return all(
                self._match(p, v, bindings)
                for p, v in zip(pat.subpatterns, value.fields)
            )
        if isinstance(pat, SetUnionPattern):
            if not isinstance(value, frozenset):
                return False
            members = sorted(value, key=render_value)
            for mask in range(2 ** len(members)):
                left = frozenset(m for i, m in enumerate(members) if mask >> i & 1)
                right = value - left
                trial = dict(bindings)
                if self._match(pat.left, left, trial) and self._match(pat.right, right, trial):
                    bindings.clear()
                    bindings.update(trial)
                    return True
            return False
        raise EvaluationError(f"cannot match {type(pat).__name__}")


# ======================================================================
# slice-guided reduction
# ======================================================================

def run_reduced(document: Document, keep: frozenset[int]) -> Document:
    """A copy of ``document`` whose operation bodies retain only statements
    with a descendant in ``keep``; everything else becomes a skip."""
    counter = [document.node_id + 1]

    def fresh() -> int:
        counter[0] += 1
        return counter[0]

    def touches(node) -> bool:
        return any(n.node_id in keep for n in iter_nodes(node))

    def reduce_stmt(stmt: Statement) -> Statement:
        if not touches(stmt):
            return Skip(fresh(), stmt.span)
        if isinstance(stmt, Block):
            return Block(
                stmt.node_id,
                stmt.span,
                stmt.declarations,
                [reduce_stmt(s) for s in stmt.statements],
            )
        if isinstance(stmt, If):
            return If(
                stmt.node_id,
                stmt.span,
                stmt.condition,
                reduce_stmt(stmt.then_stmt),
                reduce_stmt(stmt.else_stmt) if stmt.else_stmt is not None else None,
                keyword_span=stmt.keyword_span,
                from_elseif=stmt.from_elseif,
            )
        if isinstance(stmt, While):
            return While(
                stmt.node_id,
                stmt.span,
                stmt.condition,
                reduce_stmt(stmt.body),
                keyword_span=stmt.keyword_span,
            )
        if isinstance(stmt, LetStmt):
            return LetStmt(stmt.node_id, stmt.span, stmt.bindings, reduce_stmt(stmt.body))
        return stmt

    operations = [
        OperationDefinition(
            op.node_id,
            op.span,
            op.name,
            op.param_types,
            op.result_type,
            op.params,
            reduce_stmt(op.body),
            op.precondition,
            op.postcondition,
        )
        for op in document.operations
    ]
    return Document(
        document.node_id,
        document.span,
        document.state,
        document.values,
        document.functions,
        operations,
        document.source_text,
    )


# ======================================================================
# random value generation
# ======================================================================

def generate_value(rng: random.Random, type_expr: TypeExpr):
    if isinstance(type_expr, TypeName):
        name = type_expr.name
        if name == "nat":
            return rng.randint(0, 9)
        if name == "nat1":
            return rng.randint(1, 9)
        if name == "int":
            return rng.randint(-9, 9)
        if name == "bool":
            return rng.random() < 0.5
        if name == "char":
            return rng.choice("abcdefgh")
        # an unmodelled alias: a short text stands in for it
        return "".join(rng.choice("abcdefghijklmnop") for _ in range(rng.randint(1, 4)))
    if isinstance(type_expr, OptionalType):
        if rng.random() < 0.3:
            return None
        return generate_value(rng, type_expr.inner)
    if isinstance(type_expr, SeqType):
        return tuple(generate_value(rng, type_expr.element) for _ in range(rng.randint(0, 3)))
    if isinstance(type_expr, SetType):
        return frozenset(
            generate_value(rng, type_expr.element) for _ in range(rng.randint(0, 3))
        )
    if isinstance(type_expr, MapType):
        return FrozenMap(
            (generate_value(rng, type_expr.key), generate_value(rng, type_expr.value))
            for _ in range(rng.randint(0, 3))
        )
    # product or anything else: a pair of small numbers
    return TupleVal((rng.randint(0, 9), rng.randint(0, 9)))


# ======================================================================
# criterion checking
# ======================================================================

@dataclass
class CheckReport:
    criterion: Criterion
    mode: str
    trials: int
    executed: int
    skipped: int
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def _observe(
    interp: Interpreter,
    outcome: Outcome,
    criterion: Criterion,
    operation: OperationDefinition,
) -> tuple[bool, object]:
    if isinstance(outcome, RuntimeErrorOutcome):
        return False, outcome.message
    if criterion.kind == "result":
        if isinstance(outcome, Returned):
            return True, outcome.value
        return False, "no result"
    if criterion.kind == "state":
        decl_id = interp.table.state_field_ids[criterion.detail]
        return True, interp.state.get(decl_id, UNDEFINED)
    if criterion.kind == "post":
        conjunct = post_conjuncts(operation.postcondition)[int(criterion.detail) - 1]
        frame = interp.last_post_frame
        if frame is None:
            return False, "the operation never completed"
        try:
            return True, interp.evaluate(conjunct, frame)
        except EvaluationError as exc:
            return False, str(exc)
    return False, f"criterion kind '{criterion.kind}' is not observable"


def check_criterion(
    document: Document,
    table: SymbolTable,
    criterion: Criterion,
    mode: str = "weak",
    trials: int = 20,
    seed: int = 0,
    step_limit: int = 200_000,
) -> CheckReport:
    """Compare original and reduced behaviour on random inputs."""
    if criterion.kind == "at":
        raise CriterionError("positional criteria cannot be checked by execution")
    result = backward_slice(document, table, criterion, mode=mode)
    keep = frozenset(result.node_ids | set(result.criterion_node_ids))
    reduced = run_reduced(document, keep)
    operation = document.operation(criterion.operation)
    assert operation is not None
    report = CheckReport(criterion, mode, trials, 0, 0)
    for trial in range(trials):
        rng = random.Random(f"{seed}:{trial}")
        arguments = [generate_value(rng, t) for t in operation.param_types]
        original = Interpreter(
            document, table, step_limit=step_limit, check_assertions=False
        )
        outcome_original = original.run_operation(criterion.operation, arguments)
        ok_original, observed_original = _observe(
            original, outcome_original, criterion, operation
        )
        if not ok_original:
            report.skipped += 1
            continue
        report.executed += 1
        shrunk = Interpreter(
            reduced,
            table,
            step_limit=step_limit,
            check_assertions=False,
            allow_missing_return=True,
        )
        outcome_reduced = shrunk.run_operation(criterion.operation, arguments)
        ok_reduced, observed_reduced = _observe(
            shrunk, outcome_reduced, criterion, operation
        )
        rendered_args = ", ".join(render_value(a) for a in arguments)
        if not ok_reduced:
            report.failures.append(
                f"trial {trial} ({rendered_args}): reduced run failed: {observed_reduced}"
            )
        elif not values_equal(observed_original, observed_reduced):
            report.failures.append(
                f"trial {trial} ({rendered_args}): original {render_value(observed_original)}"
                f" but reduced {render_value(observed_reduced)}"
            )
    return report
