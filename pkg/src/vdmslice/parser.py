"""Lexer and recursive-descent parser for the model language.

A document is an optional ``state`` section plus ``values``, ``functions``
and ``operations`` sections in any order.  The parser records every error it
can attribute to a definition and resynchronises at the next definition
header or section keyword, so a single run reports multiple problems.

Node identifiers are dense and assigned in construction order, children
before parents; the document root always carries the highest id.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .syntax import (
    Accessor,
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
    Position,
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
    Span,
    StateDefinition,
    StateDesignator,
    StateField,
    Statement,
    TupleConstructor,
    TuplePattern,
    TypeExpr,
    TypeName,
    UnaryExp,
    ValueDefinition,
    While,
    iter_nodes,
)


# ======================================================================
# errors
# ======================================================================

@dataclass(frozen=True)
class SourceError:
    """One diagnostic with the source region it points at."""

    message: str
    span: Span


class ParseFailure(Exception):
    """Raised when a document (or fragment) contains syntax errors."""

    def __init__(self, errors: list[SourceError]):
        self.errors = list(errors)
        super().__init__("; ".join(e.message for e in self.errors))


class _ParseError(Exception):
    # internal control flow only; converted to SourceError by the driver
    def __init__(self, message: str, span: Span):
        super().__init__(message)
        self.error = SourceError(message, span)


class _Backtrack(Exception):
    pass


# ======================================================================
# lexer
# ======================================================================

KEYWORDS = frozenset(
    """state of inv init end values functions operations pre post dcl
    if then elseif else while do let in return skip
    not and or div mod true false nil
    dom rng card len hd tl elems inds
    union inter munion subset psubset set seq map to""".split()
)

# longest first so maximal munch works by scanning in order
_OPERATORS = [
    "==>", "|->", ":=", "==", "=>", "->", "<=", ">=", "<>", "++",
    "(", ")", "{", "}", "[", "]", ",", ";", ":", ".",
    "*", "+", "-", "=", "<", ">", "^", "\\",
]

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_QUOTE_RE = re.compile(r"<([A-Za-z_][A-Za-z0-9_]*)>")
_STRING_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\", "'": "'"}


@dataclass(frozen=True)
class Token:
    kind: str  # name kw int text char quote oldname op eof
    text: str
    span: Span
    value: object = None


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into tokens; raises ParseFailure on malformed input."""
    tokens: list[Token] = []
    i, line, col, n = 0, 1, 1, len(text)

    def err(message: str, length: int = 1) -> _ParseError:
        start = Position(line, col)
        return _ParseError(message, Span(start, Position(line, col + length)))

    def emit(kind: str, length: int, value: object = None) -> None:
        nonlocal i, col
        start = Position(line, col)
        tokens.append(Token(kind, text[i:i + length], Span(start, Position(line, col + length)), value))
        i += length
        col += length

    try:
        while i < n:
            c = text[i]
            if c == "\n":
                i += 1
                line += 1
                col = 1
                continue
            if c in " \t\r":
                i += 1
                col += 1
                continue
            if c == "-" and text.startswith("--", i):
                stop = text.find("\n", i)
                stop = n if stop == -1 else stop
                col += stop - i
                i = stop
                continue
            if c in "0123456789":
                m = re.match(r"[0-9]+", text[i:])
                emit("int", m.end(), int(m.group()))
                continue
            if c == "_" or "a" <= c <= "z" or "A" <= c <= "Z":
                m = _IDENT_RE.match(text, i)
                word = m.group()
                length = len(word)
                if i + length < n and text[i + length] == "~":
                    emit("oldname", length + 1, word)
                elif word in KEYWORDS:
                    emit("kw", length)
                else:
                    emit("name", length)
                continue
            if c == '"':
                j = i + 1
                chars: list[str] = []
                while j < n and text[j] not in '"\n':
                    if text[j] == "\\":
                        if j + 1 >= n or text[j + 1] not in _STRING_ESCAPES:
                            raise err("unknown escape in text literal", j - i + 2)
                        chars.append(_STRING_ESCAPES[text[j + 1]])
                        j += 2
                    else:
                        chars.append(text[j])
                        j += 1
                if j >= n or text[j] == "\n":
                    raise err("unterminated text literal", j - i)
                emit("text", j - i + 1, "".join(chars))
                continue
            if c == "'":
                if i + 2 < n and text[i + 1] == "\\" and text[i + 2] in _STRING_ESCAPES and i + 3 < n and text[i + 3] == "'":
                    emit("char", 4, _STRING_ESCAPES[text[i + 2]])
                    continue
                if i + 2 < n and text[i + 2] == "'" and text[i + 1] not in "'\n":
                    emit("char", 3, text[i + 1])
                    continue
                raise err("malformed character literal", 3)
            if c == "<":
                m = _QUOTE_RE.match(text, i)
                if m:
                    emit("quote", m.end() - i, m.group(1))
                    continue
            for op in _OPERATORS:
                if text.startswith(op, i):
                    emit("op", len(op))
                    break
            else:
                raise err(f"unexpected character {c!r}")
    except _ParseError as exc:
        raise ParseFailure([exc.error]) from None

    here = Position(line, col)
    tokens.append(Token("eof", "", Span(here, here)))
    return tokens


def _describe(tok: Token) -> str:
    if tok.kind == "eof":
        return "end of input"
    return f"'{tok.text}'"


# ======================================================================
# parser
# ======================================================================

_UNARY_KEYWORDS = frozenset("not dom rng card len hd tl elems inds".split())
_BINARY_KEYWORDS = frozenset("or and div mod union inter munion subset psubset".split())

# operator -> (binding power, associativity); higher binds tighter
PRECEDENCE: dict[str, tuple[int, str]] = {
    "=>": (1, "right"),
    "or": (2, "left"),
    "and": (3, "left"),
    "=": (4, "left"), "<>": (4, "left"),
    "<": (4, "left"), "<=": (4, "left"), ">": (4, "left"), ">=": (4, "left"),
    "in set": (4, "left"), "not in set": (4, "left"),
    "subset": (4, "left"), "psubset": (4, "left"),
    "union": (5, "left"), "inter": (5, "left"), "munion": (5, "left"),
    "\\": (5, "left"), "++": (5, "left"),
    "+": (6, "left"), "-": (6, "left"), "^": (6, "left"),
    "*": (7, "left"), "div": (7, "left"), "mod": (7, "left"),
}

_BINARY_OP_TEXTS = frozenset(
    op for op in PRECEDENCE if op not in _BINARY_KEYWORDS and " " not in op
)

_SECTION_KEYWORDS = frozenset("state values functions operations".split())


class _Parser:
    def __init__(self, tokens: list[Token], source_text: str):
        self.toks = tokens
        self.i = 0
        self.errors: list[SourceError] = []
        self._next_id = 0
        self.source_text = source_text

    # ---------------- token plumbing ----------------

    def _id(self) -> int:
        value = self._next_id
        self._next_id += 1
        return value

    def cur(self) -> Token:
        return self.toks[self.i]

    def peek(self, offset: int = 1) -> Token:
        j = min(self.i + offset, len(self.toks) - 1)
        return self.toks[j]

    def advance(self) -> Token:
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.cur()
        return tok.kind in ("op", "kw") and tok.text == text

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            return self.advance()
        return None

    def expect(self, text: str, context: str | None = None) -> Token:
        if self.at(text):
            return self.advance()
        where = f" in {context}" if context else ""
        raise _ParseError(f"expected '{text}'{where}, found {_describe(self.cur())}", self.cur().span)

    def expect_name(self, context: str) -> Token:
        tok = self.cur()
        if tok.kind != "name":
            raise _ParseError(f"expected a name in {context}, found {_describe(tok)}", tok.span)
        return self.advance()

    @staticmethod
    def _span(first: Token | Span | object, last: Token | Span | object) -> Span:
        def bounds(x) -> Span:
            return x if isinstance(x, Span) else x.span

        return Span(bounds(first).start, bounds(last).end)

    # ---------------- types ----------------

    def parse_type(self) -> TypeExpr:
        first = self._parse_type_unary()
        if not self.at("*"):
            return first
        items = [first]
        while self.accept("*"):
            items.append(self._parse_type_unary())
        return ProductType(self._id(), self._span(items[0], items[-1]), items)

    def _parse_type_unary(self) -> TypeExpr:
        tok = self.cur()
        if self.at("seq"):
            self.advance()
            self.expect("of", "a sequence type")
            element = self._parse_type_unary()
            return SeqType(self._id(), self._span(tok, element), element)
        if self.at("set"):
            self.advance()
            self.expect("of", "a set type")
            element = self._parse_type_unary()
            return SetType(self._id(), self._span(tok, element), element)
        if self.at("map"):
            self.advance()
            key = self._parse_type_unary()
            self.expect("to", "a map type")
            value = self._parse_type_unary()
            return MapType(self._id(), self._span(tok, value), key, value)
        if self.at("["):
            self.advance()
            inner = self.parse_type()
            close = self.expect("]", "an optional type")
            return OptionalType(self._id(), self._span(tok, close), inner)
        if self.at("("):
            self.advance()
            inner = self.parse_type()
            self.expect(")", "a type")
            return inner
        if tok.kind == "name":
            self.advance()
            return TypeName(self._id(), tok.span, tok.text)
        raise _ParseError(f"expected a type, found {_describe(tok)}", tok.span)

    def _parse_signature_types(self) -> list[TypeExpr]:
        # `()` means no parameters; otherwise `T1 * T2 * ...`
        if self.at("(") and self.peek().kind == "op" and self.peek().text == ")":
            self.advance()
            self.advance()
            return []
        items = [self._parse_type_unary()]
        while self.accept("*"):
            items.append(self._parse_type_unary())
        return items

    # ---------------- patterns ----------------

    def parse_pattern(self) -> Pattern:
        left = self._parse_pattern_atom()
        while self.at("union"):
            self.advance()
            right = self._parse_pattern_atom()
            left = SetUnionPattern(self._id(), self._span(left, right), left, right)
        return left

    def _parse_pattern_atom(self) -> Pattern:
        tok = self.cur()
        if self.at("-"):
            self.advance()
            return DontCarePattern(self._id(), tok.span)
        if tok.kind == "name" and tok.text == "mk_":
            self.advance()
            self.expect("(", "a tuple pattern")
            subs = [self.parse_pattern()]
            while self.accept(","):
                subs.append(self.parse_pattern())
            close = self.expect(")", "a tuple pattern")
            if len(subs) < 2:
                raise _ParseError("a tuple pattern needs at least two items", self._span(tok, close))
            return TuplePattern(self._id(), self._span(tok, close), subs)
        if tok.kind == "name" and tok.text.startswith("mk_") and len(tok.text) > 3:
            self.advance()
            self.expect("(", "a record pattern")
            subs = []
            if not self.at(")"):
                subs.append(self.parse_pattern())
                while self.accept(","):
                    subs.append(self.parse_pattern())
            close = self.expect(")", "a record pattern")
            return RecordPattern(self._id(), self._span(tok, close), tok.text[3:], subs)
        if tok.kind == "name":
            self.advance()
            return PatternIdentifier(self._id(), tok.span, tok.text)
        if self.at("("):
            self.advance()
            inner = self.parse_expression()
            close = self.expect(")", "a match-value pattern")
            return MatchValuePattern(self._id(), self._span(tok, close), inner)
        literal = self._try_literal()
        if literal is not None:
            return MatchValuePattern(self._id(), literal.span, literal)
        raise _ParseError(f"expected a pattern, found {_describe(tok)}", tok.span)

    def _pattern_names(self, patterns: list[Pattern]) -> list[tuple[str, Span]]:
        names = []
        for pat in patterns:
            for node in iter_nodes(pat):
                if isinstance(node, PatternIdentifier):
                    names.append((node.name, node.span))
        return names

    def _check_binder_group(self, patterns: list[Pattern], what: str) -> None:
        seen: dict[str, Span] = {}
        for name, span in self._pattern_names(patterns):
            if name in seen:
                self.errors.append(SourceError(f"'{name}' is bound twice in {what}", span))
            else:
                seen[name] = span

    # ---------------- expressions ----------------

    def _try_literal(self) -> Literal | None:
        tok = self.cur()
        if tok.kind == "int":
            self.advance()
            return Literal(self._id(), tok.span, "int", tok.value)
        if tok.kind == "text":
            self.advance()
            return Literal(self._id(), tok.span, "text", tok.value)
        if tok.kind == "char":
            self.advance()
            return Literal(self._id(), tok.span, "char", tok.value)
        if tok.kind == "quote":
            self.advance()
            return Literal(self._id(), tok.span, "quote", tok.value)
        if self.at("true"):
            self.advance()
            return Literal(self._id(), tok.span, "bool", True)
        if self.at("false"):
            self.advance()
            return Literal(self._id(), tok.span, "bool", False)
        if self.at("nil"):
            self.advance()
            return Literal(self._id(), tok.span, "nil", None)
        return None

    def _starts_expression(self) -> bool:
        tok = self.cur()
        if tok.kind in ("int", "text", "char", "quote", "oldname", "name"):
            return True
        if tok.kind == "op" and tok.text in ("(", "{", "[", "-"):
            return True
        if tok.kind == "kw":
            return tok.text in ("true", "false", "nil", "let", "if") or tok.text in _UNARY_KEYWORDS
        return False

    def _peek_binary(self) -> str | None:
        tok = self.cur()
        if tok.kind == "op" and tok.text in _BINARY_OP_TEXTS:
            return tok.text
        if tok.kind == "kw":
            if tok.text in _BINARY_KEYWORDS:
                return tok.text
            if tok.text == "in" and self.peek().kind == "kw" and self.peek().text == "set":
                return "in set"
            if (
                tok.text == "not"
                and self.peek().kind == "kw" and self.peek().text == "in"
                and self.peek(2).kind == "kw" and self.peek(2).text == "set"
            ):
                return "not in set"
        return None

    def parse_expression(self, min_prec: int = 1) -> Expression:
        left = self._parse_unary()
        while True:
            op = self._peek_binary()
            if op is None:
                break
            prec, assoc = PRECEDENCE[op]
            if prec < min_prec:
                break
            for _ in range(op.count(" ") + 1):
                self.advance()
            right = self.parse_expression(prec + 1 if assoc == "left" else prec)
            left = BinExp(self._id(), self._span(left, right), op, left, right)
        return left

    def _parse_unary(self) -> Expression:
        tok = self.cur()
        if tok.kind == "kw" and tok.text in _UNARY_KEYWORDS:
            self.advance()
            operand = self._parse_unary()
            return UnaryExp(self._id(), self._span(tok, operand), tok.text, operand)
        if self.at("-"):
            self.advance()
            operand = self._parse_unary()
            return UnaryExp(self._id(), self._span(tok, operand), "-", operand)
        return self._parse_postfix()

    def _parse_postfix(self) -> Expression:
        expr = self._parse_primary()
        while True:
            if self.at("("):
                self.advance()
                args: list[Expression] = []
                if not self.at(")"):
                    args.append(self.parse_expression())
                    while self.accept(","):
                        args.append(self.parse_expression())
                close = self.expect(")", "an application")
                expr = Apply(self._id(), self._span(expr, close), expr, args)
            elif self.at("."):
                self.advance()
                field = self.expect_name("a field reference")
                expr = FieldRef(self._id(), self._span(expr, field), expr, field.text)
            else:
                return expr

    def _parse_primary(self) -> Expression:
        tok = self.cur()
        literal = self._try_literal()
        if literal is not None:
            return literal
        if tok.kind == "oldname":
            self.advance()
            return OldName(self._id(), tok.span, tok.value)
        if tok.kind == "name" and tok.text == "RESULT":
            self.advance()
            return ResultName(self._id(), tok.span)
        if tok.kind == "name" and tok.text == "mk_":
            self.advance()
            self.expect("(", "a tuple constructor")
            args = [self.parse_expression()]
            while self.accept(","):
                args.append(self.parse_expression())
            close = self.expect(")", "a tuple constructor")
            if len(args) < 2:
                raise _ParseError("a tuple needs at least two items", self._span(tok, close))
            return TupleConstructor(self._id(), self._span(tok, close), args)
        if tok.kind == "name" and tok.text.startswith("mk_") and len(tok.text) > 3:
            self.advance()
            self.expect("(", "a record constructor")
            args = []
            if not self.at(")"):
                args.append(self.parse_expression())
                while self.accept(","):
                    args.append(self.parse_expression())
            close = self.expect(")", "a record constructor")
            return RecordConstructor(self._id(), self._span(tok, close), tok.text[3:], args)
        if tok.kind == "name":
            self.advance()
            return Name(self._id(), tok.span, tok.text)
        if self.at("("):
            self.advance()
            inner = self.parse_expression()
            self.expect(")", "a parenthesised expression")
            return inner  # parentheses are transparent
        if self.at("{"):
            return self._parse_braced()
        if self.at("["):
            open_tok = self.advance()
            elements: list[Expression] = []
            if not self.at("]"):
                elements.append(self.parse_expression())
                while self.accept(","):
                    elements.append(self.parse_expression())
            close = self.expect("]", "a sequence enumeration")
            return SeqEnum(self._id(), self._span(open_tok, close), elements)
        if self.at("let"):
            open_tok = self.advance()
            bindings = self._parse_let_bindings()
            self.expect("in", "a let expression")
            body = self.parse_expression()
            return LetExpr(self._id(), self._span(open_tok, body), bindings, body)
        if self.at("if"):
            open_tok = self.advance()
            condition = self.parse_expression()
            self.expect("then", "a conditional expression")
            then_expr = self.parse_expression()
            self.expect("else", "a conditional expression")
            else_expr = self.parse_expression()
            return IfExpr(self._id(), self._span(open_tok, else_expr), condition, then_expr, else_expr)
        raise _ParseError(f"expected an expression, found {_describe(tok)}", tok.span)

    def _parse_braced(self) -> Expression:
        open_tok = self.expect("{")
        if self.at("}"):
            close = self.advance()
            return SetEnum(self._id(), self._span(open_tok, close), [])
        if self.at("|->"):
            self.advance()
            close = self.expect("}", "an empty map")
            return MapEnum(self._id(), self._span(open_tok, close), [])
        first = self.parse_expression()
        if self.at("|->"):
            self.advance()
            value = self.parse_expression()
            pairs = [(first, value)]
            while self.accept(","):
                key = self.parse_expression()
                self.expect("|->", "a map enumeration")
                pairs.append((key, self.parse_expression()))
            close = self.expect("}", "a map enumeration")
            return MapEnum(self._id(), self._span(open_tok, close), pairs)
        elements = [first]
        while self.accept(","):
            elements.append(self.parse_expression())
        close = self.expect("}", "a set enumeration")
        return SetEnum(self._id(), self._span(open_tok, close), elements)

    def _parse_let_bindings(self) -> list[tuple[Pattern, Expression]]:
        bindings = [self._parse_let_binding()]
        while self.accept(","):
            bindings.append(self._parse_let_binding())
        self._check_binder_group([p for p, _ in bindings], "this let binding")
        return bindings

    def _parse_let_binding(self) -> tuple[Pattern, Expression]:
        pat = self.parse_pattern()
        self.expect("=", "a let binding")
        return pat, self.parse_expression()

    # ---------------- statements ----------------

    def parse_statement(self) -> Statement:
        tok = self.cur()
        if self.at("("):
            return self._parse_block()
        if self.at("if"):
            return self._parse_if(tok, from_elseif=False)
        if self.at("while"):
            self.advance()
            condition = self.parse_expression()
            self.expect("do", "a while statement")
            body = self.parse_statement()
            return While(self._id(), self._span(tok, body), condition, body, keyword_span=tok.span)
        if self.at("let"):
            self.advance()
            bindings = self._parse_let_bindings()
            self.expect("in", "a let statement")
            body = self.parse_statement()
            return LetStmt(self._id(), self._span(tok, body), bindings, body)
        if self.at("return"):
            self.advance()
            if self._starts_expression():
                expr = self.parse_expression()
                return Return(self._id(), self._span(tok, expr), expr)
            return Return(self._id(), tok.span, None)
        if self.at("skip"):
            self.advance()
            return Skip(self._id(), tok.span)
        if self.at("dcl"):
            raise _ParseError("dcl is only allowed at the start of a parenthesised block", tok.span)
        if tok.kind == "name":
            return self._parse_assign_or_call()
        raise _ParseError(f"expected a statement, found {_describe(tok)}", tok.span)

    def _parse_block(self) -> Block:
        open_tok = self.expect("(")
        declarations: list[DclItem] = []
        while self.at("dcl"):
            self.advance()
            while True:
                name = self.expect_name("a dcl item")
                self.expect(":", "a dcl item")
                item_type = self.parse_type()
                init = None
                last: Token | Span | object = item_type
                if self.accept(":="):
                    init = self.parse_expression()
                    last = init
                declarations.append(DclItem(self._id(), self._span(name, last), name.text, item_type, init))
                if not self.accept(","):
                    break
            self.expect(";", "a dcl clause")
        statements = [self.parse_statement()]
        while self.accept(";"):
            if self.at(")"):
                break
            statements.append(self.parse_statement())
        close = self.expect(")", "a block")
        return Block(self._id(), self._span(open_tok, close), declarations, statements)

    def _parse_if(self, keyword: Token, from_elseif: bool) -> If:
        self.advance()  # 'if' or 'elseif'
        condition = self.parse_expression()
        self.expect("then", "a conditional statement")
        then_stmt = self.parse_statement()
        else_stmt: Statement | None = None
        if self.at("elseif"):
            else_stmt = self._parse_if(self.cur(), from_elseif=True)
        elif self.accept("else"):
            else_stmt = self.parse_statement()
        last = else_stmt if else_stmt is not None else then_stmt
        return If(
            self._id(),
            self._span(keyword, last),
            condition,
            then_stmt,
            else_stmt,
            keyword_span=keyword.span,
            from_elseif=from_elseif,
        )

    def _parse_assign_or_call(self) -> Statement:
        name = self.expect_name("a statement")
        if not (self.at("(") or self.at(".") or self.at(":=")):
            raise _ParseError(
                f"expected ':=' or '(' after '{name.text}' in statement position",
                self.cur().span,
            )
        snapshot = (self.i, self._next_id)
        try:
            return self._parse_assignment(name)
        except (_ParseError, _Backtrack):
            self.i, self._next_id = snapshot
        self.expect("(", "a call statement")
        args: list[Expression] = []
        if not self.at(")"):
            args.append(self.parse_expression())
            while self.accept(","):
                args.append(self.parse_expression())
        close = self.expect(")", "a call statement")
        return Call(self._id(), self._span(name, close), name.text, name.span, args)

    def _parse_assignment(self, name: Token) -> Assign:
        accessors: list[Accessor] = []
        while True:
            if self.at("("):
                open_tok = self.advance()
                index = self.parse_expression()
                close = self.expect(")", "an indexed assignment target")
                accessors.append(ApplyAccess(self._id(), self._span(open_tok, close), index))
            elif self.at("."):
                dot = self.advance()
                field = self.expect_name("a field assignment target")
                accessors.append(FieldAccess(self._id(), self._span(dot, field), field.text))
            else:
                break
        if not self.at(":="):
            raise _Backtrack()
        self.advance()
        rhs = self.parse_expression()
        last = accessors[-1] if accessors else name
        designator = StateDesignator(self._id(), self._span(name, last), name.text, name.span, accessors)
        return Assign(self._id(), self._span(name, rhs), designator, rhs)

    # ---------------- definitions ----------------

    def _parse_state(self) -> StateDefinition:
        start = self.expect("state")
        name = self.expect_name("a state definition")
        self.expect("of", "a state definition")
        fields: list[StateField] = []
        while self.cur().kind == "name":
            field_name = self.advance()
            self.expect(":", "a state field")
            field_type = self.parse_type()
            fields.append(StateField(self._id(), self._span(field_name, field_type), field_name.text, field_type))
        invariant = None
        if self.accept("inv"):
            pat = self.parse_pattern()
            self._check_binder_group([pat], "the state invariant pattern")
            self.expect("==", "a state invariant")
            invariant = (pat, self.parse_expression())
        init = None
        if self.accept("init"):
            pat = self.parse_pattern()
            self._check_binder_group([pat], "the state initialiser pattern")
            self.expect("==", "a state initialiser")
            init = (pat, self.parse_expression())
        end = self.expect("end", "a state definition")
        return StateDefinition(self._id(), self._span(start, end), name.text, fields, invariant, init)

    def _parse_value_definition(self) -> ValueDefinition:
        pat = self.parse_pattern()
        self._check_binder_group([pat], "this value definition")
        self.expect("=", "a value definition")
        expr = self.parse_expression()
        self.accept(";")
        return ValueDefinition(self._id(), self._span(pat, expr), pat, expr)

    def _parse_params(self, context: str) -> list[Pattern]:
        self.expect("(", context)
        params: list[Pattern] = []
        if not self.at(")"):
            params.append(self.parse_pattern())
            while self.accept(","):
                params.append(self.parse_pattern())
        self.expect(")", context)
        self._check_binder_group(params, "the parameter list")
        return params

    def _parse_header(self, kind: str) -> tuple[Token, list[TypeExpr]]:
        name = self.expect_name(f"{kind} definition")
        self.expect(":", f"a {kind} signature")
        param_types = self._parse_signature_types()
        return name, param_types

    def _check_header_body_names(self, name: Token, body_name: Token) -> None:
        if name.text != body_name.text:
            self.errors.append(
                SourceError(
                    f"signature names '{name.text}' but the body names '{body_name.text}'",
                    body_name.span,
                )
            )

    def _parse_function(self) -> FunctionDefinition:
        name, param_types = self._parse_header("a function")
        self.expect("->", "a function signature")
        result_type = self._parse_type_unary()
        body_name = self.expect_name("a function body")
        self._check_header_body_names(name, body_name)
        params = self._parse_params("a parameter list")
        if len(params) != len(param_types):
            self.errors.append(
                SourceError(
                    f"'{name.text}' declares {len(param_types)} parameter type(s) but binds {len(params)} pattern(s)",
                    body_name.span,
                )
            )
        self.expect("==", "a function definition")
        body = self.parse_expression()
        precondition = self.parse_expression() if self.accept("pre") else None
        postcondition = self.parse_expression() if self.accept("post") else None
        last = postcondition or precondition or body
        self.accept(";")
        return FunctionDefinition(
            self._id(), self._span(name, last), name.text,
            param_types, result_type, params, body, precondition, postcondition,
        )

    def _parse_operation(self) -> OperationDefinition:
        name, param_types = self._parse_header("an operation")
        self.expect("==>", "an operation signature")
        if self.at("(") and self.peek().kind == "op" and self.peek().text == ")":
            self.advance()
            self.advance()
            result_type: TypeExpr | None = None
        else:
            result_type = self._parse_type_unary()
        body_name = self.expect_name("an operation body")
        self._check_header_body_names(name, body_name)
        params = self._parse_params("a parameter list")
        if len(params) != len(param_types):
            self.errors.append(
                SourceError(
                    f"'{name.text}' declares {len(param_types)} parameter type(s) but binds {len(params)} pattern(s)",
                    body_name.span,
                )
            )
        self.expect("==", "an operation definition")
        body = self.parse_statement()
        precondition = self.parse_expression() if self.accept("pre") else None
        postcondition = self.parse_expression() if self.accept("post") else None
        last = postcondition or precondition or body
        self.accept(";")
        return OperationDefinition(
            self._id(), self._span(name, last), name.text,
            param_types, result_type, params, body, precondition, postcondition,
        )

    # ---------------- recovery ----------------

    def _sync_definition(self) -> None:
        """Skip tokens until something that can start a definition."""
        self.advance()
        depth = 0
        while self.cur().kind != "eof":
            tok = self.cur()
            if depth == 0:
                if tok.kind == "kw" and tok.text in _SECTION_KEYWORDS or tok.text == "end":
                    return
                if tok.kind == "name" and self.peek().kind == "op" and self.peek().text == ":":
                    return
            if tok.kind == "op":
                if tok.text in "([{":
                    depth += 1
                elif tok.text in ")]}":
                    depth = max(0, depth - 1)
            self.advance()

    def _definition_loop(self, parse_one) -> list:
        out = []
        while True:
            if self.accept(";"):
                continue
            if self.cur().kind != "name":
                return out
            try:
                out.append(parse_one())
            except _ParseError as exc:
                self.errors.append(exc.error)
                self._sync_definition()

    # ---------------- document ----------------

    def parse_document(self) -> Document:
        state: StateDefinition | None = None
        values: list[ValueDefinition] = []
        functions: list[FunctionDefinition] = []
        operations: list[OperationDefinition] = []
        while self.cur().kind != "eof":
            tok = self.cur()
            try:
                if self.at("state"):
                    parsed = self._parse_state()
                    if state is None:
                        state = parsed
                    else:
                        self.errors.append(SourceError("only one state definition is allowed", parsed.span))
                elif self.at("values"):
                    self.advance()
                    while self.cur().kind != "eof" and not (
                        self.cur().kind == "kw" and self.cur().text in _SECTION_KEYWORDS
                    ):
                        if self.accept(";"):
                            continue
                        values.append(self._parse_value_definition())
                elif self.at("functions"):
                    self.advance()
                    functions.extend(self._definition_loop(self._parse_function))
                elif self.at("operations"):
                    self.advance()
                    operations.extend(self._definition_loop(self._parse_operation))
                elif self.at(";"):
                    self.advance()
                else:
                    raise _ParseError(
                        f"expected a section keyword, found {_describe(tok)}", tok.span
                    )
            except _ParseError as exc:
                self.errors.append(exc.error)
                self._sync_definition()
        end = self.cur().span.end
        document = Document(
            self._id(),
            Span(Position(1, 1), end),
            state,
            values,
            functions,
            operations,
            self.source_text,
        )
        self._check_duplicate_definitions(document)
        return document

    def _check_duplicate_definitions(self, document: Document) -> None:
        seen: dict[str, Span] = {}

        def claim(name: str, span: Span) -> None:
            if name in seen:
                self.errors.append(SourceError(f"duplicate definition of '{name}'", span))
            else:
                seen[name] = span

        if document.state is not None:
            for field in document.state.fields:
                claim(field.name, field.span)
        for value in document.values:
            for name, span in self._pattern_names([value.pattern]):
                claim(name, span)
        for function in document.functions:
            claim(function.name, function.span)
        for operation in document.operations:
            claim(operation.name, operation.span)


# ======================================================================
# entry points
# ======================================================================

def _run(text: str, produce):
    parser = _Parser(tokenize(text), text)
    try:
        result = produce(parser)
    except _ParseError as exc:
        parser.errors.append(exc.error)
        raise ParseFailure(parser.errors) from None
    if parser.cur().kind != "eof":
        parser.errors.append(
            SourceError(f"unexpected {_describe(parser.cur())} after the end", parser.cur().span)
        )
    if parser.errors:
        raise ParseFailure(parser.errors)
    return result


def parse(text: str) -> Document:
    """Parse a whole document; raises ParseFailure listing every error."""
    return _run(text, lambda p: p.parse_document())


def parse_expression_text(text: str) -> Expression:
    return _run(text, lambda p: p.parse_expression())


def parse_statement_text(text: str) -> Statement:
    return _run(text, lambda p: p.parse_statement())


def parse_pattern_text(text: str) -> Pattern:
    def run(p: _Parser) -> Pattern:
        pattern = p.parse_pattern()
        p._check_binder_group([pattern], "this pattern")
        return pattern

    return _run(text, run)


def parse_type_text(text: str) -> TypeExpr:
    return _run(text, lambda p: p.parse_type())


def parse_position(text: str) -> Position:
    """Parse a LINE:COLUMN pair as used on the command line."""
    match = re.fullmatch(r"\s*(\d+):(\d+)\s*", text)
    if not match:
        raise ValueError(f"expected LINE:COLUMN, got {text!r}")
    line, column = int(match.group(1)), int(match.group(2))
    if line < 1 or column < 1:
        raise ValueError("line and column are 1-based")
    return Position(line, column)
