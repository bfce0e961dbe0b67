"""Name resolution and the scoping rules it enforces."""

import pytest

from conftest import CORPUS_FILES, find_node, load_corpus, load_source

import vdmslice as v
from vdmslice.binder import BindFailure
from vdmslice.syntax import Name, iter_nodes


def bind_errors(source: str) -> list[str]:
    document = v.parse(source)
    with pytest.raises(BindFailure) as caught:
        v.bind(document)
    return [e.message for e in caught.value.errors]


OP = """
state S of
    n : nat
init s == s = mk_S(0)
end

operations
%s
"""


def test_corpus_binds_and_every_name_resolves():
    for name in CORPUS_FILES:
        document, table = load_corpus(name)
        for node in iter_nodes(document):
            if isinstance(node, Name):
                assert node.node_id in table.name_targets, text(document, node)


def text(document, node):
    from conftest import text_of

    return text_of(document, node)


def test_declarations_know_their_kind():
    document, table = load_corpus("memberbook_refactored.vdmsl")
    kinds = {d.name: d.kind for d in table.decls if d.kind in ("state", "operation")}
    assert kinds["NameBook"] == "state"
    assert kinds["NextId"] == "state"
    assert kinds["register"] == "operation"
    assert kinds["generateId"] == "operation"
    fields = [d.name for d in table.state_fields()]
    assert fields == ["NameBook", "EmailBook", "NextId"]
    assert [d.field_index for d in table.state_fields()] == [0, 1, 2]


def test_params_and_locals_resolve_to_their_binding_sites():
    source = OP % """
    o : nat ==> nat
    o(p) ==
        (dcl q : nat := p;
        q := q + p;
        return q);
"""
    document, table = load_source(source)
    p_param = find_node(document, "p", "PatternIdentifier")
    dcl = find_node(document, "q : nat := p", "DclItem")
    p_use = find_node(document, "p", "Name", index=0)
    assert table.name_targets[p_use.node_id] == table.decl_of(p_param).decl_id
    q_use = find_node(document, "q", "Name", index=0)
    assert table.name_targets[q_use.node_id] == table.decl_of(dcl).decl_id


def test_unknown_names_are_reported():
    errors = bind_errors(OP % """
    o : () ==> ()
    o() == n := ghost;
""")
    assert any("ghost" in e for e in errors)


def test_state_fields_are_invisible_inside_functions():
    source = """
state S of
    n : nat
init s == s = mk_S(0)
end

functions
    f : nat -> nat
    f(x) == x + n;
"""
    errors = bind_errors(source)
    assert any("n" in e for e in errors)


def test_functions_cannot_call_operations():
    source = OP % """
    o : () ==> nat
    o() == return 1;
"""
    source += """
functions
    f : () -> nat
    f() == o();
"""
    errors = bind_errors(source)
    assert errors


def test_operation_calls_in_expressions_only_inside_bodies():
    # an operation apply in a precondition must be rejected
    source = OP % """
    o : () ==> nat
    o() == return 1;

    p : () ==> nat
    p() == return o()
    pre o() > 0;
"""
    errors = bind_errors(source)
    assert any("o" in e for e in errors)


def test_bare_callable_name_as_a_value_is_an_error():
    errors = bind_errors(OP % """
    o : () ==> nat
    o() == return 1;

    q : () ==> nat
    q() == return o;
""")
    assert errors


def test_result_name_needs_a_postcondition_with_a_result():
    errors = bind_errors(OP % """
    o : () ==> nat
    o() == return RESULT;
""")
    assert any("RESULT" in e for e in errors)

    errors = bind_errors(OP % """
    o : () ==> ()
    o() == skip
    post RESULT = 1;
""")
    assert any("RESULT" in e for e in errors)

    # fine in a postcondition of a value-returning operation
    document, table = load_source(OP % """
    o : () ==> nat
    o() == return 1
    post RESULT = 1;
""")
    assert table is not None


def test_old_names_only_in_postconditions_and_only_for_state():
    errors = bind_errors(OP % """
    o : () ==> ()
    o() == n := n~;
""")
    assert any("old value" in e for e in errors)

    errors = bind_errors(OP % """
    o : nat ==> ()
    o(x) == n := x
    post x~ = 1;
""")
    assert any("old value" in e for e in errors)

    document, table = load_source(OP % """
    o : () ==> ()
    o() == n := n + 1
    post n = n~ + 1;
""")
    old = find_node(document, "n~", "OldName")
    assert table.oldname_targets[old.node_id] == table.state_field_ids["n"]


def test_assignment_targets_must_be_state_or_local():
    errors = bind_errors(OP % """
    o : nat ==> ()
    o(x) == x := 3;
""")
    assert any("x" in e for e in errors)

    errors = bind_errors(OP % """
    o : () ==> ()
    o() == let y = 1 in y := 2;
""")
    assert any("y" in e for e in errors)


def test_call_statements_must_name_an_operation():
    source = """
values
    pi = 3;

functions
    f : nat -> nat
    f(x) == x;

operations
    o : () ==> ()
    o() == f(1);
"""
    errors = bind_errors(source)
    assert any("f" in e for e in errors)
    errors = bind_errors(source.replace("o() == f(1);", "o() == pi(1);"))
    assert any("pi" in e for e in errors)


def test_return_with_value_in_void_operation_is_rejected():
    errors = bind_errors(OP % """
    o : () ==> ()
    o() == return 3;
""")
    assert errors


def test_dcl_locals_shadow_but_do_not_duplicate():
    # shadowing an outer name is fine
    document, table = load_source(OP % """
    o : nat ==> nat
    o(x) ==
        (dcl y : nat := x;
        if y > 0 then
            (dcl x : nat := 2;
            y := x);
        return y);
""")
    inner_dcl = find_node(document, "x : nat := 2", "DclItem")
    inner_use = find_node(document, "x", "Name", index=-1)
    assert table.name_targets[inner_use.node_id] == table.decl_of(inner_dcl).decl_id

    # duplicating within one block is not
    errors = bind_errors(OP % """
    o : () ==> ()
    o() == (dcl z : nat, z : nat; skip);
""")
    assert any("z" in e for e in errors)


def test_dcl_initialisers_see_earlier_locals_not_later_ones():
    document, table = load_source(OP % """
    o : () ==> nat
    o() == (dcl a : nat := 1, b : nat := a; return b);
""")
    assert table is not None

    errors = bind_errors(OP % """
    o : () ==> nat
    o() == (dcl a : nat := b, b : nat := 1; return a);
""")
    assert any("b" in e for e in errors)


def test_value_definitions_resolve_document_wide():
    source = """
values
    small = big - 1;
    big = 10;

operations
    o : () ==> nat
    o() == return small + big;
"""
    document, table = load_source(source)
    assert table is not None  # order is a load-time concern, not a binding one


def test_state_init_pattern_binds_against_the_whole_state():
    document, table = load_corpus("memberbook_bad.vdmsl")
    pattern, expression = document.state.init
    decl = table.decl_of(pattern)
    assert decl.kind == "binder"
    first_name = next(n for n in iter_nodes(expression) if isinstance(n, Name))
    assert table.name_targets[first_name.node_id] == decl.decl_id


def test_tokens_read_by_skips_callee_names():
    document, table = load_corpus("memberbook_refactored.vdmsl")
    op = document.operation("register")
    let_stmt = op.body
    apply_expr = let_stmt.bindings[0][1]
    tokens = v.tokens_read_by(table, apply_expr)
    assert tokens == set()  # the callee name alone carries no data

    conjunct = v.post_conjuncts(op.postcondition)[0]
    tokens = v.tokens_read_by(table, conjunct)
    kinds = {type(t).__name__ for t in tokens}
    assert kinds == {"VarToken", "EntryToken", "ResultToken"}
    names = {
        type(t).__name__
        + ":"
        + (table.decl(t.decl_id).name if hasattr(t, "decl_id") else "")
        for t in tokens
    }
    assert "VarToken:NameBook" in names
    assert "EntryToken:NameBook" in names
    assert "ResultToken:register" in names
    assert "VarToken:name" in names


def test_value_token_classification():
    document, table = load_corpus("memberbook_bad.vdmsl")
    op = document.operation("register")
    ret = find_node(document, "return i", "Return")
    token = v.value_token(table, ret.expression)
    assert isinstance(token, v.VarToken)
    literal = find_node(document, "1", "Literal")
    assert v.value_token(table, literal) is None
    compound = find_node(document, "NextId + 1", "BinExp")
    token = v.value_token(table, compound)
    assert isinstance(token, v.ExprToken) and token.node_id == compound.node_id
