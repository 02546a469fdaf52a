from __future__ import annotations

import pytest

from gridcalc.formula import (
    ArrayConst,
    Binary,
    Call,
    LexError,
    Literal,
    OMITTED,
    ParseError,
    Ref,
    TableFormulaError,
    parse_formula,
    static_dependencies,
    tokenize,
    unparse,
)
from gridcalc.model import CellAddress, Error, Literal as LiteralValue, parse_address

CTX = CellAddress("Book1", "Sheet1", 2, 2)  # B2


def ref(text, ctx=CTX):
    return parse_address(text, ctx)


# Formulas as printed in the source layouts this engine reproduces.
ISBN10_FORMULA = (
    'IF(12-MOD(SUMPRODUCT(VALUE(MID(A2,{1;2;3;4;5;6;7;8;9},1)),{10;9;8;7;6;5;4;3;2}),11)'
    '=MATCH(RIGHT(A2),{"0";"1";"2";"3";"4";"5";"6";"7";"8";"9";"X"},0),"valid","invalid")'
)
ISBN13_FORMULA = (
    'IF(MOD(10-MOD(SUMPRODUCT(VALUE(MID(A2,{1;2;3;4;5;6;7;8;9;10;11;12},1)),'
    '{1;3;1;3;1;3;1;3;1;3;1;3}),10),10)=VALUE(RIGHT(A2)),"valid","invalid")'
)
CORPUS = [
    ISBN10_FORMULA,
    ISBN13_FORMULA,
    'IF(ISBLANK(A2),"",IF(LEN(A2)=10,B2,C2))',
    "D2",
    "INDEX(INDIRECT(A2),1)&INDEX(INDIRECT(A2),2)&INDEX(INDIRECT(A2),3)&INDEX(INDIRECT(A2),4)",
    'IF(ISBLANK(A2),"",C2)',
    '"A5:D5"',
    "[Book2]Sheet1!A1",
    "IF(ISBLANK([Book2]Sheet2!A1),[Book2]Sheet1!A1,[Book2]Sheet2!A1)",
    "[lib]ISBN10check!B9",
    "INDEX(INDIRECT(A2),1)",
    "B2&B3&B4",
    "12-MOD(SUMPRODUCT(VALUE(MID(B6,{1;2;3;4;5;6;7;8;9},1)),{10;9;8;7;6;5;4;3;2}),11)",
    # ADDRESS workaround, standard five-argument signature
    '"[Book2]" & ADDRESS(ROW(A1:A5), COLUMN(A1:A5), 4, TRUE, "Sheet1") & ":" & '
    "ADDRESS(ROW(A1:A5)+ROWS(A1:A5)-1, COLUMN(A1:A5)+COLUMNS(A1:A5)-1, 4)",
    # as printed, with the sheet text in the fourth slot; parses fine
    '"[Book2]" & ADDRESS(ROW(A1:A5), COLUMN(A1:A5), 4, "Sheet1") & ":" & '
    "ADDRESS(ROW(A1:A5)+ROWS(A1:A5)-1, COLUMN(A1:A5)+COLUMNS(A1:A5)-1, 4)",
]


# ---------------------------------------------------------------------------
# tokenizer
# ---------------------------------------------------------------------------


def kinds(source):
    return [(t.kind, t.lexeme) for t in tokenize(source)]


def test_tokenize_arithmetic():
    assert kinds("1+2") == [("number", "1"), ("operator", "+"), ("number", "2")]


def test_tokenize_array_constant():
    assert kinds("{10;9;8}") == [
        ("punct", "{"),
        ("number", "10"),
        ("punct", ";"),
        ("number", "9"),
        ("punct", ";"),
        ("number", "8"),
        ("punct", "}"),
    ]


def test_tokenize_match_fragment():
    toks = kinds('MATCH(RIGHT(A2),{"0";"1"},0)')
    assert toks[:4] == [
        ("identifier", "MATCH"),
        ("punct", "("),
        ("identifier", "RIGHT"),
        ("punct", "("),
    ]
    assert ("cellref", "A2") in toks
    assert ("text", '"0"') in toks


def test_tokenize_classification():
    assert kinds("TRUE")[0][0] == "boolean"
    assert kinds("#N/A")[0][0] == "error-literal"
    assert kinds("#DIV/0!")[0][0] == "error-literal"
    assert kinds("ISBN10check")[0][0] == "identifier"
    assert kinds("B9")[0][0] == "cellref"
    assert kinds("A0")[0][0] == "identifier"  # row 0 cannot be a cell
    assert kinds("A1048577")[0][0] == "identifier"  # beyond the grid
    assert kinds("XFD1048576")[0][0] == "cellref"
    assert kinds("<>")[0] == ("operator", "<>")


@pytest.mark.parametrize("source", CORPUS)
def test_tokens_reconstruct_source(source):
    toks = tokenize(source)
    rebuilt = []
    pos = 0
    for t in toks:
        gap = source[pos : t.start]
        assert gap.strip() == ""  # only whitespace between tokens
        rebuilt.append(gap)
        assert source[t.start : t.end] == t.lexeme
        rebuilt.append(t.lexeme)
        pos = t.end
    rebuilt.append(source[pos:])
    assert "".join(rebuilt) == source


def test_unterminated_text_reports_offset():
    with pytest.raises(LexError) as exc:
        tokenize('1&"abc')
    assert exc.value.offset == 2


def test_illegal_character():
    with pytest.raises(LexError):
        tokenize("1@2")
    with pytest.raises(LexError):
        tokenize("50%")  # postfix percent is out of scope


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def test_parse_if_shape():
    ast = parse_formula("IF(LEN(A2)=10,B2,C2)", CTX)
    assert ast == Call(
        "IF",
        (
            Binary("=", Call("LEN", (Ref(ref("A2")),)), Literal(10.0)),
            Ref(ref("B2")),
            Ref(ref("C2")),
        ),
    )


def test_parse_concat_of_calls():
    ast = parse_formula("INDEX(INDIRECT(A2),1)&INDEX(INDIRECT(A2),2)", CTX)
    assert isinstance(ast, Binary) and ast.op == "&"
    assert isinstance(ast.left, Call) and ast.left.name == "INDEX"
    assert isinstance(ast.right, Call) and ast.right.name == "INDEX"


def test_table_is_not_enterable():
    with pytest.raises(TableFormulaError):
        parse_formula("TABLE(,A2)", CTX)
    with pytest.raises(TableFormulaError):
        parse_formula("1+table(A2,)", CTX)


def test_omitted_arguments():
    ast = parse_formula("ADDRESS(1,1,,TRUE)", CTX)
    assert ast.args[2] is OMITTED
    ast = parse_formula("IF(A1,,2)", CTX)
    assert ast.args[1] is OMITTED
    ast = parse_formula("F(,)", CTX)
    assert ast.args == (OMITTED, OMITTED)
    assert parse_formula("F()", CTX).args == ()


def test_precedence():
    assert parse_formula("1+2*3", CTX) == Binary(
        "+", Literal(1.0), Binary("*", Literal(2.0), Literal(3.0))
    )
    # comparisons bind loosest, & binds looser than +
    ast = parse_formula('"a"&1+2=B2', CTX)
    assert ast.op == "=" and ast.left.op == "&" and ast.left.right.op == "+"
    # unary minus binds tighter than ^
    ast = parse_formula("-2^2", CTX)
    assert ast.op == "^" and ast.left == parse_formula("-2", CTX)
    # left associativity
    ast = parse_formula("8-4-2", CTX)
    assert ast == Binary("-", Binary("-", Literal(8.0), Literal(4.0)), Literal(2.0))


def test_parse_references():
    assert parse_formula("A5:D5", CTX) == Ref(ref("A5:D5"))
    assert parse_formula("Sheet2!C3", CTX) == Ref(parse_address("Sheet2!C3", CTX))
    assert parse_formula("[lib]ISBN10check!B9", CTX) == Ref(
        CellAddress("lib", "ISBN10check", 2, 9)
    )
    assert parse_formula("SomeName", CTX) == Ref("SomeName")


def test_parse_array_constants():
    ast = parse_formula('{1,2;3,4}', CTX)
    assert ast == ArrayConst(((1.0, 2.0), (3.0, 4.0)))
    ast = parse_formula('{"0";"X"}', CTX)
    assert ast.rows == (("0",), ("X",))
    assert parse_formula("{-1;2}", CTX).rows == ((-1.0,), (2.0,))
    with pytest.raises(ParseError):
        parse_formula("{1,2;3}", CTX)
    with pytest.raises(ParseError):
        parse_formula("{A1}", CTX)


def test_parse_errors_carry_position():
    with pytest.raises(ParseError) as exc:
        parse_formula("1+", CTX)
    assert exc.value.offset == 2
    with pytest.raises(ParseError):
        parse_formula("IF(1,2", CTX)
    with pytest.raises(ParseError):
        parse_formula("1 2", CTX)


def test_boolean_and_error_literals():
    assert parse_formula("TRUE", CTX) == Literal(True)
    assert parse_formula("#REF!", CTX) == Literal(Error.REF)


@pytest.mark.parametrize("source", CORPUS)
def test_corpus_parses(source):
    parse_formula(source, CTX)


# ---------------------------------------------------------------------------
# unparse round trip
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("source", CORPUS + ["-2^2", "1-(2-3)", "(1+2)*3", "-(A1&B1)", "A1:B2"])
def test_unparse_reparses_identically(source):
    ast = parse_formula(source, CTX)
    rendered = unparse(ast, CTX)
    assert parse_formula(rendered, CTX) == ast


def test_unparse_qualification_levels():
    ast = parse_formula("[Book1]Sheet1!A1+[Book1]Other!A1+[lib]S!A1", CTX)
    assert unparse(ast, CTX) == "A1+Other!A1+[lib]S!A1"


# ---------------------------------------------------------------------------
# static dependencies
# ---------------------------------------------------------------------------


def test_dependencies_of_result_formula():
    ast = parse_formula('IF(ISBLANK(A2),"",IF(LEN(A2)=10,B2,C2))', CTX)
    info = static_dependencies(ast)
    assert info.refs == {ref("A2"), ref("B2"), ref("C2")}
    assert not info.volatile and not info.unresolved_names


def test_dependencies_of_literal():
    info = static_dependencies(parse_formula("5", CTX))
    assert info.refs == set() and not info.volatile


def test_indirect_is_volatile_dependency():
    info = static_dependencies(parse_formula("INDIRECT(A2)", CTX))
    assert info.refs == {ref("A2")}
    assert info.volatile


def test_offset_is_volatile_dependency():
    assert static_dependencies(parse_formula("OFFSET(A1,1,0)", CTX)).volatile


def test_xadr_volatility_depends_on_argument():
    assert not static_dependencies(parse_formula("XADR(A1:A5)", CTX)).volatile
    assert static_dependencies(parse_formula("XADR(OFFSET(A1,1,0))", CTX)).volatile


def test_defined_names_resolve_or_flag():
    target = ref("D2")
    info = static_dependencies(parse_formula("ISBNcheck", CTX), {"isbncheck": target})
    assert info.refs == {target} and not info.unresolved_names
    info = static_dependencies(parse_formula("Mystery+1", CTX), {})
    assert info.unresolved_names == {"Mystery"}


def test_range_dependencies():
    info = static_dependencies(parse_formula("SUM(A1:B2)", CTX))
    assert info.refs == {ref("A1:B2")}


def test_sheet_qualified_range():
    assert parse_formula("Sheet2!A1:B2", CTX) == Ref(parse_address("Sheet2!A1:B2", CTX))
    assert parse_formula("[lib]S!A1:A3", CTX) == Ref(
        parse_address("[lib]S!A1:A3", CTX)
    )


def test_static_dependencies_cover_actual_reads(monkeypatch):
    # for formulas without INDIRECT/OFFSET, every cell the evaluator touches
    # must appear among the statically extracted references
    from gridcalc.engine import EvalContext
    from gridcalc.model import Sheet, Workspace

    ws = Workspace()
    sheet = ws.add_workbook("Book1").ensure_sheet("Sheet1")
    sheet.set_content(2, 1, LiteralValue("8320425395"))

    reads = []
    original = Sheet.value

    def spy(self, row, col):
        reads.append((self.name.casefold(), row, col))
        return original(self, row, col)

    monkeypatch.setattr(Sheet, "value", spy)
    for source in CORPUS:
        if "INDIRECT" in source or "OFFSET" in source:
            continue
        ast = parse_formula(source, CTX)
        info = static_dependencies(ast)
        reads.clear()
        EvalContext(ws, CTX).eval(ast)
        allowed = set()
        for r in info.refs:
            cells = r.cells() if hasattr(r, "cells") else [r]
            for c in cells:
                allowed.add((c.sheet.casefold(), c.row, c.column))
        assert set(reads) <= allowed, source
