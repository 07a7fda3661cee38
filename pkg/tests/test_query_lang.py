import random
import sqlite3

import pytest
from hypothesis import given, settings, strategies as st

from sdgdiv.corpus_store import PublicationRecord
from sdgdiv.query_lang import (
    And,
    AndNot,
    FieldMatch,
    Or,
    QuerySyntaxError,
    TableSchema,
    TranspileError,
    emit_sql,
    eval_query,
    keywords_column_value,
    normalize_for_match,
    parse_query,
    pretty_print,
)

from helpers import naive_eval, random_ast, random_record

SCHEMA = TableSchema(
    columns={"TITLE": "title", "ABS": "abstract", "AUTHKEY": "keywords", "SRCTITLE": "venue_title"}
)


def rec(**kw):
    base = dict(
        doi="10.1/a", title="", abstract="", year=2020,
        doc_type="article", venue_type="journal", source_id="s",
    )
    base.update(kw)
    return PublicationRecord(**base)


# ---------------------------------------------------------------------------
# parsing

def test_parse_single_field_match():
    assert parse_query('ABS("gender equality")') == FieldMatch("ABS", "gender equality")


def test_parse_or_of_two_fields():
    ast = parse_query('TITLE("wage gap") OR AUTHKEY(inequalit*)')
    assert ast == Or((FieldMatch("TITLE", "wage gap"), FieldMatch("AUTHKEY", "inequalit*")))


def test_parse_unclosed_paren_is_syntax_error():
    with pytest.raises(QuerySyntaxError) as err:
        parse_query('ABS("a" AND')
    assert "(" in str(err.value)
    assert err.value.line == 1


def test_parse_reports_position():
    with pytest.raises(QuerySyntaxError) as err:
        parse_query('TITLE("x") OR\nBADFIELD("y")')
    assert err.value.line == 2
    assert err.value.col == 1
    assert "unknown field" in str(err.value)


def test_parse_phrase_list_expands_to_or():
    ast = parse_query('ABS("a b", "c", d)')
    assert ast == Or(
        (FieldMatch("ABS", "a b"), FieldMatch("ABS", "c"), FieldMatch("ABS", "d"))
    )


def test_parse_phrase_list_or_separator():
    assert parse_query('ABS("a" OR "b")') == Or(
        (FieldMatch("ABS", "a"), FieldMatch("ABS", "b"))
    )


def test_parse_precedence_and_not_tightest():
    ast = parse_query('TITLE(a) OR TITLE(b) AND TITLE(c) AND NOT TITLE(d)')
    assert ast == Or(
        (
            FieldMatch("TITLE", "a"),
            And(
                (
                    FieldMatch("TITLE", "b"),
                    AndNot((FieldMatch("TITLE", "c"), FieldMatch("TITLE", "d"))),
                )
            ),
        )
    )


def test_parse_and_not_left_associative():
    ast = parse_query("TITLE(a) AND NOT TITLE(b) AND NOT TITLE(c)")
    assert ast == AndNot(
        (AndNot((FieldMatch("TITLE", "a"), FieldMatch("TITLE", "b"))), FieldMatch("TITLE", "c"))
    )


def test_parse_hyphenated_field_name():
    assert parse_query("TITLE-ABS-KEY(water)") == FieldMatch("TITLE_ABS_KEY", "water")


def test_parse_empty_phrase_rejected():
    with pytest.raises(QuerySyntaxError):
        parse_query('ABS("")')


def test_parse_dangling_operator_rejected():
    with pytest.raises(QuerySyntaxError):
        parse_query("AND TITLE(a)")
    with pytest.raises(QuerySyntaxError):
        parse_query("TITLE(a) AND")


def test_parse_unknown_field_rejected():
    with pytest.raises(QuerySyntaxError):
        parse_query("AUTH(smith)")


def test_parse_proximity_operators_rejected():
    with pytest.raises(QuerySyntaxError) as err:
        parse_query('TITLE("water" W/2 "supply")')
    assert "unsupported proximity operator" in str(err.value)
    with pytest.raises(QuerySyntaxError):
        parse_query('ABS("a" PRE/3 "b")')


def test_parse_wildcard_only_word_final():
    with pytest.raises(QuerySyntaxError):
        parse_query("TITLE(in*equality)")
    with pytest.raises(QuerySyntaxError):
        parse_query('TITLE("*water")')


# ---------------------------------------------------------------------------
# evaluation

def test_eval_phrase_at_word_boundary():
    r = rec(abstract="Drivers of economic growth in emerging economies")
    assert eval_query(FieldMatch("ABS", "economic growth"), r)


def test_eval_word_boundary_blocks_substring():
    r = rec(abstract="outgrowth of policy")
    assert not eval_query(FieldMatch("ABS", "growth"), r)


def test_eval_case_insensitive_ascii():
    r = rec(title="Gender EQUALITY now")
    assert eval_query(FieldMatch("TITLE", "gender equality"), r)


def test_eval_unicode_letters_not_folded():
    assert eval_query(FieldMatch("ABS", "économie"), rec(abstract="une économie verte"))
    assert not eval_query(FieldMatch("ABS", "économie"), rec(abstract="une ÉCONOMIE verte"))


def test_eval_wildcard_prefix():
    r = rec(abstract="rising inequalities persist")
    assert eval_query(FieldMatch("ABS", "inequalit*"), r)
    assert not eval_query(FieldMatch("ABS", "inequalitx*"), r)


def test_eval_keywords_match_within_one_keyword():
    r = rec(keywords=("gender", "equality"))
    assert eval_query(FieldMatch("AUTHKEY", "gender"), r)
    # no phrase spans two keywords
    assert not eval_query(FieldMatch("AUTHKEY", "gender equality"), r)
    assert eval_query(FieldMatch("AUTHKEY", "gender equality"), rec(keywords=("gender equality",)))


def test_eval_title_abs_key_is_union():
    ast = FieldMatch("TITLE_ABS_KEY", "water")
    assert eval_query(ast, rec(title="water supply"))
    assert eval_query(ast, rec(abstract="on water"))
    assert eval_query(ast, rec(keywords=("clean water",)))
    assert not eval_query(ast, rec(venue_title="water journal"))


def test_eval_and_not():
    ast = parse_query("ABS(water) AND NOT ABS(ocean)")
    assert eval_query(ast, rec(abstract="water supply"))
    assert not eval_query(ast, rec(abstract="water in the ocean"))


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_eval_matches_naive_scanner_property(seed):
    rng = random.Random(seed)
    ast = random_ast(rng, depth=3, sql_safe=False)
    records = [random_record(rng, f"10.1/r{i}", "s") for i in range(40)]
    for r in records:
        assert eval_query(ast, r) == naive_eval(ast, r)


def test_eval_andnot_self_is_empty_and_or_self_is_identity():
    rng = random.Random(5)
    records = [random_record(rng, f"10.1/r{i}", "s") for i in range(60)]
    for _ in range(20):
        q = random_ast(rng, depth=2, sql_safe=False)
        for r in records:
            assert not eval_query(AndNot((q, q)), r)
            assert eval_query(Or((q, q)), r) == eval_query(q, r)


def test_eval_monotone_under_or_extension():
    rng = random.Random(11)
    records = [random_record(rng, f"10.1/r{i}", "s") for i in range(60)]
    for _ in range(20):
        q = random_ast(rng, depth=2, sql_safe=False)
        extra = random_ast(rng, depth=1, sql_safe=False)
        extended = Or((q, extra))
        for r in records:
            if eval_query(q, r):
                assert eval_query(extended, r)


# ---------------------------------------------------------------------------
# pretty-print round trip

@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_print_parse_round_trip_property(seed):
    rng = random.Random(seed)
    ast = random_ast(rng, depth=4, sql_safe=False)
    assert parse_query(pretty_print(ast)) == ast


def test_print_nested_same_kind_keeps_shape():
    ast = Or((Or((FieldMatch("ABS", "a"), FieldMatch("ABS", "b"))), FieldMatch("ABS", "c")))
    assert parse_query(pretty_print(ast)) == ast


# ---------------------------------------------------------------------------
# SQL emission

def test_emit_sql_golden_single_match():
    sql = emit_sql(FieldMatch("ABS", "gender equality"), SCHEMA)
    assert sql == (
        "SELECT doi FROM pubs WHERE "
        "lower(' ' || abstract || ' ') LIKE '% gender equality %'"
    )


def test_emit_sql_andnot_shape():
    sql = emit_sql(
        AndNot((FieldMatch("ABS", "a"), FieldMatch("TITLE", "b"))), SCHEMA
    )
    assert " AND NOT " in sql
    assert sql.index("abstract") < sql.index("title")


def test_emit_sql_three_way_or():
    ast = Or((FieldMatch("ABS", "a"), FieldMatch("ABS", "b"), FieldMatch("ABS", "c")))
    sql = emit_sql(ast, SCHEMA)
    assert sql.count(" OR ") == 2


def test_emit_sql_missing_field_is_transpile_error():
    with pytest.raises(TranspileError):
        emit_sql(FieldMatch("SRCTITLE", "nature"), TableSchema(columns={"ABS": "abstract"}))


def test_emit_sql_mid_pattern_wildcard_unsupported():
    with pytest.raises(TranspileError):
        emit_sql(FieldMatch("ABS", "gen* equality"), SCHEMA)


def test_emit_sql_deterministic():
    ast = parse_query('TITLE("wage gap") OR AUTHKEY(inequalit*)')
    assert emit_sql(ast, SCHEMA) == emit_sql(ast, SCHEMA)


def load_sqlite(records):
    conn = sqlite3.connect(":memory:")
    conn.execute(
        "CREATE TABLE pubs (doi TEXT, title TEXT, abstract TEXT, keywords TEXT, venue_title TEXT)"
    )
    for r in records:
        conn.execute(
            "INSERT INTO pubs VALUES (?, ?, ?, ?, ?)",
            (
                r.doi,
                normalize_for_match(r.title),
                normalize_for_match(r.abstract),
                keywords_column_value(r.keywords),
                normalize_for_match(r.venue_title),
            ),
        )
    return conn


def test_sql_execution_agrees_with_eval():
    rng = random.Random(99)
    records = [random_record(rng, f"10.1/r{i}", "s") for i in range(300)]
    conn = load_sqlite(records)
    for _ in range(25):
        ast = random_ast(rng, depth=3, sql_safe=True)
        in_memory = {r.doi for r in records if eval_query(ast, r)}
        via_sql = {row[0] for row in conn.execute(emit_sql(ast, SCHEMA))}
        assert via_sql == in_memory
