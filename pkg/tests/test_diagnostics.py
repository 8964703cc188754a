from importlib import resources

import pytest

from sitcalc.core import Span
from sitcalc.diagnostics import (
    ADD_SITUATION_ARGUMENT,
    WRAP_IN_RELATIONAL_FLUENT,
    Diagnostic,
    StaleFixError,
    apply_fix,
    diagnose_program,
    fix_program,
    suggest_fixes,
)
from sitcalc.parser import parse_program, pretty_print


@pytest.fixture
def corpus():
    return parse_program(resources.files("sitcalc.corpus").joinpath("robot.sitc").read_text())


def fixes_for(program):
    context = program.context()
    return [
        fix
        for report in diagnose_program(program)
        for diagnostic in report.diagnostics
        for fix in suggest_fixes(context, report.statement.formula, diagnostic)
    ]


def test_corpus_verdicts(corpus):
    reports = diagnose_program(corpus)
    assert [r.status for r in reports] == ["well-typed", "ill-typed", "ill-typed"]
    assert reports[0].diagnostics == ()
    assert [d.code for r in reports for d in r.diagnostics] == ["E006", "E005"]
    assert [d.statement for r in reports for d in r.diagnostics] == [1, 2]


def test_errors_in_one_statement_do_not_stop_the_others():
    program = parse_program("var x: Object; var s: Situation; rel fragile(Object); stmt a: q; stmt b: fragile(x, s);")
    first, second = diagnose_program(program)
    assert first.diagnostics[0].code == "E001"
    assert second.wellTyped


def test_max_errors(corpus):
    reports = diagnose_program(corpus, max_errors=1)
    assert sum(len(r.diagnostics) for r in reports) == 1
    assert not reports[2].wellTyped


def test_equation_fix(corpus):
    fix = fixes_for(corpus)[0]
    assert fix.kind == WRAP_IN_RELATIONAL_FLUENT and fix.code == "E006"
    assert fix.asDict()["original"] == "c"
    assert pretty_print(fix.replacement) == "inColor(c, s)"
    assert pretty_print(fix.declaration) == "rel inColor(Object);"


def test_conjunction_fix(corpus):
    fix = fixes_for(corpus)[1]
    assert fix.kind == ADD_SITUATION_ARGUMENT and fix.code == "E005"
    assert fix.original == "heavy(x)"
    assert pretty_print(fix.replacement) == "heavy(x, s)"
    assert pretty_print(fix.declaration) == "rel heavy(Object);"


def test_applied_fixes_type_check(corpus):
    for fix in fixes_for(corpus):
        fixed = apply_fix(corpus, fix)
        report = diagnose_program(fixed)[fix.statement]
        assert report.wellTyped, pretty_print(fixed.statements[fix.statement])


def test_fix_program(corpus):
    fixed, applied = fix_program(corpus)
    assert [f.code for f in applied] == ["E006", "E005"]
    assert all(r.wellTyped for r in diagnose_program(fixed))
    assert "rel heavy(Object);" in fixed.source and "fun heavy" not in fixed.source


def test_stale_fix(corpus):
    fix = fixes_for(corpus)[1]
    fixed = apply_fix(corpus, fix)
    with pytest.raises(StaleFixError) as info:
        apply_fix(fixed, fix)
    assert info.value.code == "E005"
    assert info.value.fix is fix


def test_no_fix_for_unbound_names():
    program = parse_program("var s: Situation; stmt a: q;")
    assert fixes_for(program) == []


def test_no_fix_without_a_single_situation_variable():
    program = parse_program("var x: Object; var s: Situation; var t: Situation; rel color(Object); stmt a: color(x, s) = x;")
    with pytest.warns(RuntimeWarning, match="one situation variable"):
        assert fixes_for(program) == []


def test_diagnostic_fields():
    syntax = Diagnostic("E101", "unexpected ';'", Span(3, 4))
    typed = Diagnostic("E003", "argument type mismatch", Span(0, 1), statement=0)
    assert sorted([typed, syntax], key=lambda d: d.sortKey) == [syntax, typed]
    assert syntax.asDict() == {
        "code": "E101",
        "severity": "error",
        "message": "unexpected ';'",
        "span": Span(3, 4).asDict(),
        "related": [],
    }
    with pytest.raises(ValueError):
        Diagnostic("E999", "no such code", None)
    with pytest.raises(ValueError):
        Diagnostic("E001", "unbound name", None, severity="fatal")
