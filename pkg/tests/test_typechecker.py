from importlib import resources

import pytest

from sitcalc.core import (
    ACTION,
    BOOL,
    EXISTS,
    FORALL,
    OBJECT,
    SITUATION,
    UNIT,
    Atom,
    ConjF,
    DisjF,
    Exists,
    Forall,
    Literal,
    Product,
    Seq,
    SituationValue,
    Var,
)
from sitcalc.oracle import derivable
from sitcalc.parser import parse_formula, parse_program
from sitcalc.typechecker import (
    PAPER_FAITHFUL,
    STANDARD,
    TypeCheckError,
    TypeChecker,
    check_rule_schema,
    derivation_tree,
    expand_typed_quantifier,
    rule_trace,
    typecheck,
    typecheck_behavioral,
    typecheck_formula,
    typecheck_quantifier,
    typecheck_term,
)
from tests.generators import oracle_context, typing_space


@pytest.fixture(scope="module")
def corpus():
    return parse_program(resources.files("sitcalc.corpus").joinpath("robot.sitc").read_text())


@pytest.fixture(scope="module")
def context(corpus):
    return corpus.context()


def formula(text, context):
    return parse_formula(text, context)


def test_drop_fragile_is_situation(corpus, context):
    judgment = typecheck(context, corpus.statements[0].formula)
    assert judgment.resultType == SITUATION
    assert judgment.rule == "M-SupsetBT"
    left, right = judgment.premises
    assert (left.resultType, right.resultType) == (SITUATION, SITUATION)
    assert rule_trace(right) == ["T-FunFlt", "T-Do", "T-RelFlt"]
    assert rule_trace(judgment) == ["T-RelFlt", "T-FunFlt", "T-Do", "T-RelFlt", "M-SupsetBT"]
    assert check_rule_schema(judgment) == []


def test_paint_color_sides_differ(corpus, context):
    with pytest.raises(TypeCheckError) as info:
        typecheck(context, corpus.statements[1].formula)
    error = info.value
    assert error.code == "E006"
    assert error.message == "the sides of '=' differ: Situation vs Object"
    assert [j.resultType for j in error.judgments] == [SITUATION, OBJECT]
    assert (error.expected, error.found) == (SITUATION, OBJECT)


def test_pickup_conjunction_not_uniform(corpus, context):
    with pytest.raises(TypeCheckError) as info:
        typecheck(context, corpus.statements[2].formula)
    error = info.value
    assert error.code == "E005"
    assert error.message == "the conjunction is not uniformly typed: (Situation, Action, Situation)"
    quantified = error.judgments[0]
    assert quantified.rule == "T-Unv1"
    assert rule_trace(quantified) == ["T-RelFlt", "T-Neg", "T-Unv1"]
    assert corpus.source[error.span.start : error.span.end].startswith("(forall z: Object)")


def test_arity_mismatch(context):
    with pytest.raises(TypeCheckError) as info:
        typecheck(context, formula("drop(r)", context))
    assert info.value.code == "E002"
    assert "expects 2 arguments, got 1" in info.value.message


def test_relational_fluent_used_as_functional(context):
    with pytest.raises(TypeCheckError) as info:
        typecheck(context, formula("fragile(x) /\\ fragile(x, s)", context))
    assert info.value.code == "E002"


def test_quantified_variable_in_wrong_position(context):
    with pytest.raises(TypeCheckError) as info:
        typecheck(context, formula("(forall z: Situation) ~holding(r, z, s)", context))
    error = info.value
    assert error.code == "E003"
    assert error.position == 2
    assert (error.expected, error.found) == (OBJECT, SITUATION)


def test_vacuous_quantifier(context):
    with pytest.raises(TypeCheckError) as info:
        typecheck(context, formula("(exists z: Object) fragile(x, s)", context))
    assert info.value.code == "E009"


def test_quantifier_body_must_be_a_fluent(context):
    with pytest.raises(TypeCheckError) as info:
        typecheck(context, formula("(forall z: Object) z", context))
    assert info.value.code == "E003"


def test_unbound_names(context):
    for text in ("q", "unknown(x)", "fragile(q, s)"):
        with pytest.raises(TypeCheckError) as info:
            typecheck(context, formula(text, context))
        assert info.value.code == "E001", text


def test_do_needs_an_action(context):
    with pytest.raises(TypeCheckError) as info:
        typecheck(context, formula("do(fragile(x, s), s)", context))
    assert info.value.code == "E008"
    assert info.value.found == SITUATION


def test_superset_sides(context):
    assert typecheck(context, formula("poss(drop(r, x), s) => drop(r, x)", context)).resultType == UNIT
    assert typecheck(context, formula("drop(r, x) => ~drop(r, c)", context)).resultType == ACTION
    with pytest.raises(TypeCheckError) as info:
        typecheck(context, formula("fragile(x, s) => drop(r, x)", context))
    assert info.value.code == "E004"


def test_term_rules(context):
    assert typecheck_term(context, Literal("true")).resultType == BOOL
    assert typecheck_term(context, Literal("unit")).resultType == UNIT
    judgment = typecheck(context, formula("x /\\ ~c", context))
    assert (judgment.rule, judgment.resultType) == ("T-Conj", OBJECT)
    judgment = typecheck(context, formula("x => c", context))
    assert (judgment.rule, judgment.resultType) == ("T-Spt", UNIT)
    judgment = typecheck_term(context, Seq((Var("x"), Var("s"))))
    assert judgment.resultType == Product((OBJECT, SITUATION))
    with pytest.raises(TypeCheckError) as info:
        typecheck(context, formula("x \\/ s", context))
    assert info.value.code == "E003"
    with pytest.raises(TypeError):
        typecheck_term(context, Atom(formula("drop(r, x)", context).bt))


def test_situation_histories(context):
    drop = formula("drop(r, x)", context).bt
    judgment = typecheck_term(context, SituationValue(Var("s0"), (drop, drop)))
    assert judgment.resultType == SITUATION
    assert rule_trace(judgment) == ["T-FunFlt", "T-FunFlt", "T-Do", "T-Do"]
    with pytest.raises(TypeCheckError) as info:
        typecheck_term(context, SituationValue(Var("s0"), (Var("x"),)))
    assert info.value.code == "E008"


def test_behavioral_and_formula_entry_points(context):
    assert typecheck_behavioral(context, formula("poss(pickup(r, x), s)", context).bt).rule == "T-Poss"
    judgment = typecheck_formula(context, formula("fragile(x, s) /\\ nextTo(r, x, s)", context))
    assert (judgment.rule, judgment.resultType) == ("M-ConjUnit", UNIT)
    judgment = typecheck_formula(context, formula("heavy(x) = drop(r, x)", context))
    assert (judgment.rule, judgment.resultType) == ("M-Eq", BOOL)
    assert typecheck_quantifier(context, EXISTS, "z", OBJECT, formula("heavy(z)", context)).rule == "T-Est2"
    assert typecheck_quantifier(context, FORALL, "z", OBJECT, formula("~heavy(z)", context)).rule == "T-Unv2"


def test_multi_candidate_variables():
    program = parse_program(
        "var u: Object | Action; var x: Object; var s: Situation; rel fragile(Object); fun heavy(Object);"
        " stmt a: fragile(u, s);"
    )
    context = program.context()
    assert typecheck(context, program.statements[0].formula).resultType == SITUATION
    assert typecheck(context, formula("u /\\ heavy(x)", context)).resultType == UNIT
    # each occurrence takes its own candidate; several results go to the first type by name
    assert typecheck(context, Var("u")).resultType == ACTION
    assert typecheck(context, formula("~u", context)).rule == "T-Neg"
    assert typecheck(context, formula("u /\\ u", context)).resultType == ACTION
    assert typecheck(context, formula("u => u", context)).resultType == UNIT
    assert typecheck(context, formula("u /\\ x", context)).resultType == OBJECT
    assert typecheck(context, formula("do(u, s)", context)).resultType == SITUATION
    assert list(TypeChecker(context).options(formula("~u", context))) == [ACTION, OBJECT]
    with pytest.raises(TypeCheckError) as info:
        typecheck(context, formula("u /\\ s", context))
    assert info.value.code == "E003"
    assert [j.resultType for j in info.value.judgments] == [ACTION, SITUATION]


def test_quantifier_expansion_modes(context):
    body = formula("~holding(r, z, s)", context)
    universal = Forall("z", (OBJECT, SITUATION), body)
    assert isinstance(expand_typed_quantifier(universal, STANDARD), ConjF)
    assert isinstance(expand_typed_quantifier(universal, PAPER_FAITHFUL), DisjF)
    existential = Exists("z", (OBJECT, SITUATION), body)
    assert isinstance(expand_typed_quantifier(existential, STANDARD), DisjF)
    assert isinstance(expand_typed_quantifier(existential, PAPER_FAITHFUL), ConjF)
    for mode in (STANDARD, PAPER_FAITHFUL):
        with pytest.raises(TypeCheckError) as info:
            typecheck(context, universal, mode)
        assert info.value.code == "E003"
    with pytest.raises(ValueError):
        expand_typed_quantifier(universal, "lenient")
    with pytest.raises(ValueError):
        TypeChecker(context, "lenient")


def test_derivation_tree(corpus, context):
    judgment = typecheck(context, corpus.statements[0].formula)
    lines = derivation_tree(judgment).splitlines()
    assert lines[-1].startswith("fragile(x, s) => broken(x, do(drop(r, x), s)) : Situation")
    assert lines[-1].endswith("[M-SupsetBT]")
    assert lines[0].startswith("    ")
    tree = derivation_tree(judgment, structured=True)
    assert tree["rule"] == "M-SupsetBT" and tree["type"] == "Situation"
    assert [p["rule"] for p in tree["premises"]] == ["T-RelFlt", "T-RelFlt"]
    unit = derivation_tree(typecheck_term(context, Literal("unit")), structured=True)
    assert unit == {"rule": "M-ConjUnit", "subject": "unit", "type": "Unit", "premises": []}
    assert check_rule_schema(typecheck_term(context, Literal("unit"))) == []


def test_schema_check_flags_forged_derivations(context):
    judgment = typecheck(context, formula("x /\\ c", context))
    forged = type(judgment)(judgment.subject, SITUATION, judgment.rule, judgment.premises)
    problems = check_rule_schema(forged)
    assert len(problems) == 1 and problems[0][0] is forged


def test_agrees_with_typing_oracle():
    context = oracle_context()
    checked = 0
    for node in typing_space():
        try:
            judgment = typecheck(context, node)
            accepted = True
        except TypeCheckError:
            accepted = False
        assert derivable(context, node) == accepted, node
        if accepted:
            assert check_rule_schema(judgment) == []
        checked += 1
    assert checked > 1000
