from importlib import resources

import pytest

from sitcalc.core import (
    EXISTS,
    FORALL,
    OBJECT,
    SITUATION,
    Do,
    Eq,
    FunFluent,
    Literal,
    Poss,
    QuantF,
    RelFluent,
    Seq,
    SituationValue,
    Supset,
    Var,
    World,
    size,
    walk,
)
from sitcalc.evaluator import (
    IsValue,
    OutOfFuel,
    SatisfactionError,
    Stepped,
    Stuck,
    TransitionPolicy,
    check_preservation,
    check_progress,
    evaluate,
    satisfies,
    step,
    trace,
    unfold_history,
)
from sitcalc.oracle import TruthTable, truth_table
from sitcalc.parser import parse_formula, parse_program, parse_world, pretty_print
from tests.generators import generator_context, semantics_space, well_typed_formulas, worlds


@pytest.fixture(scope="module")
def corpus():
    return parse_program(resources.files("sitcalc.corpus").joinpath("robot.sitc").read_text())


@pytest.fixture(scope="module")
def context(corpus):
    return corpus.context()


def drop(r="r", x="x"):
    return FunFluent("drop", Seq((Var(r), Var(x))))


def test_do_contracts_to_history():
    result = step(Do(drop(), Var("s0")))
    assert isinstance(result, Stepped)
    assert result.rules == ("E-Do",)
    assert result.next == SituationValue(Var("s0"), (drop(),))


def test_histories_grow():
    result = evaluate(Do(drop("r", "c"), Do(drop(), Var("s0"))))
    assert isinstance(result, IsValue)
    assert pretty_print(result.value) == "s0 . drop(r, x) . drop(r, c)"
    assert unfold_history(result.value) == Do(drop("r", "c"), SituationValue(Var("s0"), (drop(),)))


def test_poss_contracts_to_superset(context):
    result = step(parse_formula("poss(pickup(r, x), s)", context))
    assert result.rules == ("E-Poss",)
    assert isinstance(result.next, Supset)
    assert pretty_print(result.next) == "s => s . pickup(r, x)"


def test_congruence_rules(context):
    result = step(parse_formula("~do(drop(r, x), s)", context))
    assert result.rules == ("E-Neg", "E-Do")
    result = step(parse_formula("fragile(x, s) /\\ do(drop(r, x), s)", context))
    assert result.rules == ("E-Conj", "E-Do")
    result = step(parse_formula("(exists z: Object) holding(r, z, do(drop(r, x), s))", context))
    assert result.rules == ("E-Est", "E-Do")
    assert isinstance(result.next, QuantF)


def test_reduction_is_leftmost(context):
    node = parse_formula("do(drop(r, x), s) \\/ do(drop(r, c), s)", context)
    first = step(node)
    assert first.rules == ("E-Disj", "E-Do")
    assert pretty_print(first.next) == "s . drop(r, x) \\/ do(drop(r, c), s)"


def test_values(context):
    for text in ("x", "true", "fragile(x, s)", "~heavy(x)", "x => c"):
        node = parse_formula(text, context)
        assert step(node) == IsValue(node), text


def test_drop_fragile_evaluates(corpus, context):
    formula = corpus.statements[0].formula
    steps = trace(formula)
    assert [s.rules for s in steps.steps] == [("E-Spt", "E-Do")]
    assert isinstance(steps.outcome, IsValue)
    assert pretty_print(steps.outcome.value) == "fragile(x, s) => broken(x, s . drop(r, x))"
    report = check_preservation(context, formula)
    assert report.preserved


def test_equation_is_stuck(corpus, context):
    outcome = evaluate(corpus.statements[1].formula)
    assert isinstance(outcome, Stuck)
    assert outcome.reason == "no evaluation rule reduces under '='"
    report = check_progress(context, corpus.statements[1].formula)
    assert report.stuck and not report.wellTyped
    assert report.progressed


def test_equation_between_values(context):
    node = parse_formula("heavy(x) = drop(r, x)", context)
    assert step(node) == IsValue(node)


def test_well_typed_equation_over_reducible_sides_is_reported(context):
    node = parse_formula("do(drop(r, x), s) = do(drop(r, x), s)", context)
    report = check_progress(context, node)
    assert report.wellTyped and report.stuck
    assert not report.progressed
    assert report.violations[0].index == 0


def test_ill_sorted_do_is_stuck(context):
    outcome = evaluate(parse_formula("do(fragile(x, s), s)", context))
    assert isinstance(outcome, Stuck)
    assert outcome.reason.startswith("operand of do is not an action")
    report = check_preservation(context, parse_formula("do(fragile(x, s), s)", context))
    assert report.error is not None and report.error.code == "E008"
    assert not report.preserved and report.trace is None


def test_custom_transition_policy():
    def named(situation, action):
        return Var("s1")

    result = step(Do(drop(), Var("s0")), TransitionPolicy(named))
    assert result.next == Var("s1")


def test_fuel():
    def unending(situation, action):
        return Do(action, situation)

    outcome = evaluate(Do(drop(), Var("s0")), TransitionPolicy(unending), fuel=5)
    assert isinstance(outcome, OutOfFuel)
    assert outcome.steps == 5
    assert isinstance(evaluate(Literal("unit"), fuel=1), IsValue)
    with pytest.raises(ValueError):
        trace(Literal("unit"), fuel=0)


def test_preservation_and_progress_on_random_formulas():
    context = generator_context()
    formulas = well_typed_formulas(1000, seed=11)
    assert sum(isinstance(formula, Eq) for formula in formulas) > 50
    for formula in formulas:
        preservation = check_preservation(context, formula)
        assert preservation.preserved, (pretty_print(formula), preservation.violations)
        assert isinstance(preservation.trace.outcome, IsValue), pretty_print(formula)
        progress = check_progress(context, formula)
        assert progress.wellTyped and not progress.stuck, pretty_print(formula)


@pytest.mark.parametrize("seed", [0, 5, 23])
def test_steps_are_bounded_by_size(corpus, seed):
    formulas = [statement.formula for statement in corpus.statements] + well_typed_formulas(300, seed=seed)
    for formula in formulas:
        bound = size(formula) + sum(isinstance(node, Poss) for node in walk(formula)) + 1
        assert len(trace(formula).steps) <= bound, pretty_print(formula)


@pytest.fixture(scope="module")
def robot():
    return parse_world(resources.files("sitcalc.corpus").joinpath("robot.world").read_text())


def test_satisfaction_clauses(robot, context):
    def holds(text):
        return satisfies(robot, parse_formula(text, context))

    assert holds("fragile(x, s0)") and not holds("fragile(x, s2)")
    assert holds("broken(x, s1)")
    assert holds("drop(r, x)") and not holds("drop(x, r)")
    assert not holds("heavy(x)") and holds("~heavy(x)")
    assert holds("fragile(x, s0) /\\ ~broken(x, s0)")
    assert holds("broken(x, s0) => broken(x, s1)")
    assert holds("do(drop(r, x), s0)")
    assert holds("poss(pickup(r, x), s0)")
    assert not holds("poss(heavy(x), s0)")
    assert holds("(exists z: Situation) broken(x, z)")
    assert not holds("(forall z: Situation) fragile(x, z)")
    assert holds("x /\\ s1") and not holds("q")


def test_quantifiers_range_over_situations(robot):
    universal = QuantF(FORALL, "z", OBJECT, RelFluent("fragile", Seq((Var("x"),)), Var("z")))
    assert not satisfies(robot, universal)
    existential = QuantF(EXISTS, "z", OBJECT, RelFluent("fragile", Seq((Var("x"),)), Var("z")))
    assert satisfies(robot, existential)
    assert satisfies(robot, QuantF(EXISTS, "z", SITUATION, RelFluent("color", Seq((Var("x"),)), Var("z"))))


def test_uninterpreted_constructs(robot, corpus, context):
    with pytest.raises(SatisfactionError) as info:
        satisfies(robot, corpus.statements[1].formula)
    assert info.value.code == "E010"
    with pytest.raises(SatisfactionError, match="paint"):
        satisfies(World(["x", "c"], ["s0"]), parse_formula("paint(x, c)", context))


def test_corpus_statements_in_robot_world(robot, corpus):
    first, _, third = (s.formula for s in corpus.statements)
    assert satisfies(robot, first) is True
    assert satisfies(robot, third) == truth_table(robot, third)


def test_agrees_with_truth_table():
    formulas = semantics_space()
    tables = {}
    checked = 0
    for world in worlds():
        for index, formula in enumerate(formulas):
            key = (index, world.situations)
            if key not in tables:
                tables[key] = TruthTable(formula, world.situations)
            assert satisfies(world, formula) == tables[key](world), (world, pretty_print(formula))
            checked += 1
    # every world with up to three instances and three situations
    assert checked == 5036 * len(formulas)


def test_truth_table_rejects_other_situations():
    table = TruthTable(Var("x"), ["s0", "s1"])
    assert table(World(["x"], ["s0", "s1"]))
    assert not table(World(["r"], ["s0", "s1"]))
    with pytest.raises(ValueError):
        table(World(["x"], ["s0"]))
