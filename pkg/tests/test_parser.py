from importlib import resources

import pytest

from sitcalc.core import (
    ACTION,
    OBJECT,
    SITUATION,
    Atom,
    Conj,
    ConjF,
    Do,
    Eq,
    Forall,
    FunFluent,
    Neg,
    NegB,
    NegF,
    Poss,
    QuantF,
    RelFluent,
    SupsetF,
    Var,
)
from sitcalc.parser import (
    ParseError,
    parse_formula,
    parse_program,
    parse_world,
    pretty_print,
    tokenize,
)
from tests.generators import FormulaGenerator, generator_context


def corpus_text(name="robot.sitc"):
    return resources.files("sitcalc.corpus").joinpath(name).read_text()


@pytest.fixture
def corpus():
    return parse_program(corpus_text())


def test_tokenize():
    tokens = tokenize("stmt a: ~holding(r, z, s) /\\ poss(pickup(r,x), s); # trailing comment")
    kinds = [t.kind for t in tokens]
    assert kinds[:4] == ["stmt", "ident", ":", "~"]
    assert "/\\" in kinds and "poss" in kinds
    assert kinds[-1] == ";"
    first = tokens[0]
    assert (first.text, first.span.start, first.span.end, first.span.line, first.span.column) == ("stmt", 0, 4, 1, 1)


def test_tokenize_keywords_inside_names():
    assert [t.kind for t in tokenize("done variable")] == ["ident", "ident"]


def test_tokenize_rejects_unknown_characters():
    with pytest.raises(ParseError) as info:
        tokenize("x @ y")
    assert info.value.code == "E101"
    assert info.value.span.start == 2


def test_corpus_declarations(corpus):
    kinds = {d.name: d.kind for d in corpus.declarations}
    assert kinds["fragile"] == "rel" and kinds["drop"] == "fun" and kinds["s"] == "var"
    context = corpus.context()
    assert context.lookup("s0") == {SITUATION}
    assert context.lookup("x") == {OBJECT}
    assert context.fluent("holding").arity == 3
    assert [s.name for s in corpus.statements] == ["dropFragile", "paintColor", "pickupPossible"]
    assert [s.index for s in corpus.statements] == [0, 1, 2]


def test_corpus_trees(corpus):
    first, second, third = (s.formula for s in corpus.statements)
    assert isinstance(first, SupsetF)
    assert first.left == Atom(RelFluent("fragile", first.left.bt.args, Var("s")))
    assert isinstance(first.right.bt.sit, Do)
    assert isinstance(second, Eq)
    assert second.right == Var("c")
    assert isinstance(third, SupsetF)
    assert isinstance(third.left, Atom) and isinstance(third.left.bt, Poss)
    assert isinstance(third.right, ConjF)
    quantified = third.right.left.left
    assert isinstance(quantified, QuantF)
    assert quantified.kind == "forall" and quantified.type == OBJECT
    assert quantified.body == NegF(Atom(RelFluent("holding", quantified.body.operand.bt.args, Var("s"))))
    heavy = third.right.left.right
    assert heavy == NegF(Atom(FunFluent("heavy", heavy.operand.bt.args)))


def test_corpus_round_trip(corpus):
    assert parse_program(pretty_print(corpus)) == corpus


def test_spans_point_into_source(corpus):
    source = corpus.source
    second = corpus.statements[1]
    span = second.formula.right.span
    assert source[span.start : span.end] == "c"
    heavy = corpus.statements[2].formula.right.left.right.operand.bt
    assert source[heavy.span.start : heavy.span.end] == "heavy(x)"
    assert source[second.span.start : second.span.end].startswith("stmt paintColor")


def test_precedence():
    node = parse_formula("a /\\ b \\/ c => d = e")
    assert isinstance(node, Eq)
    assert pretty_print(node) == "a /\\ b \\/ c => d = e"
    assert pretty_print(parse_formula("a => b => c")) == "a => b => c"
    assert pretty_print(parse_formula("(a => b) => c")) == "(a => b) => c"
    assert parse_formula("~a /\\ b") == Conj(Neg(Var("a")), Var("b"))


def test_layers_follow_operands():
    context = generator_context()
    assert isinstance(parse_formula("x /\\ y", context), Conj)
    assert isinstance(parse_formula("x /\\ heavy(x)", context), ConjF)
    assert parse_formula("do(~heavy(x), s)", context) == Atom(Do(NegB(FunFluent("heavy", parse_formula("heavy(x)", context).bt.args)), Var("s")))
    assert isinstance(parse_formula("(forall z: Object | Action) z", context), Forall)
    assert isinstance(parse_formula("(exists z: Object) fragile(z, s)", context), QuantF)


def test_fluent_kind_from_declarations():
    context = generator_context()
    assert isinstance(parse_formula("fragile(x, s)", context).bt, RelFluent)
    assert isinstance(parse_formula("fragile(x, s)").bt, FunFluent)
    # one argument leaves no room for a situation
    assert isinstance(parse_formula("fragile(x)", context).bt, FunFluent)


def test_syntax_error_location():
    source = "rel fragile(Object);\nstmt bad: fragile(x,;"
    with pytest.raises(ParseError) as info:
        parse_program(source)
    error = info.value
    assert error.code == "E101"
    assert source[error.span.start] == ";"
    assert (error.span.line, error.span.column) == (2, 21)
    assert "ident" in error.expected


def test_unexpected_end_of_input():
    with pytest.raises(ParseError, match="end of input") as info:
        parse_program("stmt a: x /\\")
    assert info.value.span.start == len("stmt a: x /\\")


def test_unknown_type_and_duplicate_declaration():
    with pytest.raises(ParseError, match="unknown type"):
        parse_program("var x: Thing;")
    with pytest.raises(ParseError, match="declared twice"):
        parse_program("var x: Object; rel x(Object);")


def test_declarations_only_and_empty_programs():
    assert parse_program("").statements == ()
    program = parse_program("var x: Object | Action;")
    assert program.statements == ()
    assert program.context().lookup("x") == {OBJECT, ACTION}


def test_equations_only_at_statement_level():
    declarations = "var x: Object; var c: Object; var s: Situation; rel fragile(Object); "
    assert isinstance(parse_program(declarations + "stmt a: fragile(x, s) = c;").statements[0].formula, Eq)
    for body in ("fragile(x = c, s)", "~(x = c) /\\ (x = c)", "do(x = c, s)", "(x = c)"):
        with pytest.raises(ParseError) as info:
            parse_program(declarations + f"stmt a: {body};")
        assert info.value.code == "E101", body


def test_generated_round_trip():
    generator = FormulaGenerator(seed=7)
    context = generator_context()
    for _ in range(1000):
        node = generator.anyFormula()
        text = pretty_print(node)
        assert parse_formula(text, context) == node, text


def test_world_file():
    world = parse_world(corpus_text("robot.world"))
    assert world.situations == ("s0", "s1", "s2")
    assert world.holdsRelational("fragile", ("x",), "s0")
    assert world.holdsFunctional("drop", ("r", "x"))
    assert world.interprets("heavy") and not world.holdsFunctional("heavy", ("x",))


def test_malformed_world_files():
    with pytest.raises(ParseError):
        parse_world("instances x; situations s0; rel fragile: (y, s0);")
    with pytest.raises(ParseError):
        parse_world("instances x; situations s0; rel fragile: (x);")
    with pytest.raises(ParseError):
        parse_world("instances x situations s0;")


def test_world_entry_errors_point_at_the_entry():
    source = "instances x; situations s0; rel fragile: (x, s0), (y, s0);"
    with pytest.raises(ParseError) as info:
        parse_world(source)
    span = info.value.span
    assert span is not None
    assert source[span.start : span.end] == "(y, s0)"
    source = "instances x; situations s0;\nrel fragile: (x);"
    with pytest.raises(ParseError) as info:
        parse_world(source)
    assert (info.value.span.line, source[info.value.span.start : info.value.span.end]) == (2, "(x)")
    world = parse_world("instances x; situations s0; rel fragile: ;")
    assert world.interprets("fragile")
