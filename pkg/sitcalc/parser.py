"""Module containing the concrete syntax: lexer, parser, pretty-printer and world-file reader.

The grammar is compiled once with Lark (LALR, basic lexer). Declarations must
precede statements, so declarations are read first and decide whether a call
``name(...)`` denotes a relational fluent (last argument is the situation) or
a functional fluent.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from lark import Lark, Token as LarkToken, Transformer, Tree, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedInput, UnexpectedToken, VisitError

from sitcalc.core import (
    BASE_TYPES,
    EXISTS,
    FORALL,
    INITIAL_SITUATION,
    SITUATION,
    Arrow,
    Atom,
    Conj,
    ConjF,
    Disj,
    DisjF,
    Do,
    Eq,
    Exists,
    Forall,
    FunFluent,
    Literal,
    Neg,
    NegB,
    NegF,
    Node,
    Poss,
    QuantF,
    RelFluent,
    Seq,
    SitCalcError,
    SituationValue,
    Span,
    Supset,
    SupsetF,
    Type,
    TypingContext,
    Var,
    World,
    functional_signature,
    is_behavioral,
    is_term,
    relational_signature,
)

logger = logging.getLogger(__name__)

__all__ = [
    "GRAMMAR",
    "WORLD_GRAMMAR",
    "ParseError",
    "Token",
    "Declaration",
    "Statement",
    "SourceProgram",
    "Span",
    "tokenize",
    "parse_program",
    "parse_formula",
    "parse_world",
    "pretty_print",
    "as_formula",
    "as_behavioral",
    "make_neg",
    "make_binary",
    "make_quantifier",
]

GRAMMAR = r"""
    start: declaration* statement*
    formula_start: formula

    declaration: _VAR NAME _COLON typeset _SEMI            -> var_decl
               | _REL NAME _LPAR typelist _RPAR _SEMI      -> rel_decl
               | _FUN NAME _LPAR typelist _RPAR _SEMI      -> fun_decl

    typeset: NAME (_BAR NAME)*
    typelist: NAME (_COMMA NAME)*

    statement: _STMT NAME _COLON formula _SEMI

    ?formula: implication
            | implication _EQ implication                  -> equation
    ?implication: disjunction
                | disjunction _IMPLIES implication         -> implies
    ?disjunction: conjunction
                | disjunction _OR conjunction              -> disj
    ?conjunction: unary
                | conjunction _AND unary                   -> conj
    ?unary: primary
          | _NOT unary                                     -> neg
          | quantifier unary                               -> quantified
    quantifier: _LPAR (FORALL | EXISTS) NAME _COLON typeset _RPAR
    ?primary: NAME                                         -> var
            | NAME _LPAR arguments _RPAR                   -> call
            | _DO _LPAR implication _COMMA implication _RPAR -> do
            | _POSS _LPAR implication _COMMA implication _RPAR -> poss
            | (TRUE | FALSE | UNIT)                        -> literal
            | _LPAR implication _RPAR
    arguments: implication (_COMMA implication)*

    _VAR: "var"
    _REL: "rel"
    _FUN: "fun"
    _STMT: "stmt"
    _DO: "do"
    _POSS: "poss"
    FORALL: "forall"
    EXISTS: "exists"
    TRUE: "true"
    FALSE: "false"
    UNIT: "unit"
    _NOT: "~"
    _AND: "/\\"
    _OR: "\\/"
    _IMPLIES: "=>"
    _EQ: "="
    _COLON: ":"
    _LPAR: "("
    _RPAR: ")"
    _COMMA: ","
    _SEMI: ";"
    _BAR: "|"
    NAME: /[A-Za-z_][A-Za-z0-9_]*/
    COMMENT: /#[^\n]*/

    %import common.WS
    %ignore WS
    %ignore COMMENT
"""

WORLD_GRAMMAR = r"""
    world: item*
    ?item: "instances" names ";"          -> instances
         | "situations" names ";"         -> situations
         | "rel" NAME ":" [entries] ";"   -> relation
         | "fun" NAME ":" [entries] ";"   -> function
    entries: entry ("," entry)*
    entry: "(" names ")"
    names: NAME ("," NAME)*

    NAME: /[A-Za-z_][A-Za-z0-9_]*/
    COMMENT: /#[^\n]*/

    %import common.WS
    %ignore WS
    %ignore COMMENT
"""

_LARK = Lark(GRAMMAR, start=["start", "formula_start"], parser="lalr", lexer="basic", propagate_positions=True)
_WORLD_LARK = Lark(WORLD_GRAMMAR, start="world", parser="lalr", lexer="basic", propagate_positions=True)

# Display text of every terminal, used for token kinds and expected-token sets.
_TERMINAL_TEXT = {
    "_VAR": "var",
    "_REL": "rel",
    "_FUN": "fun",
    "_STMT": "stmt",
    "_DO": "do",
    "_POSS": "poss",
    "FORALL": "forall",
    "EXISTS": "exists",
    "TRUE": "true",
    "FALSE": "false",
    "UNIT": "unit",
    "_NOT": "~",
    "_AND": "/\\",
    "_OR": "\\/",
    "_IMPLIES": "=>",
    "_EQ": "=",
    "_COLON": ":",
    "_LPAR": "(",
    "_RPAR": ")",
    "_COMMA": ",",
    "_SEMI": ";",
    "_BAR": "|",
    "NAME": "ident",
    "$END": "end of input",
}


class ParseError(SitCalcError):
    """Lexical or syntactic error (code E101) with the set of tokens that would have been accepted."""

    def __init__(self, message: str, span: Optional[Span] = None, expected: Iterable[str] = ()):
        """Initialization method.

        Args:
            message (str): Description of the problem
            span (:py:class:`Span`, optional): Location of the offending text
            expected (iterable of str): Display texts of the acceptable tokens
        """
        super().__init__("E101", message, span)
        self.expected: FrozenSet[str] = frozenset(expected)


@dataclass(frozen=True)
class Token:
    """A lexical token; ``kind`` is ``"ident"`` for identifiers and the token text otherwise."""

    kind: str
    text: str
    span: Span


@dataclass(frozen=True)
class Declaration:
    """A variable binding or fluent signature declaration.

    For ``rel`` and ``fun`` declarations ``types`` lists the object parameters
    only; the situation parameter and the result type are implied.
    """

    kind: str
    name: str
    types: Tuple[Type, ...]
    span: Optional[Span] = field(default=None, compare=False, repr=False)

    @property
    def signature(self) -> Optional[Arrow]:
        """Fluent signature of a ``rel`` or ``fun`` declaration, None for variables."""
        if self.kind == "rel":
            return relational_signature(self.types)
        if self.kind == "fun":
            return functional_signature(self.types)
        return None


@dataclass(frozen=True)
class Statement:
    """A named top-level formula; ``index`` is its stable position in the program."""

    name: str
    formula: Node
    index: int
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SourceProgram:
    """Declarations followed by statements, together with the text they were read from."""

    declarations: Tuple[Declaration, ...]
    statements: Tuple[Statement, ...]
    source: str = field(default="", compare=False, repr=False)

    def context(self) -> TypingContext:
        """Typing context populated by the declarations, including the initial situation ``s0``."""
        variables = {INITIAL_SITUATION: {SITUATION}}
        fluents = {}
        for declaration in self.declarations:
            if declaration.kind == "var":
                variables[declaration.name] = set(declaration.types)
            else:
                fluents[declaration.name] = declaration.signature
        return TypingContext(variables, fluents)


# ----------------------------------------------------------------------
# Layer-aware constructors
# ----------------------------------------------------------------------
# The parser and the random generators build trees only through these, so the
# layer a connective lands in is a function of its operands.


def as_formula(node: Node) -> Node:
    """Wrap a behavioral term in :py:class:`Atom`; other nodes are returned unchanged."""
    if is_behavioral(node):
        return Atom(node, span=node.span)
    return node


def as_behavioral(node: Node) -> Node:
    """Turn an atom, or a negated atom, back into a behavioral term where possible."""
    if isinstance(node, Atom):
        return node.bt
    if isinstance(node, NegF):
        inner = as_behavioral(node.operand)
        if is_behavioral(inner):
            return NegB(inner, span=node.span)
    return node


def make_neg(operand: Node, span: Optional[Span] = None) -> Node:
    """Negation in the layer of its operand."""
    if is_term(operand):
        return Neg(operand, span=span)
    return NegF(as_formula(operand), span=span)


_BINARY = {
    "=>": (Supset, SupsetF),
    "/\\": (Conj, ConjF),
    "\\/": (Disj, DisjF),
}


def make_binary(operator: str, left: Node, right: Node, span: Optional[Span] = None) -> Node:
    """Connective ``left operator right``; it stays in the term layer only when both operands are terms.

    Example:
        >>> make_binary("/\\\\", Var("a"), Var("b"))
        Conj(left=Var(name='a'), right=Var(name='b'))
    """
    term_node, formula_node = _BINARY[operator]
    if is_term(left) and is_term(right):
        return term_node(left, right, span=span)
    return formula_node(as_formula(left), as_formula(right), span=span)


def make_quantifier(kind: str, var: str, types: Sequence[Type], body: Node, span: Optional[Span] = None) -> Node:
    """Quantifier node in the layer its type list and body call for.

    One declared type over a formula body gives a formula-layer
    :py:class:`QuantF`; anything else a term-layer :py:class:`Forall` or
    :py:class:`Exists`.
    """
    types = tuple(types)
    if len(types) == 1 and not is_term(body):
        return QuantF(kind, var, types[0], as_formula(body), span=span)
    quantifier = Forall if kind == FORALL else Exists
    return quantifier(var, types, as_formula(body), span=span)


# ----------------------------------------------------------------------
# Lexing and parsing
# ----------------------------------------------------------------------


def _token_span(token: LarkToken) -> Span:
    start = token.start_pos or 0
    end = token.end_pos if token.end_pos is not None else start + len(token)
    return Span(
        start,
        end,
        token.line or 1,
        token.column or 1,
        token.end_line or token.line or 1,
        token.end_column or token.column or 1,
    )


def _meta_span(meta) -> Optional[Span]:
    if getattr(meta, "empty", True):
        return None
    return Span(meta.start_pos, meta.end_pos, meta.line, meta.column, meta.end_line, meta.end_column)


def _point_span(source: str, pos: int, line: int, column: int) -> Span:
    end = min(pos + 1, len(source))
    pos = min(pos, end)
    return Span(pos, end, line, column, line, column + (end - pos))


def _convert_error(source: str, error: UnexpectedInput) -> ParseError:
    if isinstance(error, UnexpectedCharacters):
        char = source[error.pos_in_stream] if error.pos_in_stream < len(source) else ""
        span = _point_span(source, error.pos_in_stream, error.line, error.column)
        expected = {_TERMINAL_TEXT.get(name, name) for name in (error.allowed or ())}
        return ParseError(f"unexpected character {char!r}", span, expected)
    if isinstance(error, UnexpectedToken):
        token = error.token
        expected = {_TERMINAL_TEXT.get(name, name) for name in error.expected}
        if token.type == "$END" or token.start_pos is None:
            pos = len(source)
            line = source.count("\n") + 1
            column = len(source) - (source.rfind("\n") + 1) + 1
            span = Span(pos, pos, line, column, line, column)
            return ParseError("unexpected end of input", span, expected)
        return ParseError(f"unexpected token {str(token)!r}", _token_span(token), expected)
    pos = getattr(error, "pos_in_stream", None) or 0
    return ParseError(str(error), _point_span(source, pos, getattr(error, "line", 1), getattr(error, "column", 1)))


def tokenize(source: str) -> List[Token]:
    """Split ``source`` into tokens; whitespace and ``#`` comments are skipped.

    Example:
        >>> [t.kind for t in tokenize("do(drop(r,x),s)")]
        ['do', '(', 'ident', '(', 'ident', ',', 'ident', ')', ',', 'ident', ')']
        >>> tokenize("")
        []

    Raises:
        ParseError: E101 at the first character that starts no token
    """
    try:
        tokens = list(_LARK.lex(source))
    except UnexpectedInput as error:
        raise _convert_error(source, error) from None
    kinds = ["ident" if t.type == "NAME" else _TERMINAL_TEXT.get(t.type, str(t)) for t in tokens]
    return [Token(kind, str(t), _token_span(t)) for kind, t in zip(kinds, tokens)]


def _type_named(token: LarkToken) -> Type:
    try:
        return BASE_TYPES[str(token)]
    except KeyError:
        raise ParseError(f"unknown type {str(token)!r}", _token_span(token), BASE_TYPES) from None


class _NodeBuilder(Transformer):
    """Turns statement parse trees into syntax tree nodes."""

    def __init__(self, relational: FrozenSet[str]):
        super().__init__()
        self._relational = relational

    def typeset(self, children):
        return tuple(_type_named(token) for token in children)

    @v_args(meta=True)
    def var(self, meta, children):
        return Var(str(children[0]), span=_meta_span(meta))

    @v_args(meta=True)
    def literal(self, meta, children):
        return Literal(str(children[0]), span=_meta_span(meta))

    def arguments(self, children):
        return list(children)

    @v_args(meta=True)
    def call(self, meta, children):
        name, args = str(children[0]), children[1]
        span = _meta_span(meta)
        if name in self._relational and len(args) >= 2:
            return RelFluent(name, _sequence(args[:-1]), args[-1], span=span)
        return FunFluent(name, _sequence(args), span=span)

    @v_args(meta=True)
    def do(self, meta, children):
        return Do(as_behavioral(children[0]), children[1], span=_meta_span(meta))

    @v_args(meta=True)
    def poss(self, meta, children):
        return Poss(as_behavioral(children[0]), children[1], span=_meta_span(meta))

    @v_args(meta=True)
    def neg(self, meta, children):
        return make_neg(children[0], span=_meta_span(meta))

    @v_args(meta=True)
    def conj(self, meta, children):
        return make_binary("/\\", children[0], children[1], span=_meta_span(meta))

    @v_args(meta=True)
    def disj(self, meta, children):
        return make_binary("\\/", children[0], children[1], span=_meta_span(meta))

    @v_args(meta=True)
    def implies(self, meta, children):
        return make_binary("=>", children[0], children[1], span=_meta_span(meta))

    @v_args(meta=True)
    def equation(self, meta, children):
        return Eq(as_formula(children[0]), as_formula(children[1]), span=_meta_span(meta))

    def quantifier(self, children):
        kind, var, types = children
        return (str(kind), str(var), types)

    @v_args(meta=True)
    def quantified(self, meta, children):
        (kind, var, types), body = children
        return make_quantifier(kind, var, types, body, span=_meta_span(meta))


def _sequence(items: Sequence[Node]) -> Seq:
    spans = [item.span for item in items if item.span is not None]
    span = None
    if spans:
        first, last = spans[0], spans[-1]
        span = Span(first.start, last.end, first.line, first.column, last.end_line, last.end_column)
    return Seq(tuple(items), span=span)


def _declaration(tree: Tree) -> Declaration:
    name_token = tree.children[0]
    types = tuple(_type_named(token) for token in tree.children[1].children)
    kind = {"var_decl": "var", "rel_decl": "rel", "fun_decl": "fun"}[tree.data]
    return Declaration(kind, str(name_token), types, span=_meta_span(tree.meta))


def _build(builder: _NodeBuilder, tree, source: str) -> Node:
    try:
        return builder.transform(tree)
    except VisitError as error:
        if isinstance(error.orig_exc, SitCalcError):
            raise error.orig_exc from None
        raise


def parse_program(source: str) -> SourceProgram:
    """Parse a ``.sitc`` source text.

    Operator precedence, tightest first: ``~`` and quantifier prefixes, ``/\\``,
    ``\\/``, ``=>``, ``=``. ``=>`` associates to the right, ``/\\`` and ``\\/``
    to the left.

    Example:
        >>> program = parse_program("rel fragile(Object); var x: Object; stmt a: fragile(x, s0);")
        >>> program.statements[0].formula
        Atom(bt=RelFluent(name='fragile', args=Seq(items=(Var(name='x'),)), sit=Var(name='s0')))

    Raises:
        ParseError: E101 with span and expected-token set on malformed input or duplicated declarations
    """
    try:
        tree = _LARK.parse(source, start="start")
    except UnexpectedInput as error:
        raise _convert_error(source, error) from None
    declarations = []
    seen: Dict[str, Declaration] = {}
    statement_trees = []
    for child in tree.children:
        if child.data == "statement":
            statement_trees.append(child)
            continue
        declaration = _declaration(child)
        if declaration.name in seen:
            raise ParseError(f"{declaration.name!r} is declared twice", declaration.span)
        seen[declaration.name] = declaration
        declarations.append(declaration)
    relational = frozenset(d.name for d in declarations if d.kind == "rel")
    builder = _NodeBuilder(relational)
    statements = []
    for index, child in enumerate(statement_trees):
        name = str(child.children[0])
        formula = as_formula(_build(builder, child.children[1], source))
        statements.append(Statement(name, formula, index, span=_meta_span(child.meta)))
    logger.debug("parsed %d declarations and %d statements", len(declarations), len(statements))
    return SourceProgram(tuple(declarations), tuple(statements), source)


def parse_formula(text: str, context: Union[TypingContext, Mapping[str, Arrow], None] = None) -> Node:
    """Parse a single formula; ``context`` tells which fluent names are relational.

    Example:
        >>> pretty_print(parse_formula("a /\\\\ (b \\\\/ c)"))
        'a /\\\\ (b \\\\/ c)'
    """
    if isinstance(context, TypingContext):
        fluents = context.fluents
    else:
        fluents = context or {}
    relational = frozenset(name for name, signature in fluents.items() if signature.isRelational)
    try:
        tree = _LARK.parse(text, start="formula_start")
    except UnexpectedInput as error:
        raise _convert_error(text, error) from None
    return as_formula(_build(_NodeBuilder(relational), tree.children[0], text))


# ----------------------------------------------------------------------
# Pretty-printing
# ----------------------------------------------------------------------

_EQ_LEVEL, _IMPLIES_LEVEL, _DISJ_LEVEL, _CONJ_LEVEL, _UNARY_LEVEL, _ATOM_LEVEL = 1, 2, 3, 4, 5, 6

_LEVELS = {
    Eq: (_EQ_LEVEL, "=", _IMPLIES_LEVEL, _IMPLIES_LEVEL),
    Supset: (_IMPLIES_LEVEL, "=>", _DISJ_LEVEL, _IMPLIES_LEVEL),
    SupsetF: (_IMPLIES_LEVEL, "=>", _DISJ_LEVEL, _IMPLIES_LEVEL),
    Disj: (_DISJ_LEVEL, "\\/", _DISJ_LEVEL, _CONJ_LEVEL),
    DisjF: (_DISJ_LEVEL, "\\/", _DISJ_LEVEL, _CONJ_LEVEL),
    Conj: (_CONJ_LEVEL, "/\\", _CONJ_LEVEL, _UNARY_LEVEL),
    ConjF: (_CONJ_LEVEL, "/\\", _CONJ_LEVEL, _UNARY_LEVEL),
}


def _print(node: Node, minimum: int = 0) -> str:
    text, level = _render(node)
    return f"({text})" if level < minimum else text


def _render(node: Node) -> Tuple[str, int]:
    if isinstance(node, Var):
        return node.name, _ATOM_LEVEL
    if isinstance(node, Literal):
        return node.value, _ATOM_LEVEL
    if isinstance(node, Atom):
        return _render(node.bt)
    if isinstance(node, (Neg, NegB, NegF)):
        return "~" + _print(node.operand, _UNARY_LEVEL), _UNARY_LEVEL
    if type(node) in _LEVELS:
        level, operator, left_min, right_min = _LEVELS[type(node)]
        return f"{_print(node.left, left_min)} {operator} {_print(node.right, right_min)}", level
    if isinstance(node, QuantF):
        return f"({node.kind} {node.var}: {node.type}) {_print(node.body, _UNARY_LEVEL)}", _UNARY_LEVEL
    if isinstance(node, (Forall, Exists)):
        kind = FORALL if isinstance(node, Forall) else EXISTS
        types = " | ".join(str(t) for t in node.types)
        return f"({kind} {node.var}: {types}) {_print(node.body, _UNARY_LEVEL)}", _UNARY_LEVEL
    if isinstance(node, RelFluent):
        args = [_print(item) for item in node.args.items] + [_print(node.sit)]
        return f"{node.name}({', '.join(args)})", _ATOM_LEVEL
    if isinstance(node, FunFluent):
        return f"{node.name}({', '.join(_print(item) for item in node.args.items)})", _ATOM_LEVEL
    if isinstance(node, Do):
        return f"do({_print(node.operand)}, {_print(node.sit)})", _ATOM_LEVEL
    if isinstance(node, Poss):
        return f"poss({_print(node.operand)}, {_print(node.sit)})", _ATOM_LEVEL
    if isinstance(node, Seq):
        return ", ".join(_print(item) for item in node.items), 0
    if isinstance(node, SituationValue):
        parts = [_print(node.root, _ATOM_LEVEL)] + [_print(action, _ATOM_LEVEL) for action in node.history]
        return " . ".join(parts), _ATOM_LEVEL
    msg = f"Cannot print {node!r}"
    raise TypeError(msg)


def _print_declaration(declaration: Declaration) -> str:
    if declaration.kind == "var":
        return f"var {declaration.name}: {' | '.join(str(t) for t in declaration.types)};"
    return f"{declaration.kind} {declaration.name}({', '.join(str(t) for t in declaration.types)});"


def pretty_print(node: Union[SourceProgram, Statement, Declaration, Node]) -> str:
    """Render a program, statement or tree in canonical concrete syntax.

    Situation histories produced by evaluation print as ``root . a1 . a2``,
    which is not part of the source grammar.

    Example:
        >>> pretty_print(parse_program("fun pickup(Object, Object); stmt a: poss(pickup(r,x),s);"))
        'fun pickup(Object, Object);\\n\\nstmt a: poss(pickup(r, x), s);\\n'
    """
    if isinstance(node, SourceProgram):
        lines = [_print_declaration(d) for d in node.declarations]
        statements = [pretty_print(s) for s in node.statements]
        if lines and statements:
            lines.append("")
        return "\n".join(lines + statements) + "\n"
    if isinstance(node, Statement):
        return f"stmt {node.name}: {_print(node.formula)};"
    if isinstance(node, Declaration):
        return _print_declaration(node)
    return _print(node)


# ----------------------------------------------------------------------
# World files
# ----------------------------------------------------------------------


def parse_world(source: str) -> World:
    """Read a ``.world`` model.

    Example:
        >>> w = parse_world("instances x, r; situations s0, s1; rel fragile: (x, s1); fun drop: (r, x);")
        >>> w.holdsRelational("fragile", ("x",), "s1"), w.holdsFunctional("drop", ("r", "x"))
        (True, True)

    Raises:
        ParseError: E101 on malformed text or entries referring to unknown names
    """
    try:
        tree = _WORLD_LARK.parse(source)
    except UnexpectedInput as error:
        raise _convert_error(source, error) from None
    instances: List[str] = []
    situations: List[str] = []
    relations: Dict[str, set] = {}
    functions: Dict[str, set] = {}
    placed = []
    for item in tree.children:
        if item.data in ("instances", "situations"):
            target = instances if item.data == "instances" else situations
            target.extend(str(name) for name in item.children[0].children)
            continue
        name = str(item.children[0])
        entries = [] if item.children[1] is None else item.children[1].children
        (relations if item.data == "relation" else functions).setdefault(name, set())
        for entry in entries:
            row = tuple(str(n) for n in entry.children[0].children)
            span = _meta_span(entry.meta)
            if item.data == "relation":
                if len(row) < 2:
                    msg = f"entries of relational fluent {name!r} need arguments and a situation"
                    raise ParseError(msg, span)
                relations.setdefault(name, set()).add((row[:-1], row[-1]))
                placed.append((name, row[:-1], row[-1:], span))
            else:
                functions.setdefault(name, set()).add(row)
                placed.append((name, row, (), span))
    members = set(instances) | set(situations)
    for name, args, sit, span in placed:
        if not set(args) <= members or not set(sit) <= set(situations):
            msg = f"entry ({', '.join(args + sit)}) of {name!r} refers to names outside the world"
            raise ParseError(msg, span)
    try:
        return World(instances, situations, relations, functions)
    except ValueError as error:
        raise ParseError(str(error), _meta_span(tree.meta)) from None
