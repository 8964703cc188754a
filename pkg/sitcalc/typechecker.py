"""Module containing the type checker: typing rules, quantifier expansion and derivation trees.

Term-layer nodes are typed with the ``T-*`` rules; the formula layer placed on
top of behavioral terms uses the ``M-*`` meta-checks (same type on both sides
of a superset, uniformly typed conjunctions, type-identical equations).
"""

import logging
from collections import Counter
from dataclasses import dataclass, replace
from itertools import product
from typing import Any, Dict, List, Optional, Sequence, Tuple

from sitcalc.core import (
    ACTION,
    BOOL,
    EXISTS,
    FORALL,
    SITUATION,
    UNIT,
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
    Product,
    QuantF,
    RelFluent,
    Seq,
    SitCalcError,
    SituationValue,
    Supset,
    SupsetF,
    Type,
    TypingContext,
    Var,
    fluent_core,
    is_behavioral,
    is_formula,
    is_term,
    mentions,
)
from sitcalc.parser import make_binary, make_quantifier, pretty_print

logger = logging.getLogger(__name__)

__all__ = [
    "RULES",
    "STANDARD",
    "PAPER_FAITHFUL",
    "Judgment",
    "TypeCheckError",
    "TypeChecker",
    "typecheck",
    "typecheck_term",
    "typecheck_behavioral",
    "typecheck_quantifier",
    "typecheck_formula",
    "expand_typed_quantifier",
    "derivation_tree",
    "rule_trace",
    "check_rule_schema",
]

RULES = frozenset(
    (
        "T-True",
        "T-False",
        "T-Var",
        "T-Unv1",
        "T-Est1",
        "T-Unv2",
        "T-Est2",
        "T-Neg",
        "T-Spt",
        "T-Conj",
        "T-Disj",
        "T-Seq",
        "T-RelFlt",
        "T-FunFlt",
        "T-Do",
        "T-Poss",
        "M-SupsetBT",
        "M-ConjUnit",
        "M-Eq",
    )
)

STANDARD = "standard"  #: Universal expansion is a conjunction, existential a disjunction
PAPER_FAITHFUL = "paper-faithful"  #: Universal expansion is a disjunction, existential a conjunction
QUANTIFIER_MODES = (STANDARD, PAPER_FAITHFUL)


@dataclass(frozen=True)
class Judgment:
    """A typing judgment ``W |- subject : resultType`` concluded by ``rule`` from ``premises``."""

    subject: Node
    resultType: Type
    rule: str
    premises: Tuple["Judgment", ...] = ()


class TypeCheckError(SitCalcError):
    """A failed typing premise, carrying the judgments that were established for the offending parts."""

    def __init__(
        self,
        code: str,
        message: str,
        span=None,
        judgments: Sequence[Judgment] = (),
        position: Optional[int] = None,
        expected: Optional[Type] = None,
        found: Optional[Type] = None,
        subject: Optional[Node] = None,
    ):
        """Initialization method.

        Args:
            code (str): One of ``E001`` ... ``E006``, ``E008``, ``E009``
            message (str): Human readable description
            span (:py:class:`~sitcalc.core.Span`, optional): Location of the offending node
            judgments (sequence of :py:class:`Judgment`): Per-side or per-component judgments
            position (int, optional): 1-based argument position for argument mismatches
            expected (:py:class:`~sitcalc.core.Type`, optional): Type the rule demanded
            found (:py:class:`~sitcalc.core.Type`, optional): Type that was found
            subject (:py:class:`~sitcalc.core.Node`, optional): The node whose check failed
        """
        super().__init__(code, message, span)
        self.judgments = tuple(judgments)
        self.position = position
        self.expected = expected
        self.found = found
        self.subject = subject


def _flatten(node: Node, connective: type) -> List[Node]:
    if isinstance(node, connective):
        return _flatten(node.left, connective) + _flatten(node.right, connective)
    return [node]


Options = Dict[Type, Judgment]


def _ordered(options: Dict[Type, Any]) -> Dict[Type, Any]:
    return {t: options[t] for t in sorted(options, key=str)}


def _first(options: Options) -> Judgment:
    return next(iter(options.values()))


def _single(judgment: Judgment) -> Options:
    return {judgment.resultType: judgment}


class TypeChecker:
    """Checks nodes against one typing context.

    A variable bound to several candidate types may take a different candidate
    at each occurrence; a node is well typed when some choice of candidates
    makes it derivable.

    Example:
        >>> from sitcalc.core import OBJECT
        >>> checker = TypeChecker(TypingContext({"x": {OBJECT}}))
        >>> j = checker.typecheck(Neg(Var("x")))
        >>> j.rule, str(j.resultType)
        ('T-Neg', 'Object')
    """

    def __init__(self, context: TypingContext, mode: str = STANDARD):
        """Initialization method.

        Args:
            context (:py:class:`~sitcalc.core.TypingContext`): Bindings for variables and fluents
            mode (str): Quantifier expansion mode, ``"standard"`` or ``"paper-faithful"``
        """
        if mode not in QUANTIFIER_MODES:
            msg = f"Unknown quantifier mode {mode!r}, expected one of {QUANTIFIER_MODES}"
            raise ValueError(msg)
        self.context = context
        self.mode = mode

    def withContext(self, context: TypingContext) -> "TypeChecker":
        """Return a checker for ``context`` using the same settings."""
        return TypeChecker(context, self.mode)

    # dispatch

    def typecheck(self, node: Node) -> Judgment:
        """Synthesize the type of a node of any layer.

        When candidate choices leave several result types, the first by type
        name is concluded.
        """
        return _first(self.options(node))

    def options(self, node: Node) -> Options:
        """Map every type ``node`` can be given to one derivation concluding it, ordered by type name.

        Example:
            >>> from sitcalc.core import OBJECT, ACTION
            >>> checker = TypeChecker(TypingContext({"u": {OBJECT, ACTION}}))
            >>> [str(t) for t in checker.options(Neg(Var("u")))]
            ['Action', 'Object']

        Raises:
            TypeCheckError: when no choice of candidates makes ``node`` derivable
        """
        if isinstance(node, (Forall, Exists, QuantF)):
            return _single(self.quantifier(node))
        if is_term(node):
            return self._termOptions(node)
        if is_behavioral(node):
            return self._behavioralOptions(node)
        if is_formula(node):
            return self._formulaOptions(node)
        msg = f"Not a syntax tree node: {node!r}"
        raise TypeError(msg)

    def check(self, node: Node, expected: Type, position: Optional[int] = None) -> Judgment:
        """Check ``node`` against ``expected``."""
        options = self.options(node)
        if expected not in options:
            self._mismatch(node, expected, tuple(options), position, tuple(options.values()))
        return options[expected]

    def _mismatch(self, node, expected, found, position, judgments=()):
        found_text = " | ".join(sorted(str(t) for t in found))
        where = f"argument {position} " if position is not None else ""
        msg = f"{where}'{pretty_print(node)}' expects {expected}, found {found_text}"
        single = next(iter(found)) if len(found) == 1 else None
        raise TypeCheckError(
            "E003", msg, node.span, judgments, position=position, expected=expected, found=single, subject=node
        )

    def _shared(self, options: Sequence[Options]) -> Tuple[Dict[Type, Tuple[Judgment, ...]], Tuple[Judgment, ...]]:
        """Type several parts towards one shared type.

        Returns the parts' judgments for every type all of them can take, and
        one judgment per part to report when they share none: the type most
        parts can take, ties going to the first by name.
        """
        common = set(options[0]).intersection(*options[1:])
        shared = _ordered({t: tuple(o[t] for o in options) for t in common})
        votes = Counter(t for o in options for t in o)
        closest = tuple(o[min(o, key=lambda t: (-votes[t], str(t)))] for o in options)
        return shared, closest

    # term layer

    def term(self, node: Node) -> Judgment:
        """Type a term-layer node with the ``T-*`` rules."""
        return _first(self._termOptions(node))

    def _termOptions(self, node: Node) -> Options:
        if isinstance(node, Literal):
            if node.value == "unit":
                return _single(Judgment(node, UNIT, "M-ConjUnit"))
            return _single(Judgment(node, BOOL, "T-True" if node.value == "true" else "T-False"))
        if isinstance(node, Var):
            types = self.context.lookup(node.name)
            if not types:
                msg = f"unbound name '{node.name}'"
                raise TypeCheckError("E001", msg, node.span, subject=node)
            return _ordered({t: Judgment(node, t, "T-Var") for t in types})
        if isinstance(node, Neg):
            return {t: Judgment(node, t, "T-Neg", (j,)) for t, j in self.options(node.operand).items()}
        if isinstance(node, (Conj, Disj, Supset)):
            shared, (left, right) = self._shared([self.options(node.left), self.options(node.right)])
            if not shared:
                symbol = {Conj: "/\\", Disj: "\\/", Supset: "=>"}[type(node)]
                msg = f"operands of '{symbol}' differ: {left.resultType} vs {right.resultType}"
                raise TypeCheckError("E003", msg, node.span, (left, right), subject=node)
            if isinstance(node, Supset):
                return {UNIT: Judgment(node, UNIT, "T-Spt", next(iter(shared.values())))}
            rule = "T-Conj" if isinstance(node, Conj) else "T-Disj"
            return {t: Judgment(node, t, rule, sides) for t, sides in shared.items()}
        if isinstance(node, Seq):
            results = {}
            for items in product(*(self.options(item).values() for item in node.items)):
                result = Product(tuple(j.resultType for j in items))
                results.setdefault(result, Judgment(node, result, "T-Seq", items))
            return _ordered(results)
        if isinstance(node, SituationValue):
            judgment = self.check(node.root, SITUATION)
            for count, action in enumerate(node.history, start=1):
                performed = self._action(action, "do")
                prefix = SituationValue(node.root, node.history[:count], span=node.span)
                judgment = Judgment(prefix, SITUATION, "T-Do", (performed, judgment))
            return _single(replace(judgment, subject=node))
        if isinstance(node, (Forall, Exists)):
            return _single(self.quantifier(node))
        msg = f"Not a term: {node!r}"
        raise TypeError(msg)

    # behavioral layer

    def _signature(self, node: Node, relational: bool) -> Arrow:
        signature = self.context.fluent(node.name)
        if signature is None:
            msg = f"unbound fluent '{node.name}'"
            raise TypeCheckError("E001", msg, node.span, subject=node)
        given = len(node.args.items) + (1 if relational else 0)
        matches_kind = signature.isRelational if relational else signature.isFunctional
        if not matches_kind or given != signature.arity:
            msg = f"'{node.name}' expects {signature.arity} arguments, got {given}"
            raise TypeCheckError("E002", msg, node.span, expected=signature, subject=node)
        return signature

    def _arguments(self, positions: Sequence[Node], params: Sequence[Type]) -> Tuple[Judgment, ...]:
        pairs = enumerate(zip(positions, params), start=1)
        return tuple(self.check(arg, param, index) for index, (arg, param) in pairs)

    def _action(self, node: Node, keyword: str) -> Judgment:
        options = self.options(node)
        if ACTION not in options:
            judgment = _first(options)
            msg = f"operand of {keyword} must have type Action, found {judgment.resultType}"
            raise TypeCheckError("E008", msg, node.span, (judgment,), expected=ACTION, found=judgment.resultType)
        return options[ACTION]

    def behavioral(self, node: Node) -> Judgment:
        """Type a behavioral term: fluents, ``do``, ``poss`` and their negations."""
        return _first(self._behavioralOptions(node))

    def _behavioralOptions(self, node: Node) -> Options:
        if isinstance(node, NegB):
            return {t: Judgment(node, t, "T-Neg", (j,)) for t, j in self.options(node.operand).items()}
        if isinstance(node, RelFluent):
            signature = self._signature(node, relational=True)
            premises = self._arguments(node.args.items + (node.sit,), signature.params)
            return _single(Judgment(node, SITUATION, "T-RelFlt", premises))
        if isinstance(node, FunFluent):
            signature = self._signature(node, relational=False)
            premises = self._arguments(node.args.items, signature.params)
            return _single(Judgment(node, ACTION, "T-FunFlt", premises))
        if isinstance(node, (Do, Poss)):
            keyword = "do" if isinstance(node, Do) else "poss"
            operand = self._action(node.operand, keyword)
            situation = self.check(node.sit, SITUATION)
            if isinstance(node, Do):
                return _single(Judgment(node, SITUATION, "T-Do", (operand, situation)))
            return _single(Judgment(node, UNIT, "T-Poss", (operand, situation)))
        msg = f"Not a behavioral term: {node!r}"
        raise TypeError(msg)

    # quantifiers

    def quantifier(self, node: Node) -> Judgment:
        """Type a quantified node, expanding multi-candidate quantifiers first."""
        if isinstance(node, QuantF):
            return self.singleQuantifier(node.kind, node.var, node.type, node.body, node)
        kind = FORALL if isinstance(node, Forall) else EXISTS
        if len(node.types) > 1:
            expansion = expand_typed_quantifier(node, self.mode)
            logger.debug("expanded %s into %s", pretty_print(node), pretty_print(expansion))
            return self.typecheck(expansion)
        return self.singleQuantifier(kind, node.var, node.types[0], node.body, node)

    def singleQuantifier(
        self, kind: str, var: str, declared: Type, body: Node, subject: Optional[Node] = None
    ) -> Judgment:
        """Type ``(kind var: declared) body`` with T-Unv1/T-Est1 or T-Unv2/T-Est2."""
        subject = subject if subject is not None else make_quantifier(kind, var, (declared,), body)
        core = fluent_core(body)
        if core is None:
            msg = f"the body of a quantifier over '{var}' must be a possibly negated fluent application"
            raise TypeCheckError("E003", msg, body.span, subject=body)
        if not mentions(body, var):
            msg = f"quantified variable '{var}' does not occur in '{pretty_print(body)}'"
            raise TypeCheckError("E009", msg, subject.span, subject=subject)
        relational = isinstance(core, RelFluent)
        signature = self._signature(core, relational)
        positions = core.args.items + ((core.sit,) if relational else ())
        for index, (arg, param) in enumerate(zip(positions, signature.params), start=1):
            if arg == Var(var) and param != declared:
                msg = f"'{var}' is declared {declared} but argument {index} of '{core.name}' expects {param}"
                raise TypeCheckError("E003", msg, arg.span, position=index, expected=param, found=declared, subject=arg)
        premise = self.withContext(self.context.extend(var, (declared,))).typecheck(body)
        universal = kind == FORALL
        if relational:
            rule = "T-Unv1" if universal else "T-Est1"
        else:
            rule = "T-Unv2" if universal else "T-Est2"
        return Judgment(subject, premise.resultType, rule, (premise,))

    # formula layer

    def formula(self, node: Node) -> Judgment:
        """Type a formula-layer node with the ``M-*`` checks."""
        return _first(self._formulaOptions(node))

    def _formulaOptions(self, node: Node) -> Options:
        if isinstance(node, Atom):
            return self._behavioralOptions(node.bt)
        if isinstance(node, NegF):
            return {t: Judgment(node, t, "T-Neg", (j,)) for t, j in self.options(node.operand).items()}
        if isinstance(node, QuantF):
            return _single(self.quantifier(node))
        if isinstance(node, SupsetF):
            left, right = self.options(node.left), self.options(node.right)
            results = {}
            if UNIT in left:
                results[UNIT] = Judgment(node, UNIT, "M-SupsetBT", (left[UNIT], _first(right)))
            shared, closest = self._shared([left, right])
            if not results and not shared:
                first, second = closest
                msg = f"the sides of '=>' differ: {first.resultType} vs {second.resultType}"
                raise TypeCheckError("E004", msg, node.span, closest, subject=node)
            for t, sides in shared.items():
                results.setdefault(t, Judgment(node, t, "M-SupsetBT", sides))
            return _ordered(results)
        if isinstance(node, (ConjF, DisjF)):
            shared, closest = self._shared([self.options(part) for part in _flatten(node, type(node))])
            if not shared:
                word = "conjunction" if isinstance(node, ConjF) else "disjunction"
                types = ", ".join(str(j.resultType) for j in closest)
                msg = f"the {word} is not uniformly typed: ({types})"
                raise TypeCheckError("E005", msg, node.span, closest, subject=node)
            return {UNIT: Judgment(node, UNIT, "M-ConjUnit", next(iter(shared.values())))}
        if isinstance(node, Eq):
            shared, (left, right) = self._shared([self.options(node.left), self.options(node.right)])
            if not shared:
                msg = f"the sides of '=' differ: {left.resultType} vs {right.resultType}"
                raise TypeCheckError(
                    "E006",
                    msg,
                    node.span,
                    (left, right),
                    expected=left.resultType,
                    found=right.resultType,
                    subject=node,
                )
            return {BOOL: Judgment(node, BOOL, "M-Eq", next(iter(shared.values())))}
        msg = f"Not a formula: {node!r}"
        raise TypeError(msg)


# ----------------------------------------------------------------------
# Module level entry points
# ----------------------------------------------------------------------


def typecheck(context: TypingContext, node: Node, mode: str = STANDARD) -> Judgment:
    """Type a node of any layer.

    Args:
        context (:py:class:`~sitcalc.core.TypingContext`): Bindings for variables and fluents
        node (:py:class:`~sitcalc.core.Node`): Node to type
        mode (str): Quantifier expansion mode (default is ``"standard"``)

    Returns:
        :py:class:`Judgment`: the root of the derivation

    Raises:
        TypeCheckError: at the first failing premise
    """
    return TypeChecker(context, mode).typecheck(node)


def typecheck_term(context: TypingContext, term: Node, mode: str = STANDARD) -> Judgment:
    """Type a term-layer node.

    Example:
        >>> typecheck_term(TypingContext(), Literal("true")).rule
        'T-True'
        >>> typecheck_term(TypingContext(), Var("x"))
        Traceback (most recent call last):
        ...
        sitcalc.typechecker.TypeCheckError: E001: unbound name 'x'
    """
    if not is_term(term):
        msg = f"Not a term: {term!r}"
        raise TypeError(msg)
    return TypeChecker(context, mode).term(term)


def typecheck_behavioral(context: TypingContext, bt: Node, mode: str = STANDARD) -> Judgment:
    """Type a behavioral term."""
    if not is_behavioral(bt):
        msg = f"Not a behavioral term: {bt!r}"
        raise TypeError(msg)
    return TypeChecker(context, mode).behavioral(bt)


def typecheck_quantifier(context: TypingContext, kind: str, var: str, declared: Type, body: Node) -> Judgment:
    """Type ``(kind var: declared) body`` where ``body`` is a possibly negated fluent mentioning ``var``."""
    if kind not in (FORALL, EXISTS):
        msg = f"Unknown quantifier {kind!r}"
        raise ValueError(msg)
    return TypeChecker(context).singleQuantifier(kind, var, declared, body)


def typecheck_formula(context: TypingContext, formula: Node, mode: str = STANDARD) -> Judgment:
    """Type a formula; term-layer connectives fall through to the ``T-*`` rules."""
    return TypeChecker(context, mode).typecheck(formula)


def expand_typed_quantifier(quantifier: Node, mode: str = STANDARD) -> Node:
    """Rewrite a quantifier over candidate types T1 ... Tn into single-type quantifiers.

    In ``standard`` mode a universal becomes the conjunction of its instances
    and an existential the disjunction; ``paper-faithful`` swaps the two.

    Example:
        >>> from sitcalc.core import OBJECT, ACTION
        >>> q = Forall("y", (OBJECT, ACTION), Var("y"))
        >>> pretty_print(expand_typed_quantifier(q))
        '(forall y: Object) y /\\\\ (forall y: Action) y'
        >>> pretty_print(expand_typed_quantifier(q, PAPER_FAITHFUL))
        '(forall y: Object) y \\\\/ (forall y: Action) y'
    """
    if mode not in QUANTIFIER_MODES:
        msg = f"Unknown quantifier mode {mode!r}, expected one of {QUANTIFIER_MODES}"
        raise ValueError(msg)
    if isinstance(quantifier, QuantF):
        return quantifier
    if not isinstance(quantifier, (Forall, Exists)):
        msg = f"Not a quantifier: {quantifier!r}"
        raise TypeError(msg)
    if not quantifier.types:
        msg = "Cannot expand a quantifier without candidate types"
        raise ValueError(msg)
    kind = FORALL if isinstance(quantifier, Forall) else EXISTS
    conjoin = (kind == FORALL) == (mode == STANDARD)
    operator = "/\\" if conjoin else "\\/"
    pieces = [make_quantifier(kind, quantifier.var, (t,), quantifier.body, quantifier.span) for t in quantifier.types]
    expansion = pieces[0]
    for piece in pieces[1:]:
        expansion = make_binary(operator, expansion, piece, quantifier.span)
    return expansion


# ----------------------------------------------------------------------
# Derivations
# ----------------------------------------------------------------------


def rule_trace(judgment: Judgment) -> List[str]:
    """Rule names of a derivation in bottom-up (post-order) order, without variable look-ups.

    Example:
        >>> from sitcalc.core import OBJECT
        >>> rule_trace(typecheck(TypingContext({"x": {OBJECT}}), Neg(Neg(Var("x")))))
        ['T-Neg', 'T-Neg']
    """
    trace = []
    for premise in judgment.premises:
        trace.extend(rule_trace(premise))
    if judgment.rule != "T-Var":
        trace.append(judgment.rule)
    return trace


def _structured(judgment: Judgment) -> Dict[str, Any]:
    return {
        "rule": judgment.rule,
        "subject": pretty_print(judgment.subject),
        "type": str(judgment.resultType),
        "premises": [_structured(premise) for premise in judgment.premises],
    }


def _lines(judgment: Judgment, depth: int) -> List[str]:
    lines = []
    for premise in judgment.premises:
        lines.extend(_lines(premise, depth + 1))
    lines.append(f"{'  ' * depth}{pretty_print(judgment.subject)} : {judgment.resultType}  [{judgment.rule}]")
    return lines


def derivation_tree(judgment: Judgment, structured: bool = False):
    """Render a derivation.

    The text form lists premises before their conclusion, one line per rule
    application, indented by depth; the conclusion is the last line.

    The literal ``unit`` is the empty uniformly typed collection, so its
    derivation is a single M-ConjUnit conclusion without premises.

    Args:
        judgment (:py:class:`Judgment`): Root of the derivation
        structured (bool): Return nested dicts (json-serializable) instead of text

    Example:
        >>> print(derivation_tree(typecheck_term(TypingContext(), Literal("false"))))
        false : Bool  [T-False]
        >>> print(derivation_tree(typecheck_term(TypingContext(), Literal("unit"))))
        unit : Unit  [M-ConjUnit]
    """
    if structured:
        return _structured(judgment)
    return "\n".join(_lines(judgment, 0))


def _schema_problem(judgment: Judgment) -> Optional[str]:
    rule, result = judgment.rule, judgment.resultType
    types = [premise.resultType for premise in judgment.premises]
    count = len(types)
    if rule not in RULES:
        return f"unknown rule {rule}"
    if rule == "T-True" or rule == "T-False":
        ok = count == 0 and result == BOOL
    elif rule == "T-Var":
        ok = count == 0
    elif rule in ("T-Neg", "T-Unv1", "T-Est1", "T-Unv2", "T-Est2"):
        ok = count == 1 and types[0] == result
    elif rule in ("T-Conj", "T-Disj"):
        ok = count == 2 and types[0] == types[1] == result
    elif rule == "T-Spt":
        ok = count == 2 and types[0] == types[1] and result == UNIT
    elif rule == "T-Seq":
        ok = count >= 1 and result == Product(tuple(types))
    elif rule == "T-RelFlt":
        ok = count >= 2 and types[-1] == SITUATION and result == SITUATION
    elif rule == "T-FunFlt":
        ok = count >= 1 and result == ACTION
    elif rule in ("T-Do", "T-Poss"):
        expected = SITUATION if rule == "T-Do" else UNIT
        ok = count == 2 and types == [ACTION, SITUATION] and result == expected
    elif rule == "M-SupsetBT":
        ok = count == 2 and (result == UNIT == types[0] or types[0] == types[1] == result)
    elif rule == "M-ConjUnit":
        ok = result == UNIT and len(set(types)) <= 1
    else:
        ok = count == 2 and types[0] == types[1] and result == BOOL
    return None if ok else f"{rule} cannot conclude {result} from ({', '.join(str(t) for t in types)})"


def check_rule_schema(judgment: Judgment) -> List[Tuple[Judgment, str]]:
    """Check every node of a derivation against the premise/conclusion schema of its rule.

    Returns:
        list: (judgment, problem) pairs; empty for a faithful derivation
    """
    problems = []
    stack = [judgment]
    while stack:
        current = stack.pop()
        problem = _schema_problem(current)
        if problem is not None:
            problems.append((current, problem))
        stack.extend(current.premises)
    return problems
