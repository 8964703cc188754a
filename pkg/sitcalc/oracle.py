"""Module containing brute-force oracles the checker and the satisfaction relation are tested against.

Both oracles turn a tree into a :py:class:`~sitcalc.search.Problem`: one slot
per node occurrence, and one constraint per node relating its slot to the
slots of its parts. :py:func:`derivable` searches type assignments against the
typing rule schemas; :py:func:`truth_table` searches truth assignments against
the satisfaction clauses.
"""

import logging
from typing import Callable, Dict, Hashable, List, Sequence, Tuple

from sitcalc.core import (
    ACTION,
    BASE_TYPES,
    BOOL,
    FORALL,
    SITUATION,
    UNIT,
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
    SituationValue,
    Supset,
    SupsetF,
    TypingContext,
    Var,
    World,
    fluent_core,
    mentions,
    substitute,
)
from sitcalc.evaluator import SatisfactionError, fluent_holds, in_situation, unfold_history
from sitcalc.search import EqualConstraint, Problem, ResultConstraint
from sitcalc.typechecker import STANDARD, expand_typed_quantifier

logger = logging.getLogger(__name__)

__all__ = ["derivable", "truth_table", "TruthTable"]

_ALL_TYPES = tuple(BASE_TYPES.values())


class _Unsatisfiable(Exception):
    """Raised while building a problem when some slot has no candidate at all."""


def _flatten(node: Node, connective: type) -> List[Node]:
    if isinstance(node, connective):
        return _flatten(node.left, connective) + _flatten(node.right, connective)
    return [node]


class _TypingProblem:
    """Slots range over the base types; constraints are the rule schemas."""

    def __init__(self, mode: str):
        self.problem = Problem()
        self.mode = mode
        self.count = 0

    def slot(self, values) -> Hashable:
        values = tuple(values)
        if not values:
            raise _Unsatisfiable
        self.count += 1
        self.problem.addSlot(self.count, values)
        return self.count

    def relate(self, constraint, slots):
        self.problem.addConstraint(constraint, list(slots))

    def build(self, context: TypingContext, node: Node) -> Hashable:
        if isinstance(node, Var):
            return self.slot(sorted(context.lookup(node.name), key=str))
        if isinstance(node, Literal):
            return self.slot((UNIT,) if node.value == "unit" else (BOOL,))
        if isinstance(node, (Neg, NegB, NegF)):
            operand = self.build(context, node.operand)
            own = self.slot(_ALL_TYPES)
            self.relate(EqualConstraint(), (own, operand))
            return own
        if isinstance(node, Atom):
            return self.build(context, node.bt)
        if isinstance(node, (Conj, Disj, Supset)):
            left, right = self.build(context, node.left), self.build(context, node.right)
            if isinstance(node, Supset):
                own = self.slot((UNIT,))
                self.relate(EqualConstraint(), (left, right))
            else:
                own = self.slot(_ALL_TYPES)
                self.relate(EqualConstraint(), (own, left, right))
            return own
        if isinstance(node, SituationValue):
            root = self.build(context, node.root)
            self.relate(lambda t: t == SITUATION, (root,))
            for action in node.history:
                performed = self.build(context, action)
                self.relate(lambda t: t == ACTION, (performed,))
            return self.slot((SITUATION,))
        if isinstance(node, (RelFluent, FunFluent)):
            relational = isinstance(node, RelFluent)
            signature = context.fluent(node.name)
            positions = node.args.items + ((node.sit,) if relational else ())
            if signature is None or len(positions) != signature.arity:
                raise _Unsatisfiable
            if not (signature.isRelational if relational else signature.isFunctional):
                raise _Unsatisfiable
            for arg, param in zip(positions, signature.params):
                slot = self.build(context, arg)
                self.relate(lambda t, p=param: t == p, (slot,))
            return self.slot((SITUATION,) if relational else (ACTION,))
        if isinstance(node, (Do, Poss)):
            operand, situation = self.build(context, node.operand), self.build(context, node.sit)
            self.relate(lambda a, s: a == ACTION and s == SITUATION, (operand, situation))
            return self.slot((SITUATION,) if isinstance(node, Do) else (UNIT,))
        if isinstance(node, (Forall, Exists)) and len(node.types) > 1:
            return self.build(context, expand_typed_quantifier(node, self.mode))
        if isinstance(node, (Forall, Exists, QuantF)):
            declared = node.type if isinstance(node, QuantF) else node.types[0]
            if fluent_core(node.body) is None or not mentions(node.body, node.var):
                raise _Unsatisfiable
            body = self.build(context.extend(node.var, (declared,)), node.body)
            own = self.slot(_ALL_TYPES)
            self.relate(EqualConstraint(), (own, body))
            return own
        if isinstance(node, SupsetF):
            left, right = self.build(context, node.left), self.build(context, node.right)
            own = self.slot(_ALL_TYPES)
            self.relate(lambda t, a, b: (a == UNIT and t == UNIT) or t == a == b, (own, left, right))
            return own
        if isinstance(node, (ConjF, DisjF)):
            parts = [self.build(context, part) for part in _flatten(node, type(node))]
            self.relate(EqualConstraint(), parts)
            return self.slot((UNIT,))
        if isinstance(node, Eq):
            left, right = self.build(context, node.left), self.build(context, node.right)
            self.relate(EqualConstraint(), (left, right))
            return self.slot((BOOL,))
        if isinstance(node, Seq):
            for item in node.items:
                self.build(context, item)
            return self.slot((UNIT,))
        msg = f"Not a syntax tree node: {node!r}"
        raise TypeError(msg)


def derivable(context: TypingContext, node: Node, mode: str = STANDARD) -> bool:
    """Whether some type assignment to the nodes of ``node`` satisfies every rule schema.

    Example:
        >>> from sitcalc.core import OBJECT
        >>> derivable(TypingContext({"x": {OBJECT}}), Neg(Var("x")))
        True
        >>> derivable(TypingContext(), Var("x"))
        False
    """
    builder = _TypingProblem(mode)
    try:
        builder.build(context, node)
    except _Unsatisfiable:
        return False
    return builder.problem.isSatisfiable()


class _TruthProblem:
    """Slots range over truth values; constraints are the satisfaction clauses.

    The problem only depends on the situations of a world. Whatever else the
    world decides (which names exist, which fluent entries hold) enters as
    facts: slots a world pins to one truth value.
    """

    def __init__(self, situations: Tuple[str, ...]):
        self.situations = situations
        self.problem = Problem()
        self.count = 0
        self.facts: List[Tuple[Hashable, Callable[[World], bool]]] = []

    def slot(self, values=(False, True)) -> Hashable:
        self.count += 1
        self.problem.addSlot(self.count, tuple(values))
        return self.count

    def fact(self, test: Callable[[World], bool]) -> Hashable:
        own = self.slot()
        self.facts.append((own, test))
        return own

    def combine(self, predicate: Callable[..., bool], parts) -> Hashable:
        own = self.slot()
        self.problem.addConstraint(ResultConstraint(predicate), [own] + list(parts))
        return own

    def build(self, node: Node) -> Hashable:
        if isinstance(node, Var):
            return self.fact(lambda world, name=node.name: name in world.members)
        if isinstance(node, Literal):
            return self.slot((node.value != "false",))
        if isinstance(node, (Neg, NegB, NegF)):
            return self.combine(lambda a: not a, [self.build(node.operand)])
        if isinstance(node, Atom):
            return self.build(node.bt)
        if isinstance(node, (Conj, ConjF)):
            return self.combine(lambda a, b: a and b, [self.build(node.left), self.build(node.right)])
        if isinstance(node, (Disj, DisjF)):
            return self.combine(lambda a, b: a or b, [self.build(node.left), self.build(node.right)])
        if isinstance(node, (Supset, SupsetF)):
            return self.combine(lambda a, b: (not a) or b, [self.build(node.left), self.build(node.right)])
        if isinstance(node, Seq):
            return self.combine(all_of, [self.build(item) for item in node.items])
        if isinstance(node, (Forall, Exists, QuantF)):
            universal = node.kind == FORALL if isinstance(node, QuantF) else isinstance(node, Forall)
            instances = [self.build(substitute(node.body, node.var, Var(s))) for s in self.situations]
            return self.combine(all_of if universal else any_of, instances)
        if isinstance(node, (RelFluent, FunFluent)):
            holds = self.fact(lambda world, fluent=node: fluent_holds(world, fluent))
            args = [self.build(arg) for arg in node.args.items]
            return self.combine(lambda held, *values: held and all(values), [holds] + args)
        if isinstance(node, Do):
            instances = [self.build(in_situation(node.operand, Var(s))) for s in self.situations]
            return self.combine(any_of, instances)
        if isinstance(node, Poss):
            instances = [self.build(Supset(Var(s), Do(node.operand, Var(s)))) for s in self.situations]
            return self.combine(any_of, instances)
        if isinstance(node, SituationValue):
            return self.build(unfold_history(node))
        if isinstance(node, Eq):
            raise SatisfactionError("no interpretation for '='", node.span)
        msg = f"Not a syntax tree node: {node!r}"
        raise TypeError(msg)


def all_of(*values: bool) -> bool:
    """Conjunction of any number of truth values."""
    return all(values)


def any_of(*values: bool) -> bool:
    """Disjunction of any number of truth values."""
    return any(values)


class TruthTable:
    """Truth of one formula in the worlds over a fixed list of situations.

    The problem is built once. Worlds that agree on every fact the formula
    reads share a single search.

    Example:
        >>> table = TruthTable(Conj(Var("x"), Neg(Var("y"))), ["s0"])
        >>> table(World({"x"}, ["s0"])), table(World({"x", "y"}, ["s0"]))
        (True, False)

    Raises:
        SatisfactionError: E010 for ``=``, and for uninterpreted fluents when called
    """

    def __init__(self, node: Node, situations: Sequence[str]):
        """Initialization method.

        Args:
            node (:py:class:`~sitcalc.core.Node`): Formula or term to decide
            situations (sequence of str): Situations of the worlds it will be asked about
        """
        self.situations = tuple(situations)
        self._builder = _TruthProblem(self.situations)
        self._root = self._builder.build(node)
        self._answers: Dict[Tuple[bool, ...], bool] = {}

    def __call__(self, world: World) -> bool:
        """Truth in ``world`` as the unique consistent truth assignment to all subterms."""
        if world.situations != self.situations:
            msg = f"World situations {world.situations} differ from {self.situations}"
            raise ValueError(msg)
        facts = tuple(test(world) for _, test in self._builder.facts)
        if facts not in self._answers:
            pinned = {slot: value for (slot, _), value in zip(self._builder.facts, facts)}
            solutions: List[Dict] = self._builder.problem.getSolutions(pinned)
            if len(solutions) != 1:
                msg = f"Expected exactly one truth assignment, found {len(solutions)}"
                raise RuntimeError(msg)
            logger.debug("truth assignment over %d subterms", self._builder.count)
            self._answers[facts] = solutions[0][self._root]
        return self._answers[facts]


def truth_table(world: World, node: Node) -> bool:
    """Truth of ``node`` in ``world`` as the unique consistent truth assignment to all its subterms.

    Example:
        >>> w = World({"x"}, ["s0"])
        >>> truth_table(w, Conj(Var("x"), Neg(Var("y"))))
        True

    Raises:
        SatisfactionError: E010 for uninterpreted fluents and for ``=``
    """
    return TruthTable(node, world.situations)(world)
