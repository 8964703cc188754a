"""Module containing the small-step evaluator, the satisfaction relation and the soundness reports.

Reduction is left-first: a connective steps its left component until it is in
normal form, then its right component. ``do`` contracts to the successor
situation chosen by a :py:class:`TransitionPolicy`; ``poss`` contracts to the
superset of the current and the successor situation. Open normal forms (terms
that still contain variables) count as values.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

from sitcalc.core import (
    ACTION,
    BOOL,
    FORALL,
    SITUATION,
    UNIT,
    Atom,
    BaseType,
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
    Supset,
    SupsetF,
    Type,
    TypingContext,
    Var,
    World,
    children,
    is_term,
    rebuild,
    substitute,
)
from sitcalc.parser import pretty_print
from sitcalc.typechecker import STANDARD, Judgment, TypeCheckError, typecheck

logger = logging.getLogger(__name__)

__all__ = [
    "EVALUATION_RULES",
    "DEFAULT_FUEL",
    "DEFAULT_POLICY",
    "Stepped",
    "IsValue",
    "Stuck",
    "OutOfFuel",
    "StepResult",
    "TransitionPolicy",
    "Trace",
    "SatisfactionError",
    "Violation",
    "PreservationReport",
    "ProgressReport",
    "append_history",
    "runtime_sort",
    "in_situation",
    "unfold_history",
    "fluent_holds",
    "step",
    "evaluate",
    "trace",
    "satisfies",
    "check_preservation",
    "check_progress",
]

EVALUATION_RULES = frozenset(("E-Unv", "E-Est", "E-Neg", "E-Spt", "E-Conj", "E-Disj", "E-Seq", "E-Do", "E-Poss"))

DEFAULT_FUEL = 1000


@dataclass(frozen=True)
class Stepped:
    """One reduction step.

    ``rules`` lists the rules applied from the outermost congruence down to the
    contraction; ``rule`` is the first of them.
    """

    next: Node
    rules: Tuple[str, ...]

    @property
    def rule(self) -> str:
        """Outermost rule of the step."""
        return self.rules[0]


@dataclass(frozen=True)
class IsValue:
    """The node is in normal form."""

    value: Node


@dataclass(frozen=True)
class Stuck:
    """No rule applies although the node is not in normal form."""

    node: Node
    reason: str


@dataclass(frozen=True)
class OutOfFuel:
    """Evaluation was cut off; ``node`` is the last term reached."""

    node: Node
    steps: int


StepResult = Union[Stepped, IsValue, Stuck]


def append_history(situation: Node, action: Node) -> SituationValue:
    """Default successor: extend the history of ``situation`` by ``action``.

    Example:
        >>> pretty_print(append_history(Var("s0"), FunFluent("drop", Seq((Var("r"), Var("x"))))))
        's0 . drop(r, x)'
    """
    if isinstance(situation, SituationValue):
        return situation.append(action)
    return SituationValue(situation, (action,))


@dataclass(frozen=True)
class TransitionPolicy:
    """How ``[s -> s']`` picks the successor situation of performing ``bt`` in ``s``."""

    successor: Callable[[Node, Node], Node] = append_history


DEFAULT_POLICY = TransitionPolicy()


# ----------------------------------------------------------------------
# Run-time sorts
# ----------------------------------------------------------------------
# Normal forms are open terms, so do/poss only check that their parts have
# the right shape; variables are accepted at any sort.

_CONFLICT = BaseType("conflicting")


def _join(left: Optional[Type], right: Optional[Type]) -> Optional[Type]:
    if left is None:
        return right
    if right is None or left == right:
        return left
    return _CONFLICT


def runtime_sort(node: Node) -> Optional[Type]:
    """Sort of a normal form as far as its shape tells; None for variables."""
    if isinstance(node, Var):
        return None
    if isinstance(node, Literal):
        return UNIT if node.value == "unit" else BOOL
    if isinstance(node, FunFluent):
        return ACTION
    if isinstance(node, (RelFluent, SituationValue, Do)):
        return SITUATION
    if isinstance(node, (Poss, Supset, ConjF, DisjF)):
        return UNIT
    if isinstance(node, Eq):
        return BOOL
    if isinstance(node, (Neg, NegB, NegF)):
        return runtime_sort(node.operand)
    if isinstance(node, Atom):
        return runtime_sort(node.bt)
    if isinstance(node, (Forall, Exists, QuantF)):
        return runtime_sort(node.body)
    if isinstance(node, (Conj, Disj)):
        return _join(runtime_sort(node.left), runtime_sort(node.right))
    if isinstance(node, SupsetF):
        left = runtime_sort(node.left)
        return UNIT if left == UNIT else _join(left, runtime_sort(node.right))
    return _CONFLICT


def _has_sort(node: Node, sort: Type) -> bool:
    found = runtime_sort(node)
    return found is None or found == sort


# ----------------------------------------------------------------------
# Stepping
# ----------------------------------------------------------------------

_CONGRUENCE = {
    Neg: "E-Neg",
    NegB: "E-Neg",
    NegF: "E-Neg",
    Supset: "E-Spt",
    SupsetF: "E-Spt",
    Conj: "E-Conj",
    ConjF: "E-Conj",
    Disj: "E-Disj",
    DisjF: "E-Disj",
    Seq: "E-Seq",
    Forall: "E-Unv",
    Exists: "E-Est",
}


def _congruence_rule(node: Node) -> Optional[str]:
    if isinstance(node, QuantF):
        return "E-Unv" if node.kind == FORALL else "E-Est"
    if isinstance(node, RelFluent):
        return None
    return _CONGRUENCE.get(type(node))


def _step_parts(node: Node, policy: TransitionPolicy) -> StepResult:
    """Step the leftmost sub-node that is not in normal form."""
    parts = children(node)
    for index, part in enumerate(parts):
        result = _step(part, policy)
        if isinstance(result, IsValue):
            continue
        if isinstance(result, Stuck):
            return result
        replaced = parts[:index] + (result.next,) + parts[index + 1 :]
        rule = _congruence_rule(node)
        rules = (rule,) + result.rules if rule is not None else result.rules
        return Stepped(rebuild(node, replaced), rules)
    return IsValue(node)


def _step(node: Node, policy: TransitionPolicy) -> StepResult:
    if isinstance(node, (Var, Literal, SituationValue)):
        return IsValue(node)
    if isinstance(node, Atom):
        inner = _step(node.bt, policy)
        if isinstance(inner, Stepped):
            contracted = inner.next if is_term(inner.next) else Atom(inner.next, span=node.span)
            return Stepped(contracted, inner.rules)
        return IsValue(node) if isinstance(inner, IsValue) else inner
    if isinstance(node, Eq):
        for side in (node.left, node.right):
            if not isinstance(_step(side, policy), IsValue):
                return Stuck(node, "no evaluation rule reduces under '='")
        return IsValue(node)
    if isinstance(node, (Do, Poss)):
        result = _step_parts(node, policy)
        if not isinstance(result, IsValue):
            return result
        keyword = "do" if isinstance(node, Do) else "poss"
        if not _has_sort(node.operand, ACTION):
            return Stuck(node, f"operand of {keyword} is not an action: {pretty_print(node.operand)}")
        if not _has_sort(node.sit, SITUATION):
            return Stuck(node, f"{keyword} is not applied to a situation: {pretty_print(node.sit)}")
        successor = policy.successor(node.sit, node.operand)
        if isinstance(node, Do):
            return Stepped(successor, ("E-Do",))
        return Stepped(Supset(node.sit, successor, span=node.span), ("E-Poss",))
    return _step_parts(node, policy)


def step(node: Node, policy: Optional[TransitionPolicy] = None) -> StepResult:
    """Perform one reduction step.

    Example:
        >>> drop = FunFluent("drop", Seq((Var("r"), Var("x"))))
        >>> result = step(Do(drop, Var("s0")))
        >>> result.rule, pretty_print(result.next)
        ('E-Do', 's0 . drop(r, x)')
        >>> step(Literal("true"))
        IsValue(value=Literal(value='true'))
    """
    return _step(node, policy or DEFAULT_POLICY)


@dataclass(frozen=True)
class Trace:
    """Every step taken from ``start`` and how evaluation ended."""

    start: Node
    steps: Tuple[Stepped, ...]
    outcome: Union[IsValue, Stuck, OutOfFuel]


def trace(node: Node, policy: Optional[TransitionPolicy] = None, fuel: int = DEFAULT_FUEL) -> Trace:
    """Step ``node`` until it is a value, gets stuck, or ``fuel`` steps were taken."""
    if fuel < 1:
        msg = f"Fuel must be at least 1, got {fuel}"
        raise ValueError(msg)
    policy = policy or DEFAULT_POLICY
    steps: List[Stepped] = []
    current = node
    while len(steps) < fuel:
        result = _step(current, policy)
        if not isinstance(result, Stepped):
            return Trace(node, tuple(steps), result)
        steps.append(result)
        current = result.next
    result = _step(current, policy)
    if not isinstance(result, Stepped):
        return Trace(node, tuple(steps), result)
    logger.debug("ran out of fuel after %d steps on %s", fuel, pretty_print(node))
    return Trace(node, tuple(steps), OutOfFuel(current, len(steps)))


def evaluate(
    node: Node, policy: Optional[TransitionPolicy] = None, fuel: int = DEFAULT_FUEL
) -> Union[IsValue, Stuck, OutOfFuel]:
    """Evaluate ``node`` with at most ``fuel`` steps.

    Example:
        >>> evaluate(Literal("false"), fuel=1)
        IsValue(value=Literal(value='false'))
    """
    return trace(node, policy, fuel).outcome


# ----------------------------------------------------------------------
# Satisfaction
# ----------------------------------------------------------------------


class SatisfactionError(SitCalcError):
    """A fluent or construct without interpretation in the world (code E010)."""

    def __init__(self, message: str, span=None):
        """Initialization method.

        Args:
            message (str): What has no interpretation
            span (:py:class:`~sitcalc.core.Span`, optional): Location of the construct
        """
        super().__init__("E010", message, span)


def in_situation(bt: Node, situation: Node) -> Node:
    """Read ``bt`` in ``situation`` by replacing the situation argument of its fluent, ``do`` or ``poss``."""
    if isinstance(bt, (NegB, Neg, NegF)):
        return rebuild(bt, (in_situation(bt.operand, situation),))
    if isinstance(bt, Atom):
        return Atom(in_situation(bt.bt, situation))
    if isinstance(bt, (RelFluent, Do, Poss)):
        return rebuild(bt, children(bt)[:1] + (situation,))
    return bt


def unfold_history(value: SituationValue) -> Node:
    """Rewrite a history ``root . a1 ... an`` as nested ``do`` applications."""
    if not value.history:
        return value.root
    return Do(value.history[-1], SituationValue(value.root, value.history[:-1]))


def _names(items: Tuple[Node, ...]) -> Optional[Tuple[str, ...]]:
    if all(isinstance(item, Var) for item in items):
        return tuple(item.name for item in items)
    return None


def fluent_holds(world: World, node: Node) -> bool:
    """Table lookup for a fluent application whose arguments are names.

    Arguments that are not plain names never match a table entry. A relational
    fluent whose situation is not a name is looked up in every situation.

    Raises:
        SatisfactionError: E010 when the fluent has no table in ``world``
    """
    if not world.interprets(node.name):
        msg = f"no interpretation for fluent '{node.name}'"
        raise SatisfactionError(msg, node.span)
    args = _names(node.args.items)
    if args is None:
        return False
    if isinstance(node, FunFluent):
        return world.holdsFunctional(node.name, args)
    if isinstance(node.sit, Var):
        return world.holdsRelational(node.name, args, node.sit.name)
    return any(world.holdsRelational(node.name, args, s) for s in world.situations)


def satisfies(world: World, node: Node) -> bool:
    """Decide ``w |= node`` by structural recursion over the satisfaction clauses.

    Quantifiers range over the situations of the world, whatever their declared
    type. ``do(bt, s)`` holds when ``bt`` holds in some situation, and
    ``poss(bt, s)`` when some situation ``si`` satisfies ``si => do(bt, si)``.

    Example:
        >>> w = World({"x"}, ["s0"])
        >>> satisfies(w, Var("x")), satisfies(w, Neg(Var("y")))
        (True, True)

    Raises:
        SatisfactionError: E010 for uninterpreted fluents and for ``=``
    """
    if isinstance(node, Var):
        return node.name in world.members
    if isinstance(node, Literal):
        return node.value != "false"
    if isinstance(node, (Neg, NegB, NegF)):
        return not satisfies(world, node.operand)
    if isinstance(node, Atom):
        return satisfies(world, node.bt)
    if isinstance(node, (Conj, ConjF)):
        return satisfies(world, node.left) and satisfies(world, node.right)
    if isinstance(node, (Disj, DisjF)):
        return satisfies(world, node.left) or satisfies(world, node.right)
    if isinstance(node, (Supset, SupsetF)):
        return not satisfies(world, node.left) or satisfies(world, node.right)
    if isinstance(node, Seq):
        return all(satisfies(world, item) for item in node.items)
    if isinstance(node, (Forall, Exists, QuantF)):
        universal = node.kind == FORALL if isinstance(node, QuantF) else isinstance(node, Forall)
        instances = (satisfies(world, substitute(node.body, node.var, Var(s))) for s in world.situations)
        return all(instances) if universal else any(instances)
    if isinstance(node, (RelFluent, FunFluent)):
        args_hold = all(satisfies(world, arg) for arg in node.args.items)
        return args_hold and fluent_holds(world, node)
    if isinstance(node, Do):
        return any(satisfies(world, in_situation(node.operand, Var(s))) for s in world.situations)
    if isinstance(node, Poss):
        return any(
            satisfies(world, Supset(Var(s), Do(node.operand, Var(s)))) for s in world.situations
        )
    if isinstance(node, SituationValue):
        return satisfies(world, unfold_history(node))
    if isinstance(node, Eq):
        raise SatisfactionError("no interpretation for '='", node.span)
    msg = f"Not a syntax tree node: {node!r}"
    raise TypeError(msg)


# ----------------------------------------------------------------------
# Preservation and progress
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    """A step (``index`` counts from 1; 0 is the starting node) that broke a soundness property."""

    index: int
    node: Node
    rule: Optional[str]
    reason: str


@dataclass(frozen=True)
class PreservationReport:
    """Outcome of re-typing every node along an evaluation trace."""

    initial: Optional[Judgment]
    trace: Optional[Trace]
    violations: Tuple[Violation, ...] = ()
    error: Optional[TypeCheckError] = field(default=None, compare=False)

    @property
    def preserved(self) -> bool:
        """Whether every step kept the type of the start node."""
        return self.error is None and not self.violations


@dataclass(frozen=True)
class ProgressReport:
    """Outcome of checking that a well-typed node never gets stuck."""

    trace: Trace
    wellTyped: bool
    violations: Tuple[Violation, ...] = ()

    @property
    def stuck(self) -> bool:
        """Whether evaluation ended in a stuck state."""
        return isinstance(self.trace.outcome, Stuck)

    @property
    def progressed(self) -> bool:
        """Whether no stuck state was reached from a well-typed start."""
        return not self.violations


def check_preservation(
    context: TypingContext,
    formula: Node,
    policy: Optional[TransitionPolicy] = None,
    fuel: int = DEFAULT_FUEL,
    mode: str = STANDARD,
) -> PreservationReport:
    """Evaluate ``formula`` and re-typecheck every intermediate node against the starting type.

    Returns:
        :py:class:`PreservationReport`: with ``error`` set (and no trace) when the
        formula is not well-typed to begin with
    """
    try:
        initial = typecheck(context, formula, mode)
    except TypeCheckError as error:
        return PreservationReport(None, None, error=error)
    steps = trace(formula, policy, fuel)
    violations = []
    for index, stepped in enumerate(steps.steps, start=1):
        try:
            found = typecheck(context, stepped.next, mode).resultType
        except TypeCheckError as error:
            violations.append(Violation(index, stepped.next, stepped.rule, f"no longer typable: {error.message}"))
            continue
        if found != initial.resultType:
            reason = f"type changed from {initial.resultType} to {found}"
            violations.append(Violation(index, stepped.next, stepped.rule, reason))
    if violations:
        logger.debug("preservation broken %d times on %s", len(violations), pretty_print(formula))
    return PreservationReport(initial, steps, tuple(violations))


def check_progress(
    context: TypingContext,
    formula: Node,
    policy: Optional[TransitionPolicy] = None,
    fuel: int = DEFAULT_FUEL,
    mode: str = STANDARD,
) -> ProgressReport:
    """Evaluate ``formula``; getting stuck on a well-typed node is a violation.

    Ill-typed formulas may get stuck freely; the report still tells whether they did.
    """
    steps = trace(formula, policy, fuel)
    try:
        typecheck(context, formula, mode)
        well_typed = True
    except TypeCheckError:
        well_typed = False
    outcome = steps.outcome
    violations: Tuple[Violation, ...] = ()
    if well_typed and isinstance(outcome, Stuck):
        last = steps.steps[-1].next if steps.steps else formula
        rule = steps.steps[-1].rule if steps.steps else None
        try:
            typecheck(context, last, mode)
            violations = (Violation(len(steps.steps), last, rule, outcome.reason),)
        except TypeCheckError:
            violations = ()
    return ProgressReport(steps, well_typed, violations)
