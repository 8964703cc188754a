"""Module containing the shared type language, syntax tree, typing context and world model."""

import logging
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Dict, FrozenSet, Iterable, Iterator, Mapping, Optional, Tuple, Union

logger = logging.getLogger(__name__)

__all__ = [
    "INITIAL_SITUATION",
    "SitCalcError",
    "Type",
    "BaseType",
    "UNIT",
    "BOOL",
    "SITUATION",
    "ACTION",
    "OBJECT",
    "BASE_TYPES",
    "Arrow",
    "Product",
    "relational_signature",
    "functional_signature",
    "is_fluent_signature",
    "Span",
    "Node",
    "Var",
    "Literal",
    "Forall",
    "Exists",
    "Neg",
    "Supset",
    "Conj",
    "Disj",
    "Seq",
    "SituationValue",
    "NegB",
    "RelFluent",
    "FunFluent",
    "Do",
    "Poss",
    "Atom",
    "NegF",
    "SupsetF",
    "ConjF",
    "DisjF",
    "Eq",
    "QuantF",
    "FORALL",
    "EXISTS",
    "Term",
    "BehavioralTerm",
    "Formula",
    "is_term",
    "is_behavioral",
    "is_formula",
    "children",
    "rebuild",
    "walk",
    "size",
    "mentions",
    "substitute",
    "fluent_core",
    "TypingContext",
    "context_lookup",
    "context_extend",
    "World",
]

INITIAL_SITUATION = "s0"  #: Name of the initial situation constant

# ----------------------------------------------------------------------
# Errors
# ----------------------------------------------------------------------


class SitCalcError(Exception):
    """Root of all errors raised while parsing, checking or evaluating statements.

    Every error carries one of the closed diagnostic codes (``E001`` ... ``E101``)
    together with the span of the offending source text, when known.
    """

    def __init__(self, code: str, message: str, span: Optional["Span"] = None):
        """Initialization method.

        Args:
            code (str): Diagnostic code, for example ``"E003"``
            message (str): Human readable description
            span (:py:class:`Span`, optional): Location of the offending text
        """
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.span = span


# ----------------------------------------------------------------------
# Types
# ----------------------------------------------------------------------


class Type:
    """Abstract base class for the types of the calculus."""


@dataclass(frozen=True)
class BaseType(Type):
    """One of the five base types.

    Example:
        >>> BaseType("Object") == OBJECT
        True
        >>> OBJECT == SITUATION
        False
    """

    name: str

    def __str__(self):  # noqa: D105
        return self.name


UNIT = BaseType("Unit")
BOOL = BaseType("Bool")
SITUATION = BaseType("Situation")
ACTION = BaseType("Action")
OBJECT = BaseType("Object")

BASE_TYPES: Mapping[str, BaseType] = MappingProxyType({t.name: t for t in (UNIT, BOOL, SITUATION, ACTION, OBJECT)})


@dataclass(frozen=True)
class Arrow(Type):
    """Curried fluent signature ``P1 -> ... -> Pn -> R``.

    Example:
        >>> str(Arrow((OBJECT, OBJECT), ACTION))
        'Object -> Object -> Action'
    """

    params: Tuple[Type, ...]
    result: Type

    def __post_init__(self):  # noqa: D105
        if len(self.params) < 1:
            msg = "An arrow type needs at least one parameter"
            raise ValueError(msg)

    @property
    def isRelational(self) -> bool:
        """Whether this is a relational-fluent signature (``... -> Situation -> Situation``)."""
        return self.result == SITUATION and len(self.params) >= 2 and self.params[-1] == SITUATION

    @property
    def isFunctional(self) -> bool:
        """Whether this is a functional-fluent signature (``... -> Action``)."""
        return self.result == ACTION

    @property
    def arity(self) -> int:
        """Number of arguments expected at a call site."""
        return len(self.params)

    def __str__(self):  # noqa: D105
        return " -> ".join(str(t) for t in self.params + (self.result,))


@dataclass(frozen=True)
class Product(Type):
    """Component-wise type of a term sequence; only produced by the T-Seq rule."""

    items: Tuple[Type, ...]

    def __str__(self):  # noqa: D105
        return " * ".join(str(t) for t in self.items)


def relational_signature(params: Iterable[Type]) -> Arrow:
    """Build the signature of a relational fluent from its object parameters.

    The situation parameter and result are implied.

    Example:
        >>> str(relational_signature([OBJECT]))
        'Object -> Situation -> Situation'
    """
    return Arrow(tuple(params) + (SITUATION,), SITUATION)


def functional_signature(params: Iterable[Type]) -> Arrow:
    """Build the signature of a functional fluent; the result is always Action."""
    return Arrow(tuple(params), ACTION)


def is_fluent_signature(signature: Type) -> bool:
    """Check whether a type may be stored as a fluent signature in a typing context."""
    return isinstance(signature, Arrow) and (signature.isRelational or signature.isFunctional)


# ----------------------------------------------------------------------
# Source spans
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Span:
    """Byte offsets plus 1-based line/column pairs of a piece of source text."""

    start: int
    end: int
    line: int = 1
    column: int = 1
    end_line: int = 1
    end_column: int = 1

    def __post_init__(self):  # noqa: D105
        if self.start > self.end:
            msg = f"Span start {self.start} lies after its end {self.end}"
            raise ValueError(msg)

    def contains(self, other: "Span") -> bool:
        """Whether ``other`` lies inside this span."""
        return self.start <= other.start and other.end <= self.end

    def asDict(self) -> Dict[str, int]:
        """Serializable form used by the json output."""
        return {
            "start": self.start,
            "end": self.end,
            "line": self.line,
            "column": self.column,
            "end_line": self.end_line,
            "end_column": self.end_column,
        }


# ----------------------------------------------------------------------
# Syntax tree
# ----------------------------------------------------------------------
# Spans never take part in equality, so re-parsed trees compare structurally.


def _span():
    return field(default=None, compare=False, repr=False)


class Node:
    """Abstract base class for every syntax tree node."""


# Terms


@dataclass(frozen=True)
class Var(Node):
    """A variable or named constant."""

    name: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Literal(Node):
    """One of the value literals ``true``, ``false`` and ``unit``."""

    value: str
    span: Optional[Span] = _span()

    def __post_init__(self):  # noqa: D105
        if self.value not in ("true", "false", "unit"):
            msg = f"Unknown literal {self.value!r}"
            raise ValueError(msg)


@dataclass(frozen=True)
class Forall(Node):
    """Universally quantified term over the candidate types of its variable."""

    var: str
    types: Tuple[Type, ...]
    body: Node
    span: Optional[Span] = _span()

    def __post_init__(self):  # noqa: D105
        _check_candidates(self.types)


@dataclass(frozen=True)
class Exists(Node):
    """Existentially quantified term over the candidate types of its variable."""

    var: str
    types: Tuple[Type, ...]
    body: Node
    span: Optional[Span] = _span()

    def __post_init__(self):  # noqa: D105
        _check_candidates(self.types)


def _check_candidates(types):
    if len(types) < 1:
        msg = "A quantifier needs at least one declared type"
        raise ValueError(msg)


@dataclass(frozen=True)
class Neg(Node):
    """Negation of a term."""

    operand: Node
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Supset(Node):
    """Term-layer superset ``left => right``; always Unit-typed."""

    left: Node
    right: Node
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Conj(Node):
    """Term-layer conjunction."""

    left: Node
    right: Node
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Disj(Node):
    """Term-layer disjunction."""

    left: Node
    right: Node
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Seq(Node):
    """Non-empty sequence of terms, as used for fluent arguments."""

    items: Tuple[Node, ...]
    span: Optional[Span] = _span()

    def __post_init__(self):  # noqa: D105
        if len(self.items) < 1:
            msg = "A term sequence cannot be empty"
            raise ValueError(msg)


@dataclass(frozen=True)
class SituationValue(Node):
    """A situation as an action history, ``root . a1 . a2 ...``.

    The root is ``s0`` in ground situations; open statements may root a
    history at a situation variable. An empty history is the root itself.
    """

    root: Node
    history: Tuple[Node, ...] = ()
    span: Optional[Span] = _span()

    def append(self, action: Node) -> "SituationValue":
        """Return the successor history obtained by performing ``action``."""
        return SituationValue(self.root, self.history + (action,))


# Behavioral terms


@dataclass(frozen=True)
class NegB(Node):
    """Negated behavioral term."""

    operand: Node
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class RelFluent(Node):
    """Relational fluent ``r(t1, ..., tn, s)``."""

    name: str
    args: Seq
    sit: Node
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class FunFluent(Node):
    """Functional fluent ``f(t1, ..., tn)``; the case study calls these actions."""

    name: str
    args: Seq
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Do(Node):
    """``do(a, s)``, the situation reached by performing ``a`` in ``s``."""

    operand: Node
    sit: Node
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Poss(Node):
    """``poss(a, s)``, action ``a`` is possible in ``s``."""

    operand: Node
    sit: Node
    span: Optional[Span] = _span()


# Formulas


@dataclass(frozen=True)
class Atom(Node):
    """A behavioral term used as a formula."""

    bt: Node
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class NegF(Node):
    """Negated formula."""

    operand: Node
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class SupsetF(Node):
    """Formula-layer implication."""

    left: Node
    right: Node
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class ConjF(Node):
    """Formula-layer conjunction, flattened by the uniform typing check."""

    left: Node
    right: Node
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class DisjF(Node):
    """Formula-layer disjunction."""

    left: Node
    right: Node
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Eq(Node):
    """Statement-level equation between two formulas of the same type."""

    left: Node
    right: Node
    span: Optional[Span] = _span()


FORALL = "forall"
EXISTS = "exists"


@dataclass(frozen=True)
class QuantF(Node):
    """Quantified formula with a single declared type."""

    kind: str
    var: str
    type: Type
    body: Node
    span: Optional[Span] = _span()

    def __post_init__(self):  # noqa: D105
        if self.kind not in (FORALL, EXISTS):
            msg = f"Unknown quantifier {self.kind!r}"
            raise ValueError(msg)


TERM_NODES = (Var, Literal, Forall, Exists, Neg, Supset, Conj, Disj, Seq, SituationValue)
BEHAVIORAL_NODES = (NegB, RelFluent, FunFluent, Do, Poss)
FORMULA_NODES = (Atom, NegF, SupsetF, ConjF, DisjF, Eq, QuantF)

Term = Union[Var, Literal, Forall, Exists, Neg, Supset, Conj, Disj, Seq, SituationValue]
BehavioralTerm = Union[NegB, RelFluent, FunFluent, Do, Poss]
Formula = Union[Atom, NegF, SupsetF, ConjF, DisjF, Eq, QuantF]

NEGATIONS = (Neg, NegB, NegF)
BINARY_NODES = (Supset, Conj, Disj, SupsetF, ConjF, DisjF, Eq)
QUANTIFIERS = (Forall, Exists, QuantF)


def is_term(node: Node) -> bool:
    """Whether ``node`` belongs to the term layer."""
    return isinstance(node, TERM_NODES)


def is_behavioral(node: Node) -> bool:
    """Whether ``node`` is a behavioral term."""
    return isinstance(node, BEHAVIORAL_NODES)


def is_formula(node: Node) -> bool:
    """Whether ``node`` belongs to the formula layer."""
    return isinstance(node, FORMULA_NODES)


def children(node: Node) -> Tuple[Node, ...]:
    """Direct sub-nodes of ``node`` in left-to-right source order.

    Example:
        >>> children(Do(FunFluent("drop", Seq((Var("r"),))), Var("s")))
        (FunFluent(name='drop', args=Seq(items=(Var(name='r'),))), Var(name='s'))
    """
    if isinstance(node, (Var, Literal)):
        return ()
    if isinstance(node, Seq):
        return node.items
    if isinstance(node, SituationValue):
        return (node.root,) + node.history
    if isinstance(node, NEGATIONS):
        return (node.operand,)
    if isinstance(node, BINARY_NODES):
        return (node.left, node.right)
    if isinstance(node, QUANTIFIERS):
        return (node.body,)
    if isinstance(node, RelFluent):
        return (node.args, node.sit)
    if isinstance(node, FunFluent):
        return (node.args,)
    if isinstance(node, (Do, Poss)):
        return (node.operand, node.sit)
    if isinstance(node, Atom):
        return (node.bt,)
    msg = f"Not a syntax tree node: {node!r}"
    raise TypeError(msg)


def rebuild(node: Node, parts: Tuple[Node, ...]) -> Node:
    """Return a copy of ``node`` with its direct sub-nodes replaced by ``parts``."""
    if isinstance(node, Seq):
        return replace(node, items=tuple(parts))
    if isinstance(node, SituationValue):
        return replace(node, root=parts[0], history=tuple(parts[1:]))
    if isinstance(node, NEGATIONS):
        return replace(node, operand=parts[0])
    if isinstance(node, BINARY_NODES):
        return replace(node, left=parts[0], right=parts[1])
    if isinstance(node, QUANTIFIERS):
        return replace(node, body=parts[0])
    if isinstance(node, RelFluent):
        return replace(node, args=parts[0], sit=parts[1])
    if isinstance(node, FunFluent):
        return replace(node, args=parts[0])
    if isinstance(node, (Do, Poss)):
        return replace(node, operand=parts[0], sit=parts[1])
    if isinstance(node, Atom):
        return replace(node, bt=parts[0])
    return node


def walk(node: Node) -> Iterator[Node]:
    """Iterate over ``node`` and all its descendants in pre-order."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(children(current)))


def size(node: Node) -> int:
    """Number of nodes in the tree rooted at ``node``."""
    return sum(1 for _ in walk(node))


def mentions(node: Node, name: str) -> bool:
    """Whether variable ``name`` occurs free in ``node``."""
    if isinstance(node, Var):
        return node.name == name
    if isinstance(node, QUANTIFIERS) and node.var == name:
        return False
    return any(mentions(child, name) for child in children(node))


def substitute(node: Node, name: str, replacement: Node) -> Node:
    """Replace the free occurrences of variable ``name`` in ``node``."""
    if isinstance(node, Var):
        return replacement if node.name == name else node
    if isinstance(node, QUANTIFIERS) and node.var == name:
        return node
    parts = children(node)
    if not parts:
        return node
    return rebuild(node, tuple(substitute(child, name, replacement) for child in parts))


def fluent_core(node: Node) -> Optional[Node]:
    """Peel negations and atom wrappers off ``node`` down to a fluent application.

    Returns:
        :py:class:`RelFluent` or :py:class:`FunFluent`, or None when ``node`` is
        not a possibly-negated fluent
    """
    while isinstance(node, NEGATIONS + (Atom,)):
        node = node.operand if isinstance(node, NEGATIONS) else node.bt
    if isinstance(node, (RelFluent, FunFluent)):
        return node
    return None


# ----------------------------------------------------------------------
# Typing context
# ----------------------------------------------------------------------


class TypingContext:
    """Persistent map from names to candidate types and fluent signatures.

    Extending a context returns a new child context; the original is never
    modified, and :py:meth:`exit` hands back the enclosing scope.

    Example:
        >>> outer = TypingContext({"x": {OBJECT}})
        >>> inner = outer.extend("x", {ACTION})
        >>> sorted(str(t) for t in inner.lookup("x"))
        ['Action']
        >>> inner.exit() is outer
        True
    """

    def __init__(
        self,
        variables: Optional[Mapping[str, Iterable[Type]]] = None,
        fluents: Optional[Mapping[str, Arrow]] = None,
        parent: Optional["TypingContext"] = None,
    ):
        """Initialization method.

        Args:
            variables (mapping): Variable name to its candidate types
            fluents (mapping): Fluent name to its signature
            parent (:py:class:`TypingContext`, optional): Enclosing scope
        """
        self._variables: Dict[str, FrozenSet[Type]] = {}
        for name, types in (variables or {}).items():
            types = frozenset(types)
            if not types:
                msg = f"Variable {name!r} needs at least one type"
                raise ValueError(msg)
            self._variables[name] = types
        self._fluents: Dict[str, Arrow] = {}
        for name, signature in (fluents or {}).items():
            if not is_fluent_signature(signature):
                msg = f"{signature} is neither a relational nor a functional fluent signature"
                raise TypeError(msg)
            self._fluents[name] = signature
        self._parent = parent

    @property
    def variables(self) -> Mapping[str, FrozenSet[Type]]:
        """Read-only view of the variable bindings."""
        return MappingProxyType(self._variables)

    @property
    def fluents(self) -> Mapping[str, Arrow]:
        """Read-only view of the fluent signatures."""
        return MappingProxyType(self._fluents)

    def lookup(self, name: str) -> FrozenSet[Type]:
        """Return the candidate types bound to ``name``, empty when unbound."""
        return self._variables.get(name, frozenset())

    def fluent(self, name: str) -> Optional[Arrow]:
        """Return the signature of fluent ``name``, or None."""
        return self._fluents.get(name)

    def extend(self, name: str, types: Iterable[Type]) -> "TypingContext":
        """Open a scope binding ``name`` to ``types``, shadowing any outer binding."""
        types = frozenset(types)
        if not types:
            msg = f"Cannot bind {name!r} to an empty set of types"
            raise ValueError(msg)
        variables = dict(self._variables)
        variables[name] = types
        return TypingContext(variables, self._fluents, parent=self)

    def exit(self) -> "TypingContext":
        """Close the innermost scope and return the enclosing context."""
        if self._parent is None:
            msg = "Cannot exit the outermost scope"
            raise ValueError(msg)
        return self._parent

    def situationVariables(self) -> Tuple[str, ...]:
        """Names bound to exactly Situation, excluding the initial situation constant."""
        return tuple(
            sorted(
                name
                for name, types in self._variables.items()
                if types == frozenset((SITUATION,)) and name != INITIAL_SITUATION
            )
        )

    def __eq__(self, other):  # noqa: D105
        if not isinstance(other, TypingContext):
            return NotImplemented
        return self._variables == other._variables and self._fluents == other._fluents

    def __repr__(self):  # noqa: D105
        variables = ", ".join(
            f"{name}: {' | '.join(sorted(str(t) for t in types))}" for name, types in sorted(self._variables.items())
        )
        fluents = ", ".join(f"{name}: {sig}" for name, sig in sorted(self._fluents.items()))
        return f"TypingContext({{{variables}}}, {{{fluents}}})"


def context_lookup(context: TypingContext, name: str) -> FrozenSet[Type]:
    """Return the types bound to ``name`` in ``context``; an empty set means unbound.

    Example:
        >>> context_lookup(TypingContext(), "x")
        frozenset()
    """
    return context.lookup(name)


def context_extend(context: TypingContext, name: str, types: Iterable[Type]) -> TypingContext:
    """Return a new context in which ``name`` is bound to ``types``."""
    return context.extend(name, types)


# ----------------------------------------------------------------------
# Worlds
# ----------------------------------------------------------------------


class World:
    """Finite model: instances, situations and fluent interpretation tables.

    Example:
        >>> w = World({"x", "r"}, ["s0"], {"fragile": {(("x",), "s0")}}, {"drop": {("r", "x")}})
        >>> w.holdsRelational("fragile", ("x",), "s0")
        True
        >>> w.holdsFunctional("drop", ("x", "r"))
        False
    """

    def __init__(
        self,
        instances: Iterable[str],
        situations: Iterable[str],
        relations: Optional[Mapping[str, Iterable[Tuple[Tuple[str, ...], str]]]] = None,
        functions: Optional[Mapping[str, Iterable[Tuple[str, ...]]]] = None,
    ):
        """Initialization method.

        Args:
            instances (iterable of str): Named constants, the instance set
            situations (iterable of str): Ordered situation names, must include ``s0``
            relations (mapping): Relational fluent name to the (arguments, situation) pairs that hold
            functions (mapping): Functional fluent name to the argument tuples that hold
        """
        self.instances: FrozenSet[str] = frozenset(instances)
        self.situations: Tuple[str, ...] = tuple(dict.fromkeys(situations))
        if INITIAL_SITUATION not in self.situations:
            msg = f"A world must contain the initial situation {INITIAL_SITUATION}"
            raise ValueError(msg)
        members = self.members
        self.relations: Dict[str, FrozenSet[Tuple[Tuple[str, ...], str]]] = {}
        for name, entries in (relations or {}).items():
            entries = frozenset((tuple(args), sit) for args, sit in entries)
            for args, sit in entries:
                unknown = [a for a in args if a not in members]
                if unknown or sit not in self.situations:
                    msg = f"Entry {args}, {sit} of {name!r} refers to names outside the world"
                    raise ValueError(msg)
            self.relations[name] = entries
        self.functions: Dict[str, FrozenSet[Tuple[str, ...]]] = {}
        for name, entries in (functions or {}).items():
            entries = frozenset(tuple(args) for args in entries)
            for args in entries:
                if any(a not in members for a in args):
                    msg = f"Entry {args} of {name!r} refers to names outside the world"
                    raise ValueError(msg)
            self.functions[name] = entries

    @property
    def members(self) -> FrozenSet[str]:
        """Everything defined in the world: instances and situations."""
        return self.instances | frozenset(self.situations)

    def interprets(self, name: str) -> bool:
        """Whether fluent ``name`` has an interpretation table."""
        return name in self.relations or name in self.functions

    def holdsRelational(self, name: str, args: Tuple[str, ...], situation: str) -> bool:
        """Whether relational fluent ``name`` holds for ``args`` in ``situation``."""
        return (tuple(args), situation) in self.relations.get(name, ())

    def holdsFunctional(self, name: str, args: Tuple[str, ...]) -> bool:
        """Whether functional fluent ``name`` holds for ``args``."""
        return tuple(args) in self.functions.get(name, ())

    def __repr__(self):  # noqa: D105
        return (
            f"World(instances={sorted(self.instances)}, situations={list(self.situations)}, "
            f"relations={sorted(self.relations)}, functions={sorted(self.functions)})"
        )
