"""Module containing the finite-domain backtracking search behind the brute-force oracles.

A search problem assigns every slot (in practice: a syntax tree node) one value
out of its finite domain such that all constraints over the slots hold. The
oracles use it to enumerate type assignments against the typing-rule schemas and
truth assignments against the satisfaction clauses.
"""

from typing import Callable, Dict, Hashable, Iterable, Iterator, List, Optional, Sequence, Tuple


def check_if_compiled() -> bool:
    """Check if this code has been compiled with Cython.

    Returns:
        bool: whether the code has been compiled.
    """
    try:
        from cython import compiled

        return compiled
    except ImportError:
        return False


class _Unassigned:
    def __repr__(self):
        return "Unassigned"


Unassigned = _Unassigned()  #: Placeholder handed to constraints for slots without a value yet


class Domain(list):
    """Values a slot may still take, with a stack of pruning states.

    Example:
        >>> d = Domain([1, 2, 3])
        >>> d.pushState()
        >>> d.hideValue(2)
        >>> list(d)
        [1, 3]
        >>> d.popState()
        >>> sorted(d)
        [1, 2, 3]
    """

    def __init__(self, values: Iterable):
        """Initialization method.

        Args:
            values: Candidate values, comparable by equality
        """
        list.__init__(self, values)
        self._hidden: list = []
        self._states: List[int] = []

    def pushState(self):
        """Remember the current size; values hidden afterwards come back on :py:meth:`popState`."""
        self._states.append(len(self))

    def popState(self):
        """Restore the values hidden since the matching :py:meth:`pushState`."""
        missing = self._states.pop() - len(self)
        if missing:
            self.extend(self._hidden[-missing:])
            del self._hidden[-missing:]

    def hideValue(self, value):
        """Remove ``value`` until the current state is popped."""
        list.remove(self, value)
        self._hidden.append(value)


class Constraint:
    """Abstract base class for constraints over a tuple of slots."""

    def __call__(self, slots: Sequence, domains: dict, assignments: dict, forwardcheck=False) -> bool:
        """Tell whether the current (partial) assignment may still satisfy this constraint.

        Args:
            slots (sequence): Slots the constraint ranges over, in declaration order
            domains (dict): Slot to its :py:class:`Domain`
            assignments (dict): Slot to its current value, for assigned slots only
            forwardcheck: Whether values of a single remaining slot may be pruned

        Returns:
            bool: False when the assignment already breaks the constraint
        """
        return True

    def forwardCheck(self, slots: Sequence, domains: dict, assignments: dict) -> bool:
        """Prune the domain of the only unassigned slot, if there is exactly one.

        Returns:
            bool: False when the pruned domain became empty
        """
        pending = [slot for slot in slots if slot not in assignments]
        if len(pending) != 1:
            return True
        slot = pending[0]
        domain = domains[slot]
        for value in domain[:]:
            assignments[slot] = value
            if not self(slots, domains, assignments):
                domain.hideValue(value)
        del assignments[slot]
        return bool(domain)


class FunctionConstraint(Constraint):
    """Constraint whose logic is a predicate over the slot values.

    The predicate is only evaluated once all of its slots are assigned.

    Example:
        >>> problem = Problem()
        >>> problem.addSlots(["a", "b"], [1, 2])
        >>> problem.addConstraint(lambda a, b: b > a, ["a", "b"])
        >>> problem.getSolution()
        {'a': 1, 'b': 2}
    """

    def __init__(self, func: Callable[..., bool]):
        """Initialization method.

        Args:
            func (callable): Predicate receiving one positional value per slot
        """
        self._func = func

    def __call__(self, slots: Sequence, domains: dict, assignments: dict, forwardcheck=False) -> bool:  # noqa: D102
        values = [assignments.get(slot, Unassigned) for slot in slots]
        missing = sum(1 for value in values if value is Unassigned)
        if missing == 0:
            return bool(self._func(*values))
        if forwardcheck and missing == 1:
            return self.forwardCheck(slots, domains, assignments)
        return True


class EqualConstraint(Constraint):
    """Constraint forcing all its slots to the same value, pruning eagerly."""

    def __call__(self, slots: Sequence, domains: dict, assignments: dict, forwardcheck=False) -> bool:  # noqa: D102
        assigned = {assignments[slot] for slot in slots if slot in assignments}
        if len(assigned) > 1:
            return False
        if forwardcheck and assigned:
            (value,) = assigned
            for slot in slots:
                if slot in assignments:
                    continue
                domain = domains[slot]
                for other in domain[:]:
                    if other != value:
                        domain.hideValue(other)
                if not domain:
                    return False
        return True


class ResultConstraint(Constraint):
    """Constraint tying its first slot to ``func`` of the remaining ones.

    Once every operand is assigned the result slot is pruned to the one value
    ``func`` returns.

    Example:
        >>> problem = Problem()
        >>> problem.addSlots(["a", "b"], [1, 2])
        >>> problem.addSlot("total", range(5))
        >>> problem.addConstraint(ResultConstraint(lambda a, b: a + b), ["total", "a", "b"])
        >>> sorted(s["total"] for s in problem.getSolutions())
        [2, 3, 3, 4]
    """

    def __init__(self, func: Callable[..., Hashable]):
        """Initialization method.

        Args:
            func (callable): Function of the operand values giving the result value
        """
        self._func = func

    def __call__(self, slots: Sequence, domains: dict, assignments: dict, forwardcheck=False) -> bool:  # noqa: D102
        result, operands = slots[0], slots[1:]
        if any(slot not in assignments for slot in operands):
            return True
        value = self._func(*[assignments[slot] for slot in operands])
        if result in assignments:
            return assignments[result] == value
        if forwardcheck:
            domain = domains[result]
            for other in domain[:]:
                if other != value:
                    domain.hideValue(other)
            return bool(domain)
        return True

    def forwardCheck(self, slots: Sequence, domains: dict, assignments: dict) -> bool:  # noqa: D102
        if slots[0] not in assignments:
            return self(slots, domains, assignments, forwardcheck=True)
        return super().forwardCheck(slots, domains, assignments)


class BacktrackingSolver:
    """Depth-first search over slot assignments with forward checking.

    Slots down to a single value are assigned before the search starts, and
    constraints left with one open slot prune it until nothing changes. The
    remaining slots are tried most-constrained first (degree), then smallest
    domain first.
    """

    def __init__(self, forwardcheck: bool = True):
        """Initialization method.

        Args:
            forwardcheck (bool): Let constraints prune domains of unassigned slots (default is true)
        """
        self._forwardcheck = forwardcheck

    def getSolutionIter(
        self, domains: Dict[Hashable, Domain], constraints: List[tuple], vconstraints: Dict[Hashable, list]
    ) -> Iterator[dict]:
        """Yield every complete assignment satisfying all constraints.

        Args:
            domains (dict): Slot to its :py:class:`Domain`
            constraints (list): Every (constraint, slots) pair
            vconstraints (dict): Slot to the (constraint, slots) pairs mentioning it
        """
        assignments: dict = {}
        if not self._settle(domains, constraints, assignments):
            return
        order = sorted(
            (slot for slot in domains if slot not in assignments),
            key=lambda slot: (-len(vconstraints[slot]), len(domains[slot]), repr(slot)),
        )
        yield from self._search(order, 0, domains, vconstraints, assignments)

    @staticmethod
    def _settle(domains, constraints, assignments) -> bool:
        for slot, domain in domains.items():
            if not domain:
                return False
            if len(domain) == 1:
                assignments[slot] = domain[0]
        pending = list(constraints)
        progressed = True
        while progressed:
            progressed = False
            waiting = []
            for constraint, slots in pending:
                unassigned = [slot for slot in dict.fromkeys(slots) if slot not in assignments]
                if not unassigned:
                    if not constraint(slots, domains, assignments):
                        return False
                    continue
                if len(unassigned) == 1 and not constraint.forwardCheck(slots, domains, assignments):
                    return False
                if len(unassigned) == 1 and len(domains[unassigned[0]]) == 1:
                    assignments[unassigned[0]] = domains[unassigned[0]][0]
                    progressed = True
                    continue
                waiting.append((constraint, slots))
            pending = waiting
        return True

    def _search(self, order, depth, domains, vconstraints, assignments):
        if depth == len(order):
            yield dict(assignments)
            return
        slot = order[depth]
        pending = [domains[other] for other in order[depth + 1 :]] if self._forwardcheck else []
        for value in list(domains[slot]):
            assignments[slot] = value
            for domain in pending:
                domain.pushState()
            consistent = all(
                constraint(slots, domains, assignments, self._forwardcheck) for constraint, slots in vconstraints[slot]
            )
            if consistent:
                yield from self._search(order, depth + 1, domains, vconstraints, assignments)
            for domain in pending:
                domain.popState()
        del assignments[slot]

    def getSolution(self, domains, constraints, vconstraints) -> Optional[dict]:
        """Return the first solution found, or None."""
        return next(self.getSolutionIter(domains, constraints, vconstraints), None)

    def getSolutions(self, domains, constraints, vconstraints) -> List[dict]:
        """Return all solutions."""
        return list(self.getSolutionIter(domains, constraints, vconstraints))


class Problem:
    """A set of slots with finite domains plus the constraints relating them.

    Example:
        >>> problem = Problem()
        >>> problem.addSlot("x", [True, False])
        >>> problem.addConstraint(lambda x: not x, ["x"])
        >>> problem.getSolutions()
        [{'x': False}]
        >>> problem.getSolutions(pinned={"x": True})
        []
    """

    def __init__(self, solver: Optional[BacktrackingSolver] = None):
        """Initialization method.

        Args:
            solver (:py:class:`BacktrackingSolver`, optional): Search strategy to use
        """
        self._solver = solver or BacktrackingSolver()
        self._domains: Dict[Hashable, tuple] = {}
        self._constraints: List[Tuple[Constraint, tuple]] = []
        self._vconstraints: Optional[Dict[Hashable, list]] = None

    def addSlot(self, slot: Hashable, values: Iterable):
        """Add a slot with its candidate values.

        Raises:
            ValueError: when the slot already exists or has no values
        """
        if slot in self._domains:
            msg = f"Tried to insert duplicated slot {slot!r}"
            raise ValueError(msg)
        values = tuple(values)
        if not values:
            msg = f"Domain of slot {slot!r} is empty"
            raise ValueError(msg)
        self._domains[slot] = values
        self._vconstraints = None

    def addSlots(self, slots: Iterable[Hashable], values: Iterable):
        """Add several slots sharing the same candidate values."""
        values = tuple(values)
        for slot in slots:
            self.addSlot(slot, values)

    def addConstraint(self, constraint, slots: Sequence[Hashable]):
        """Add a constraint, or a predicate wrapped in :py:class:`FunctionConstraint`, over ``slots``."""
        if not isinstance(constraint, Constraint):
            if not callable(constraint):
                msg = "Constraints must be callables or instances of Constraint"
                raise TypeError(msg)
            constraint = FunctionConstraint(constraint)
        slots = tuple(slots)
        unknown = [slot for slot in slots if slot not in self._domains]
        if unknown:
            msg = f"Constraint over unknown slots {unknown}"
            raise ValueError(msg)
        self._constraints.append((constraint, slots))
        self._vconstraints = None

    def _arguments(self, pinned: Dict[Hashable, Hashable]):
        unknown = [slot for slot in pinned if slot not in self._domains]
        if unknown:
            msg = f"Cannot pin unknown slots {unknown}"
            raise ValueError(msg)
        domains = {}
        for slot, values in self._domains.items():
            if slot in pinned:
                values = [value for value in values if value == pinned[slot]]
            domains[slot] = Domain(values)
        if self._vconstraints is None:
            self._vconstraints = {slot: [] for slot in self._domains}
            for constraint, slots in self._constraints:
                for slot in dict.fromkeys(slots):
                    self._vconstraints[slot].append((constraint, slots))
        return domains, self._constraints, self._vconstraints

    def getSolutionIter(self, pinned: Optional[Dict[Hashable, Hashable]] = None) -> Iterator[dict]:
        """Iterate over the solutions of the problem.

        Args:
            pinned (dict, optional): Slots held to one of their values for this search only
        """
        if not self._domains:
            return iter(())
        return self._solver.getSolutionIter(*self._arguments(pinned or {}))

    def getSolution(self, pinned: Optional[Dict[Hashable, Hashable]] = None) -> Optional[dict]:
        """Return one solution, or None when the problem is unsatisfiable."""
        return next(self.getSolutionIter(pinned), None)

    def getSolutions(self, pinned: Optional[Dict[Hashable, Hashable]] = None) -> List[dict]:
        """Return all solutions."""
        return list(self.getSolutionIter(pinned))

    def isSatisfiable(self) -> bool:
        """Whether at least one solution exists."""
        return self.getSolution() is not None
