"""Module containing coded diagnostics and the corrective rewrites offered for them."""

import logging
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from sitcalc.core import (
    ACTION,
    OBJECT,
    SITUATION,
    FunFluent,
    Node,
    RelFluent,
    Seq,
    SitCalcError,
    Span,
    TypingContext,
    Var,
    fluent_core,
    relational_signature,
)
from sitcalc.parser import (
    Declaration,
    ParseError,
    SourceProgram,
    Statement,
    as_behavioral,
    parse_formula,
    parse_program,
    pretty_print,
)
from sitcalc.typechecker import STANDARD, Judgment, TypeCheckError, TypeChecker

logger = logging.getLogger(__name__)

__all__ = [
    "CODES",
    "ERROR",
    "WARNING",
    "WRAP_IN_RELATIONAL_FLUENT",
    "ADD_SITUATION_ARGUMENT",
    "Diagnostic",
    "Fix",
    "StaleFixError",
    "StatementReport",
    "diagnostic_from_error",
    "diagnose_statement",
    "diagnose_program",
    "suggest_fixes",
    "apply_fix",
    "fix_program",
]

CODES = {
    "E001": "unbound name",
    "E002": "arity mismatch",
    "E003": "argument type mismatch",
    "E004": "superset sides differ",
    "E005": "non-uniform conjunction",
    "E006": "equality sides differ",
    "E007": "stuck term",
    "E008": "operand is not an action",
    "E009": "vacuous quantifier",
    "E010": "uninterpreted name",
    "E101": "syntax error",
}

ERROR = "error"
WARNING = "warning"

WRAP_IN_RELATIONAL_FLUENT = "WrapInRelationalFluent"
ADD_SITUATION_ARGUMENT = "AddSituationArgument"


@dataclass(frozen=True)
class Diagnostic:
    """A coded problem located in the source text.

    ``statement`` is the index of the statement the problem belongs to, None
    for problems outside any statement (syntax errors). ``judgments`` holds the
    per-side or per-component judgments of typing failures.
    """

    code: str
    message: str
    span: Optional[Span]
    statement: Optional[int] = None
    related: Tuple[Span, ...] = ()
    severity: str = ERROR
    judgments: Tuple[Judgment, ...] = field(default=(), compare=False, repr=False)
    subject: Optional[Node] = field(default=None, compare=False, repr=False)

    def __post_init__(self):  # noqa: D105
        if self.code not in CODES:
            msg = f"Unknown diagnostic code {self.code!r}"
            raise ValueError(msg)
        if self.severity not in (ERROR, WARNING):
            msg = f"Unknown severity {self.severity!r}"
            raise ValueError(msg)

    @property
    def sortKey(self) -> Tuple[int, int]:
        """Diagnostics are reported by statement index, then by position."""
        index = -1 if self.statement is None else self.statement
        return (index, self.span.start if self.span is not None else 0)

    def asDict(self) -> Dict[str, Any]:
        """Serializable form shared with the json output."""
        return {
            "code": self.code,
            "severity": self.severity,
            "message": self.message,
            "span": self.span.asDict() if self.span is not None else None,
            "related": [span.asDict() for span in self.related],
        }


@dataclass(frozen=True)
class Fix:
    """A rewrite of one subterm of a statement, possibly with a declaration to add or replace."""

    kind: str
    code: str
    statement: int
    span: Span
    target: Node
    replacement: Node
    rationale: str
    declaration: Optional[Declaration] = None

    @property
    def original(self) -> str:
        """The replaced text, as printed from the target node."""
        return pretty_print(self.target)

    def asDict(self) -> Dict[str, Any]:
        """Serializable form used by the json output."""
        return {
            "kind": self.kind,
            "span": self.span.asDict(),
            "original": self.original,
            "replacement": pretty_print(self.replacement),
            "declaration": pretty_print(self.declaration) if self.declaration is not None else None,
            "rationale": self.rationale,
        }


class StaleFixError(SitCalcError, ValueError):
    """The text a fix was computed for is no longer in the program."""

    def __init__(self, fix: Fix, reason: str):
        """Initialization method.

        Args:
            fix (:py:class:`Fix`): The rejected fix
            reason (str): What no longer matches
        """
        super().__init__(fix.code, f"stale fix for '{fix.original}': {reason}", fix.span)
        self.fix = fix


@dataclass(frozen=True)
class StatementReport:
    """Verdict for one statement: its derivation when well-typed, its diagnostics otherwise."""

    statement: Statement
    judgment: Optional[Judgment]
    diagnostics: Tuple[Diagnostic, ...] = ()

    @property
    def wellTyped(self) -> bool:
        """Whether a derivation was found."""
        return self.judgment is not None

    @property
    def status(self) -> str:
        """``well-typed`` or ``ill-typed``."""
        return "well-typed" if self.wellTyped else "ill-typed"


def diagnostic_from_error(error: SitCalcError, statement: Optional[Statement] = None) -> Diagnostic:
    """Turn a raised error into a diagnostic; the span falls back to the statement's span."""
    span = error.span
    if statement is not None and (span is None or (statement.span is not None and not statement.span.contains(span))):
        span = statement.span
    judgments = getattr(error, "judgments", ())
    related = tuple(j.subject.span for j in judgments if j.subject.span is not None and j.subject.span != span)
    return Diagnostic(
        error.code,
        error.message,
        span,
        statement.index if statement is not None else None,
        related,
        judgments=judgments,
        subject=getattr(error, "subject", None),
    )


def diagnose_statement(context: TypingContext, statement: Statement, mode: str = STANDARD) -> StatementReport:
    """Type one statement; the first failing premise ends its derivation."""
    try:
        judgment = TypeChecker(context, mode).typecheck(statement.formula)
    except TypeCheckError as error:
        logger.debug("statement %s is ill-typed: %s", statement.name, error)
        return StatementReport(statement, None, (diagnostic_from_error(error, statement),))
    logger.debug("statement %s is well-typed: %s", statement.name, judgment.resultType)
    return StatementReport(statement, judgment)


def diagnose_program(
    program: SourceProgram, mode: str = STANDARD, max_errors: Optional[int] = None
) -> List[StatementReport]:
    """Type every statement of ``program``; errors in one statement never stop the others.

    Args:
        program (:py:class:`~sitcalc.parser.SourceProgram`): The parsed program
        mode (str): Quantifier expansion mode (default is ``"standard"``)
        max_errors (int, optional): Stop reporting diagnostics after this many

    Returns:
        list of :py:class:`StatementReport`: in statement order
    """
    context = program.context()
    reports = []
    emitted = 0
    for statement in program.statements:
        report = diagnose_statement(context, statement, mode)
        if max_errors is not None and report.diagnostics:
            room = max(max_errors - emitted, 0)
            report = StatementReport(report.statement, report.judgment, report.diagnostics[:room])
        emitted += len(report.diagnostics)
        reports.append(report)
    return reports


# ----------------------------------------------------------------------
# Fix templates
# ----------------------------------------------------------------------


def _situation_variable(context: TypingContext) -> Optional[str]:
    candidates = context.situationVariables()
    if len(candidates) != 1:
        warnings.warn(
            RuntimeWarning(f"no fix offered: expected one situation variable in scope, found {list(candidates)}")
        )
        return None
    return candidates[0]


def _fresh_fluent_name(context: TypingContext, base: str, signature) -> str:
    name, counter = base, 1
    while name in context.fluents and context.fluents[name] != signature or name in context.variables:
        counter += 1
        name = f"{base}{counter}"
    return name


def _wrap_in_relational_fluent(context: TypingContext, diagnostic: Diagnostic) -> List[Fix]:
    if len(diagnostic.judgments) != 2:
        return []
    sides = {j.resultType: j for j in diagnostic.judgments}
    if set(sides) != {OBJECT, SITUATION}:
        return []
    offending, situated = sides[OBJECT].subject, sides[SITUATION].subject
    if offending.span is None:
        return []
    situation = _situation_variable(context)
    if situation is None:
        return []
    head = fluent_core(situated)
    if head is not None:
        base = "in" + head.name[:1].upper() + head.name[1:]
    elif isinstance(offending, Var):
        base = "rel_" + offending.name
    else:
        base = "rel_fluent"
    name = _fresh_fluent_name(context, base, relational_signature((OBJECT,)))
    declaration = Declaration("rel", name, (OBJECT,))
    replacement = RelFluent(name, Seq((offending,)), Var(situation))
    rationale = (
        f"replace '{pretty_print(offending)}' with the relational fluent '{pretty_print(replacement)}' "
        f"so that both sides of '=' have type Situation"
    )
    declared = context.fluent(name) == declaration.signature
    return [
        Fix(
            WRAP_IN_RELATIONAL_FLUENT,
            diagnostic.code,
            diagnostic.statement,
            offending.span,
            offending,
            replacement,
            rationale,
            None if declared else declaration,
        )
    ]


def _add_situation_argument(context: TypingContext, diagnostic: Diagnostic) -> List[Fix]:
    counts = Counter(j.resultType for j in diagnostic.judgments)
    if not counts:
        return []
    (majority, votes), *rest = counts.most_common()
    if majority != SITUATION or (rest and rest[0][1] == votes):
        return []
    odd = [j for j in diagnostic.judgments if j.resultType == ACTION]
    cores = [fluent_core(j.subject) for j in odd]
    cores = [core for core in cores if isinstance(core, FunFluent) and core.span is not None]
    if not cores:
        return []
    situation = _situation_variable(context)
    if situation is None:
        return []
    fixes = []
    for core in cores:
        signature = context.fluent(core.name)
        declaration = Declaration("rel", core.name, signature.params)
        replacement = RelFluent(core.name, core.args, Var(situation))
        rationale = (
            f"turn the functional fluent '{pretty_print(core)}' into the relational fluent "
            f"'{pretty_print(replacement)}' so that every conjunct has type Situation"
        )
        fixes.append(
            Fix(
                ADD_SITUATION_ARGUMENT,
                diagnostic.code,
                diagnostic.statement,
                core.span,
                core,
                replacement,
                rationale,
                declaration,
            )
        )
    return fixes


def suggest_fixes(context: TypingContext, formula: Node, diagnostic: Diagnostic) -> List[Fix]:
    """Propose rewrites for a diagnostic produced from ``formula`` under ``context``.

    An equation between a Situation and an Object side gets the Object side
    wrapped in a fresh relational fluent over the situation variable in scope.
    A conjunction that is uniformly Situation except for functional fluents
    gets those fluents turned relational. Other diagnostics get no fix.

    Returns:
        list of :py:class:`Fix`: empty when no template applies
    """
    if diagnostic.statement is None:
        return []
    if diagnostic.code == "E006":
        fixes = _wrap_in_relational_fluent(context, diagnostic)
    elif diagnostic.code == "E005":
        fixes = _add_situation_argument(context, diagnostic)
    else:
        fixes = []
    for fix in fixes:
        logger.debug("offering %s: %s -> %s", fix.kind, fix.original, pretty_print(fix.replacement))
    return fixes


def _declaration_text(program: SourceProgram, source: str, declaration: Declaration) -> str:
    for existing in program.declarations:
        if existing.name == declaration.name and existing.span is not None:
            span = existing.span
            return source[: span.start] + pretty_print(declaration) + source[span.end :]
    if program.declarations and program.declarations[-1].span is not None:
        end = program.declarations[-1].span.end
        return source[:end] + "\n" + pretty_print(declaration) + source[end:]
    return pretty_print(declaration) + "\n" + source


def apply_fix(program: SourceProgram, fix: Fix) -> SourceProgram:
    """Apply ``fix`` to the text of ``program`` and parse the result.

    Raises:
        StaleFixError: when the fixed span no longer holds the original subterm
    """
    source = program.source
    span = fix.span
    if span.end > len(source):
        raise StaleFixError(fix, "span lies outside the program")
    try:
        current = parse_formula(source[span.start : span.end], program.context())
    except ParseError:
        raise StaleFixError(fix, f"found {source[span.start : span.end]!r}") from None
    if as_behavioral(current) != fix.target:
        raise StaleFixError(fix, f"found {source[span.start : span.end]!r}")
    source = source[: span.start] + pretty_print(fix.replacement) + source[span.end :]
    if fix.declaration is not None:
        source = _declaration_text(program, source, fix.declaration)
    logger.debug("applied %s at %d:%d", fix.kind, span.line, span.column)
    return parse_program(source)


def fix_program(program: SourceProgram, mode: str = STANDARD, max_rounds: int = 64) -> Tuple[SourceProgram, List[Fix]]:
    """Apply the first offered fix and re-check, until no fix is offered.

    Returns:
        tuple: the corrected program and the fixes applied, in order
    """
    applied: List[Fix] = []
    for _ in range(max_rounds):
        context = program.context()
        fixes = [
            fix
            for report in diagnose_program(program, mode)
            for diagnostic in report.diagnostics
            for fix in suggest_fixes(context, report.statement.formula, diagnostic)
        ]
        if not fixes:
            break
        program = apply_fix(program, fixes[0])
        applied.append(fixes[0])
    else:
        warnings.warn(RuntimeWarning(f"fixes still offered after {max_rounds} rounds"))
    return program, applied
