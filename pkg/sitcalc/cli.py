"""Module containing the command-line front-end.

Usage::

    sitcalc check robot.sitc --format json
    sitcalc fix robot.sitc --apply-fixes
    sitcalc eval robot.sitc --fuel 50
    sitcalc sat robot.sitc --world robot.world

Exit codes: 0 when every statement is well-typed (``check``, ``fix``), reaches a
value (``eval``) or is satisfied (``sat``); 1 when diagnostics were emitted; 2 on
usage or I/O errors.
"""

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO, Tuple

from sitcalc.core import SitCalcError, World
from sitcalc.diagnostics import (
    Diagnostic,
    StatementReport,
    diagnose_program,
    diagnostic_from_error,
    fix_program,
    suggest_fixes,
)
from sitcalc.evaluator import DEFAULT_FUEL, IsValue, OutOfFuel, SatisfactionError, Stuck, satisfies, trace
from sitcalc.parser import ParseError, SourceProgram, parse_program, parse_world, pretty_print
from sitcalc.typechecker import PAPER_FAITHFUL, STANDARD, Judgment, derivation_tree, rule_trace

logger = logging.getLogger(__name__)

__all__ = ["SCHEMA_VERSION", "RunConfig", "build_parser", "run", "main", "emit_derivation", "validate_derivation"]

SCHEMA_VERSION = 1
SUBCOMMANDS = ("check", "eval", "sat", "fix")
FORMATS = ("human", "json")

EXIT_OK, EXIT_DIAGNOSTICS, EXIT_USAGE = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    """Everything one invocation needs; built from the command line by :py:func:`config_from_args`."""

    subcommand: str
    paths: Tuple[str, ...]
    format: str = "human"
    explain: bool = False
    suggest_fixes: bool = False
    apply_fixes: bool = False
    world: Optional[str] = None
    fuel: int = DEFAULT_FUEL
    quantifier_mode: str = STANDARD
    max_errors: Optional[int] = None
    verbose: bool = False

    def __post_init__(self):  # noqa: D105
        if self.subcommand not in SUBCOMMANDS:
            msg = f"Unknown subcommand {self.subcommand!r}, expected one of {SUBCOMMANDS}"
            raise ValueError(msg)
        if self.format not in FORMATS:
            msg = f"Unknown format {self.format!r}, expected one of {FORMATS}"
            raise ValueError(msg)
        if self.fuel < 1:
            msg = f"Fuel must be at least 1, got {self.fuel}"
            raise ValueError(msg)
        if self.quantifier_mode not in (STANDARD, PAPER_FAITHFUL):
            msg = f"Unknown quantifier mode {self.quantifier_mode!r}"
            raise ValueError(msg)
        if self.max_errors is not None and self.max_errors < 0:
            msg = f"--max-errors cannot be negative, got {self.max_errors}"
            raise ValueError(msg)


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one sub-parser per subcommand."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("paths", nargs="+", metavar="FILE", help="situation calculus source files (.sitc)")
    common.add_argument("--format", choices=FORMATS, default="human", help="output format (default: human)")
    common.add_argument("--explain", action="store_true", help="print derivation trees")
    common.add_argument("--suggest-fixes", action="store_true", help="propose corrective rewrites")
    common.add_argument(
        "--apply-fixes", action="store_true", help="write the corrected program next to the input as <stem>.fixed.sitc"
    )
    common.add_argument("--world", metavar="PATH", help="world model (.world) for the sat subcommand")
    common.add_argument("--fuel", type=_positive, default=DEFAULT_FUEL, help="maximum evaluation steps (default: 1000)")
    common.add_argument(
        "--quantifier-mode",
        choices=(STANDARD, PAPER_FAITHFUL),
        default=STANDARD,
        help="expansion of quantifiers over several types (default: standard)",
    )
    common.add_argument("--max-errors", type=_positive, help="stop reporting after this many diagnostics")
    common.add_argument("-v", "--verbose", action="store_true", help="log debugging information")

    parser = argparse.ArgumentParser(
        prog="sitcalc", description="Type checker and evaluator for situation calculus statements."
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True, metavar="{check,eval,sat,fix}")
    subparsers.add_parser("check", parents=[common], help="type-check statements")
    subparsers.add_parser("eval", parents=[common], help="evaluate statements step by step")
    subparsers.add_parser("sat", parents=[common], help="decide statements in a finite world")
    subparsers.add_parser("fix", parents=[common], help="suggest, and optionally apply, corrections")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Turn parsed arguments into a :py:class:`RunConfig`."""
    return RunConfig(
        subcommand=args.subcommand,
        paths=tuple(args.paths),
        format=args.format,
        explain=args.explain,
        suggest_fixes=args.suggest_fixes or args.subcommand == "fix",
        apply_fixes=args.apply_fixes,
        world=args.world,
        fuel=args.fuel,
        quantifier_mode=args.quantifier_mode,
        max_errors=args.max_errors,
        verbose=args.verbose,
    )


# ----------------------------------------------------------------------
# Rendering
# ----------------------------------------------------------------------


def emit_derivation(judgment: Judgment, format: str = "human") -> str:
    """Render a derivation: one indented line per rule application, or its json tree.

    Example:
        >>> from sitcalc.core import Literal, TypingContext
        >>> from sitcalc.typechecker import typecheck
        >>> emit_derivation(typecheck(TypingContext(), Literal("true")))
        'true : Bool  [T-True]'
    """
    if format == "json":
        return json.dumps(derivation_tree(judgment, structured=True), indent=2)
    return derivation_tree(judgment)


def validate_derivation(tree: Any) -> bool:
    """Check that ``tree`` has the shape of a json derivation tree."""
    if not isinstance(tree, dict) or set(tree) != {"rule", "subject", "type", "premises"}:
        return False
    if not all(isinstance(tree[key], str) for key in ("rule", "subject", "type")):
        return False
    return isinstance(tree["premises"], list) and all(validate_derivation(p) for p in tree["premises"])


def _location(path: str, diagnostic: Diagnostic) -> str:
    if diagnostic.span is None:
        return path
    return f"{path}:{diagnostic.span.line}:{diagnostic.span.column}"


def _render_diagnostic(path: str, source: str, diagnostic: Diagnostic) -> List[str]:
    lines = [f"{_location(path, diagnostic)}: {diagnostic.severity}[{diagnostic.code}]: {diagnostic.message}"]
    span = diagnostic.span
    if span is not None and source:
        text = source.splitlines()[span.line - 1] if span.line - 1 < len(source.splitlines()) else ""
        width = max(1, (span.end_column - span.column) if span.end_line == span.line else len(text) - span.column + 1)
        lines.append(f"    {text}")
        lines.append(f"    {' ' * (span.column - 1)}{'^' * width}")
    return lines


def _side_types(judgments: Sequence[Judgment]) -> str:
    return "(" + ", ".join(str(j.resultType) for j in judgments) + ")"


class _Output:
    """Collects the stdout/stderr text of one run; flushed file by file in input order."""

    def __init__(self, stdout: TextIO, stderr: TextIO, config: RunConfig):
        self.stdout = stdout
        self.stderr = stderr
        self.config = config

    @property
    def json(self) -> bool:
        return self.config.format == "json"

    def out(self, text: str = ""):
        print(text, file=self.stdout)

    def err(self, text: str):
        print(text, file=self.stderr)


def _statement_entry(report: StatementReport, config: RunConfig, program: SourceProgram) -> Dict[str, Any]:
    judgment = report.judgment
    entry: Dict[str, Any] = {
        "name": report.statement.name,
        "status": report.status,
        "type": str(judgment.resultType) if judgment is not None else None,
        "rule-trace": rule_trace(judgment) if judgment is not None else [],
        "diagnostics": [],
    }
    context = program.context()
    for diagnostic in report.diagnostics:
        item = diagnostic.asDict()
        item["types"] = [str(j.resultType) for j in diagnostic.judgments]
        fixes = suggest_fixes(context, report.statement.formula, diagnostic) if config.suggest_fixes else []
        item["fixes"] = [fix.asDict() for fix in fixes]
        entry["diagnostics"].append(item)
    if config.explain and judgment is not None:
        entry["derivation"] = derivation_tree(judgment, structured=True)
    return entry


def _human_check(output: _Output, path: str, program: SourceProgram, reports: List[StatementReport]):
    config = output.config
    output.out(f"{path}: {len(reports)} statement(s)")
    context = program.context()
    for report in reports:
        judgment = report.judgment
        if judgment is not None:
            output.out(f"  {report.statement.name}: well-typed, type {judgment.resultType}")
            if len(judgment.premises) == 2 and judgment.rule in ("M-SupsetBT", "M-Eq"):
                output.out(f"    side types: {_side_types(judgment.premises)}")
            output.out(f"    rules: {', '.join(rule_trace(judgment))}")
            if config.explain:
                for line in emit_derivation(judgment).splitlines():
                    output.out(f"    {line}")
            continue
        output.out(f"  {report.statement.name}: ill-typed")
        for diagnostic in report.diagnostics:
            if diagnostic.judgments:
                output.out(f"    {diagnostic.code} types: {_side_types(diagnostic.judgments)}")
            for line in _render_diagnostic(path, program.source, diagnostic):
                output.err(line)
            if config.suggest_fixes:
                for fix in suggest_fixes(context, report.statement.formula, diagnostic):
                    output.err(f"    fix ({fix.kind}): replace '{fix.original}' with '{pretty_print(fix.replacement)}'")
                    if fix.declaration is not None:
                        output.err(f"      declare: {pretty_print(fix.declaration)}")
                    output.err(f"      {fix.rationale}")


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _file_object(path: str) -> Dict[str, Any]:
    return {"schema": SCHEMA_VERSION, "file": path, "statements": []}


def _syntax_error(output: _Output, path: str, source: str, error: ParseError) -> int:
    diagnostic = diagnostic_from_error(error)
    if output.json:
        result = _file_object(path)
        item = diagnostic.asDict()
        item["expected"] = sorted(error.expected)
        item["fixes"] = []
        result["diagnostics"] = [item]
        output.out(json.dumps(result, indent=2))
    else:
        for line in _render_diagnostic(path, source, diagnostic):
            output.err(line)
        if error.expected:
            output.err(f"    expected one of: {', '.join(sorted(error.expected))}")
    return EXIT_DIAGNOSTICS


def _check(output: _Output, path: str, program: SourceProgram) -> int:
    config = output.config
    reports = diagnose_program(program, config.quantifier_mode, config.max_errors)
    ok = all(report.wellTyped for report in reports)
    result = _file_object(path)
    result["statements"] = [_statement_entry(report, config, program) for report in reports]
    if config.apply_fixes:
        fixed, applied = fix_program(program, config.quantifier_mode)
        target = Path(path).with_name(Path(path).stem + ".fixed.sitc")
        target.write_text(pretty_print(fixed), encoding="utf-8")
        logger.debug("wrote %s after %d fixes", target, len(applied))
        result["fixed"] = {"file": str(target), "applied": [fix.asDict() for fix in applied]}
        if not output.json:
            output.err(f"{path}: applied {len(applied)} fix(es), wrote {target}")
    if output.json:
        output.out(json.dumps(result, indent=2))
    else:
        _human_check(output, path, program, reports)
    return EXIT_OK if ok else EXIT_DIAGNOSTICS


def _outcome_name(outcome) -> str:
    if isinstance(outcome, IsValue):
        return "value"
    if isinstance(outcome, Stuck):
        return "stuck"
    return "out-of-fuel"


def _eval(output: _Output, path: str, program: SourceProgram) -> int:
    config = output.config
    reports = {report.statement.index: report for report in diagnose_program(program, config.quantifier_mode)}
    result = _file_object(path)
    ok = True
    if not output.json:
        output.out(f"{path}: {len(program.statements)} statement(s)")
    for statement in program.statements:
        report = reports[statement.index]
        steps = trace(statement.formula, fuel=config.fuel)
        outcome = steps.outcome
        diagnostics = list(report.diagnostics)
        if isinstance(outcome, Stuck):
            ok = False
            message = f"evaluation is stuck at '{pretty_print(outcome.node)}': {outcome.reason}"
            span = outcome.node.span if outcome.node.span is not None else statement.span
            diagnostics.append(Diagnostic("E007", message, span, statement.index))
        elif isinstance(outcome, OutOfFuel):
            ok = False
        final = outcome.value if isinstance(outcome, IsValue) else outcome.node
        if output.json:
            entry = _statement_entry(report, config, program)
            entry["diagnostics"] = [dict(d.asDict(), fixes=[]) for d in diagnostics]
            entry["steps"] = [{"rules": list(s.rules), "term": pretty_print(s.next)} for s in steps.steps]
            entry["outcome"] = _outcome_name(outcome)
            entry["result"] = pretty_print(final)
            result["statements"].append(entry)
            continue
        output.out(f"  {statement.name}: {pretty_print(statement.formula)}")
        for number, stepped in enumerate(steps.steps, start=1):
            output.out(f"    {number:>3}. {'/'.join(stepped.rules):<16} {pretty_print(stepped.next)}")
        output.out(f"    => {_outcome_name(outcome)}: {pretty_print(final)}")
        for diagnostic in diagnostics:
            if diagnostic.code == "E007":
                for line in _render_diagnostic(path, program.source, diagnostic):
                    output.err(line)
    if output.json:
        output.out(json.dumps(result, indent=2))
    return EXIT_OK if ok else EXIT_DIAGNOSTICS


def _sat(output: _Output, path: str, program: SourceProgram, world: World) -> int:
    result = _file_object(path)
    ok = True
    if not output.json:
        output.out(f"{path}: {len(program.statements)} statement(s)")
    for statement in program.statements:
        entry: Dict[str, Any] = {"name": statement.name, "diagnostics": []}
        try:
            holds = satisfies(world, statement.formula)
        except SatisfactionError as error:
            ok = False
            diagnostic = diagnostic_from_error(error, statement)
            entry.update(status="uninterpreted", diagnostics=[dict(diagnostic.asDict(), fixes=[])])
            if not output.json:
                output.out(f"  {statement.name}: uninterpreted")
                for line in _render_diagnostic(path, program.source, diagnostic):
                    output.err(line)
        else:
            ok = ok and holds
            entry["status"] = "satisfied" if holds else "unsatisfied"
            if not output.json:
                output.out(f"  {statement.name}: {entry['status']}")
        result["statements"].append(entry)
    if output.json:
        output.out(json.dumps(result, indent=2))
    return EXIT_OK if ok else EXIT_DIAGNOSTICS


def run(config: RunConfig, stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
    """Run one invocation and return its exit code."""
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    logging.basicConfig(
        level=logging.DEBUG if config.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=stderr,
    )
    output = _Output(stdout, stderr, config)
    world = None
    if config.subcommand == "sat":
        if config.world is None:
            output.err("sitcalc sat: --world is required")
            return EXIT_USAGE
        try:
            world = parse_world(_read(config.world))
        except OSError as error:
            output.err(f"sitcalc: cannot read {config.world}: {error.strerror or error}")
            return EXIT_USAGE
        except ParseError as error:
            output.err(f"{config.world}: error[{error.code}]: {error.message}")
            return EXIT_DIAGNOSTICS
    code = EXIT_OK
    for path in config.paths:
        try:
            source = _read(path)
        except OSError as error:
            output.err(f"sitcalc: cannot read {path}: {error.strerror or error}")
            return EXIT_USAGE
        try:
            program = parse_program(source)
        except ParseError as error:
            code = max(code, _syntax_error(output, path, source, error))
            continue
        logger.debug("checking %s with %d statements", path, len(program.statements))
        try:
            if config.subcommand in ("check", "fix"):
                status = _check(output, path, program)
            elif config.subcommand == "eval":
                status = _eval(output, path, program)
            else:
                status = _sat(output, path, program, world)
        except OSError as error:
            output.err(f"sitcalc: cannot write next to {path}: {error.strerror or error}")
            return EXIT_USAGE
        except SitCalcError as error:
            output.err(f"{path}: error[{error.code}]: {error.message}")
            status = EXIT_DIAGNOSTICS
        code = max(code, status)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Command-line entry point; argparse exits with status 2 on malformed flags."""
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except ValueError as error:
        print(f"sitcalc: {error}", file=sys.stderr)
        return EXIT_USAGE
    return run(config)
