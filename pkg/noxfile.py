"""Sessions for the Nox test runner; run all of them with `nox`, or one with `nox -s <name>`.

Test settings (paths, coverage gate) live in pyproject.toml, not here.
"""

import nox
from nox import Session, session

# keep in line with the `python` range in pyproject.toml
PYTHON_VERSIONS = ["3.9", "3.10", "3.11", "3.12", "3.13"]
CORPUS = "sitcalc/corpus/robot.sitc"
WORLD = "sitcalc/corpus/robot.world"

nox.options.stop_on_first_error = True
nox.options.error_on_missing_interpreters = True


@session
def lint(session: Session) -> None:
    """Check code style and docstrings with ruff."""
    session.install("ruff")
    session.run("ruff", "--config=pyproject.toml", "check", ".")


@session(python=PYTHON_VERSIONS)
def tests(session: Session) -> None:
    """Run the test suite with the compiled search module, then measure coverage on the Python source."""
    session.install("poetry")
    session.run("poetry", "install", "--with", "dev,test", external=True)
    session.run("pytest", "--no-cov")

    # coverage cannot see into the C-extension; measure it once, on the newest Python
    if session.python == PYTHON_VERSIONS[-1]:
        session.run("python", "tests/setup_teardown.py", "--no-enable_extensions")
        try:
            session.run("pytest")
        finally:
            session.run("python", "tests/setup_teardown.py", "--enable_extensions")


@session
def corpus(session: Session) -> None:
    """Run every subcommand on the bundled corpus; its known ill-typed statements make each exit with 1."""
    session.install(".")
    for subcommand in ("check", "eval", "fix"):
        session.run("sitcalc", subcommand, CORPUS, "--format", "json", success_codes=[1])
    session.run("sitcalc", "sat", CORPUS, "--world", WORLD, success_codes=[1])
