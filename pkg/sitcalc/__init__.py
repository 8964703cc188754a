"""File for obtaining top-level imports from submodules.

For example: sitcalc.typechecker.typecheck can be imported as `from sitcalc import typecheck`.
"""

from sitcalc.core import *  # noqa: F403
from sitcalc.parser import *  # noqa: F403
from sitcalc.typechecker import *  # noqa: F403
from sitcalc.evaluator import *  # noqa: F403
from sitcalc.diagnostics import *  # noqa: F403
from sitcalc.oracle import *  # noqa: F403
