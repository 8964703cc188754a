"""Run the command-line front-end with `python -m sitcalc`."""

import sys

from sitcalc.cli import main

sys.exit(main())
