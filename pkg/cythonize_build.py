"""Poetry build script: compile the search module behind the oracles to a C-extension.

The type checker, evaluator and cli stay pure Python. When no C-compiler is
available the build continues and the package runs on the Python source.
"""

import shutil
from pathlib import Path
from subprocess import CalledProcessError
from warnings import warn

from Cython.Build import build_ext, cythonize
from setuptools import Distribution, Extension

COMPILED = {"sitcalc.search": "sitcalc/search.py"}


def build() -> None:
    """Cythonize and compile :py:data:`COMPILED`, copying the libraries next to their sources."""
    extensions = [Extension(name, [source], extra_compile_args=["-O3"]) for name, source in COMPILED.items()]
    modules = cythonize(extensions, include_path=["sitcalc"], language_level=3, force=True)
    command = build_ext(Distribution({"ext_modules": modules}))
    try:
        command.ensure_finalized()
        command.run()
    except CalledProcessError:
        warn(RuntimeWarning("No usable C-compiler for `build_ext`, sitcalc.search stays pure Python"))
        return
    build_lib = Path(command.build_lib)
    for output in map(Path, command.get_outputs()):
        shutil.copyfile(output, output.relative_to(build_lib))


build()
