"""Build script: compiles the optional simplex pivot kernel.

The package works without the extension (a numpy fallback is selected at
import time); the compiled kernel just makes the LP-heavy solves faster.
"""

import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the Cython kernel if possible, otherwise warn and continue."""

    def run(self):
        try:
            super().run()
        except Exception as err:  # compiler missing, cython missing, ...
            print(f"warning: compiled kernel skipped ({err}); "
                  "using the pure-python fallback", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as err:
            print(f"warning: building {ext.name} failed ({err}); "
                  "using the pure-python fallback", file=sys.stderr)


def extensions():
    import os

    pyx = "src/chsvi/lp/_kernel.pyx"
    if not os.path.exists(pyx):
        return []
    try:
        from Cython.Build import cythonize
        import numpy
    except ImportError:
        return []
    from setuptools import Extension

    ext = Extension(
        "chsvi.lp._kernel",
        [pyx],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
