"""Build script: compiles the optional Cython kernel core.

The compiled module geoembed._core is an accelerator only; if the build
fails (no compiler, no Cython) the package still installs and falls back
to the NumPy kernels at import time.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Skip extension compilation instead of failing the whole install."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        sys.stderr.write(
            "WARNING: building geoembed._core failed (%s); "
            "the pure NumPy kernels will be used instead.\n" % (exc,)
        )


ext_modules = []
cmdclass = {}
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "geoembed._core",
                ["src/geoembed/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_2_0_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
    cmdclass["build_ext"] = optional_build_ext
except ImportError as exc:
    sys.stderr.write("WARNING: Cython/NumPy unavailable at build time (%s); "
                     "skipping the compiled core.\n" % (exc,))

setup(ext_modules=ext_modules, cmdclass=cmdclass)
