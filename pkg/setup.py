"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension: ``langenv.kernels``
falls back to a pure-numpy implementation of the same batch kernels when
``langenv.kernels._core`` is missing.  Building the extension needs Cython
and numpy at build time, so install with ``--no-build-isolation`` (or set
LANGENV_NO_EXT=1 to skip compilation deliberately).
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that degrades to the pure-python backend on any failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, broken toolchain, ...
            self._skip(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._skip(exc)

    @staticmethod
    def _skip(exc):
        print(f"warning: compiled kernels not built ({exc}); "
              f"langenv will use the pure-python backend")


def extensions():
    if os.environ.get("LANGENV_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"warning: {exc}; building without compiled kernels")
        return []
    ext = Extension(
        "langenv.kernels._core",
        ["src/langenv/kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
