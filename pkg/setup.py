"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-Python fallback is selected
at import time); set STREAMSCRIBE_PURE=1 to skip compilation entirely.
"""

import os
import sys

from setuptools import setup

ext_modules = []
if not os.environ.get("STREAMSCRIBE_PURE"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "streamscribe.kernels._ckernels",
                    ["src/streamscribe/kernels/_ckernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except Exception as exc:  # pragma: no cover - build environment dependent
        sys.stderr.write(
            f"streamscribe: skipping Cython kernels ({exc}); "
            "pure-Python fallback will be used\n"
        )
        ext_modules = []

setup(ext_modules=ext_modules)
