"""Build the optional compiled kernels.

The package works without them: ``implicit_extremes.kernels`` falls back to
the numpy implementation when the extension is missing.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("IMPLICIT_EXTREMES_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "implicit_extremes._kernels",
                    ["src/implicit_extremes/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
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

setup(ext_modules=ext_modules)
