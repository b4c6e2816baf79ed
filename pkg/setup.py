"""Build script: compiles the optional coordinate-descent extension.

The package works without the extension (a pure-Python fallback is selected
at import time); any build failure here downgrades to a source-only install.
"""

import os

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    if not os.path.exists("src/gapmm/chl/_cd_cy.pyx"):
        raise ImportError("extension source missing")
    ext_modules = cythonize(
        [
            Extension(
                "gapmm.chl._cd_cy",
                ["src/gapmm/chl/_cd_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
