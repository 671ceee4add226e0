"""Build script for the optional compiled GRU kernel.

The package works without the extension (a numpy fallback is selected at
import time), so the build degrades gracefully when Cython or a C compiler
is unavailable.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "dtdmn.kernels._gru_cy",
                sources=["src/dtdmn/kernels/_gru_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
