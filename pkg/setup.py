"""Build script for the optional compiled inner-loop kernel.

The package works without the extension (a pure-numpy kernel is selected
at import time); building it just makes long simulations faster.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "dgdtrack._kernels",
                ["src/dgdtrack/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
