"""Build script for the optional compiled ray-casting kernel.

The package works without the extension (a pure-Python kernel is selected
at import time), so a missing Cython toolchain only costs speed.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "boundarymap._kernels._native",
                ["src/boundarymap/_kernels/_native.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
