"""Build script for the optional compiled assembly kernels.

The package works without the extension; ``fatgraph.kernels`` falls back to
the numpy implementation when ``fatgraph._kernels`` cannot be imported.
Set FATGRAPH_NO_EXT=1 to skip compilation.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("FATGRAPH_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("fatgraph._kernels", ["src/fatgraph/_kernels.pyx"],
                       include_dirs=[numpy.get_include()],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
