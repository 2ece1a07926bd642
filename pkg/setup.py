"""Build script for the compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so a failed build only costs speed.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/phantomgen/neuralcore/_ckernels.pyx",
        compiler_directives={"language_level": 3},
    )
    for ext in ext_modules:
        ext.extra_compile_args = ["-O3"]
    include_dirs = [numpy.get_include()]
except ImportError:
    ext_modules = []
    include_dirs = []

setup(ext_modules=ext_modules, include_dirs=include_dirs)
