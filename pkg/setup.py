"""Build hook for the optional compiled scoring kernels.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); set SVBACKEND_SKIP_EXT=1 to force a pure-Python
build on machines without a C toolchain.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SVBACKEND_SKIP_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        # no -ffast-math: reassociation would break the bitwise determinism
        # contracts of the scoring kernels
        ext_modules = cythonize(
            [
                Extension(
                    "svbackend._core",
                    ["src/svbackend/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3", "-march=native"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
