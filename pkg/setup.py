"""Build the optional compiled kernels.

The package works without them: ``uglad._backend`` falls back to the
pure-Python implementations when ``uglad._kernels`` cannot be imported.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("UGLAD_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "uglad._kernels",
                    ["src/uglad/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
