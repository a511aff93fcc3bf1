"""Build script for the optional compiled kernel extension.

The package works without the extension (a numpy/pure-Python fallback is
selected at import); the extension just makes the per-sample hot loops fast.
Set MULTISENSE_NO_EXT=1 to skip building it.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("MULTISENSE_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "multisense.kernels._native",
                    ["src/multisense/kernels/_native.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
