"""Build script for the optional compiled kernels.

The package works without the extension (a pure-NumPy fallback is selected
at import time), so a failed compilation is downgraded to a warning.
"""

import sys

from setuptools import Extension, setup


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"warning: compiled kernels skipped ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "aer._kernels._native",
        sources=["src/aer/_kernels/_native.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions())
