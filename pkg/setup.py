"""Build the optional Cython kernels.

If Cython or a C compiler is unavailable the package still installs and
``nwdkit.kernels`` falls back to the numpy implementation at import time.
"""
import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("NWDKIT_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "nwdkit._kernels",
        ["src/nwdkit/_kernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions())
