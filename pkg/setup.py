"""Build script for the compiled kernel extension.

The extension is optional: if Cython or a C compiler is missing, the install
still succeeds and the package falls back to the numpy kernel backend at
import time.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# -ffp-contract=off keeps the compiled kernels bit-compatible with the numpy
# backend (no FMA fusion changing the rounding of a*b+c chains).
extensions = [
    Extension(
        "dual_aae.kernels._opscy",
        ["src/dual_aae/kernels/_opscy.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
]

setup(ext_modules=cythonize(extensions, language_level=3) if cythonize else [])
