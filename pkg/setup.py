"""Build the optional compiled kernels.

The package works without them (pure-Python fallback), so a missing Cython or
compiler only produces a warning.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "pwexpand._ckernels",
                ["src/pwexpand/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # no -march=native / -ffast-math: results must match the fallback bit for bit
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-time only
    print(f"warning: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
