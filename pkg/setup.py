import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # fallback kernels are used at runtime
    cythonize = None

ext_modules = []
if cythonize is not None and os.environ.get("RGCOPULA_NO_EXT", "") in ("", "0"):
    ext_modules = cythonize(
        [
            Extension(
                "rgcopula._kernels",
                ["src/rgcopula/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
