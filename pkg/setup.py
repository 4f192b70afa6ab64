import os

import numpy as np
from setuptools import Extension, setup

# MIXSPEC_NO_EXT=1 skips the compiled kernels; the pure-Python fallback is used.
if os.environ.get("MIXSPEC_NO_EXT"):
    ext_modules = []
else:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "mixspec._kernels",
                ["src/mixspec/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
