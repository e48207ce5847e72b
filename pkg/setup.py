from setuptools import Extension, setup

import numpy as np

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "hairfield.raycast._kernels",
                ["src/hairfield/raycast/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    # The package still works without the compiled core: raycast falls back
    # to the pure-numpy implementation at import time.
    extensions = []

setup(ext_modules=extensions)
