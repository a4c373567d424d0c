import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

_numpy_root = os.path.dirname(np.__file__)

extensions = [
    Extension(
        "fpqueue._kernels",
        ["src/fpqueue/_kernels.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[
            os.path.join(_numpy_root, "random", "lib"),
            os.path.join(_numpy_root, "_core", "lib"),
        ],
        libraries=["npyrandom", "npymath"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # no FMA contraction: keeps results bit-identical to the numpy fallback
        extra_compile_args=["-O3", "-ffp-contract=off"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
