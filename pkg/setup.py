import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "rppg_attack._kernels._conv3d",
        ["src/rppg_attack/_kernels/_conv3d.pyx", "src/rppg_attack/_kernels/conv3d_core.c"],
        include_dirs=[np.get_include(), "src/rppg_attack/_kernels"],
        extra_compile_args=["-O3", "-march=native"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": 3}))
