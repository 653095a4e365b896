import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension(
    "fconn._kernels._native",
    ["src/fconn/_kernels/_native.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O3", "-funroll-loops"],
)

setup(ext_modules=cythonize([ext], language_level="3"))
