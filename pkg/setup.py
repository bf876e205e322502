import os
import sys

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

compile_args = ["-O3"]
link_args = []
if sys.platform.startswith("linux") and not os.environ.get("DISSIPSCAT_NO_OPENMP"):
    compile_args.append("-fopenmp")
    link_args.append("-fopenmp")

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [Extension("dissipscat._ckernels", ["src/dissipscat/_ckernels.pyx"],
                   include_dirs=[np.get_include()],
                   extra_compile_args=compile_args, extra_link_args=link_args,
                   define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")])],
        language_level=3)

setup(ext_modules=ext_modules)
