"""Build script for the optional compiled mixing kernels.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile must not abort installation.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    mix = Extension(
        "noisebands._mix",
        sources=["src/noisebands/_mix.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-fopenmp"],
        extra_link_args=["-fopenmp"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    mix.optional = True
    ext_modules = cythonize([mix], language_level="3")

setup(ext_modules=ext_modules)
