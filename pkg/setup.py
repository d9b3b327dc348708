import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# Compiled hot kernels (Hough voting, LSD region growing, ray casting).
# A pure-Python port lives in bevmap/kernels/_fallback.py and is selected
# at import time when this extension is unavailable.
extensions = [
    Extension(
        "bevmap.kernels._compiled",
        ["src/bevmap/kernels/_compiled.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
