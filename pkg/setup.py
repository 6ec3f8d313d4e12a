import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("MAPFSPLIT_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "mapfsplit._core",
                    ["src/mapfsplit/_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-std=c++14"],
                    language="c++",
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
