"""Builds the compiled kernel core.

The extension is optional: if Cython or a C compiler is unavailable the
package installs without it and falls back to the pure numpy kernels at
import time (see ddsp_voxkit.kernels).
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "ddsp_voxkit.kernels._core",
                sources=["src/ddsp_voxkit/kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
