"""Build script: compiles the Cython hot-loop kernels when a toolchain is
available.  The package falls back to the pure-numpy kernels at import time
if the extension is missing, so a failed build only costs speed."""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from setuptools.extension import Extension
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "instrumental._kernels",
                ["src/instrumental/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
