import numpy
from setuptools import Extension, setup

# The compiled kernels are optional: the package falls back to the numpy
# reference backend when the extension is missing (see opgrowth.kernels).
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "opgrowth.kernels._fast",
                ["src/opgrowth/kernels/_fast.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
