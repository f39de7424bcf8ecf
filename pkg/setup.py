import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("PMARK_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext = Extension(
            "pmark._kernels",
            ["src/pmark/_kernels.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3", "-funroll-loops"],
            optional=True,  # fall back to the NumPy backend if the build fails
        )
        ext_modules = cythonize([ext], language_level="3")
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
