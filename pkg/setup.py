"""Build script for the optional compiled kernel core.

The package works without the extension: spectral_bridge.kernels falls back
to its pure-numpy implementation when the compiled module is absent.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "spectral_bridge.kernels._ckernels",
                ["src/spectral_bridge/kernels/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
