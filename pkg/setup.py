"""Build script for the optional compiled hot-loop kernels.

The extension is a speed-up only; if Cython or a C compiler is missing the
package falls back to the pure-numpy implementations at import time.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "ethsentinel._hot_c",
                ["src/ethsentinel/_hot_c.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
