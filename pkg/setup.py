"""Build script for the optional compiled smoother kernel.

The package is fully functional without the extension; nuvssm.kernels falls
back to the pure-numpy implementation if the import fails.
"""

from setuptools import setup, Extension

ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy as np

    ext = Extension(
        "nuvssm._mbf",
        ["src/nuvssm/_mbf.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], language_level=3)
except ImportError:
    pass

setup(ext_modules=ext_modules)
