"""Build hook: compile the quadrature kernel extension when Cython is available.

The package works without the extension (phasekit.kernel falls back to the numpy
backend), so a missing compiler or Cython never blocks installation.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "phasekit._kernel",
                ["src/phasekit/_kernel.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
