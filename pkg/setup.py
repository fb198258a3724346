"""Build the optional Cython kernels.

The package works without them: ``spectrum_market.kernels`` falls back to
the pure-Python implementation when the extension is missing.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("SPECTRUM_MARKET_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "spectrum_market._kernels",
                    ["src/spectrum_market/_kernels.pyx"],
                    # keep IEEE semantics so both backends agree bit for bit
                    extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
                )
            ],
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False,
                                 "cdivision": True, "initializedcheck": False},
        )

setup(ext_modules=ext_modules)
